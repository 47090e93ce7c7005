#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "run_config.hpp"
#include "scarlab/scan.hpp"
#include "scarlab/variation.hpp"

namespace fs = std::filesystem;
using namespace scarlab;
using namespace scarlab::cli;

namespace {

constexpr const char* kRhoConvention = "outward_normal_velocity_dAdt_pi2";

// Runs fn(0..count-1) on up to `workers` threads; results are placed by index
// by the caller, so the merge order never depends on scheduling.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < count;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_meta(const RunConfig& c) {
  return "# scarlab command=" + c.command + " config_hash=" + hex(c.hash) + " dx=" + fmt(c.dx) +
         " domain=" + to_string(c.domain) +
         " bc=" + to_string(c.bc.kind) + " rho_convention=" + kRhoConvention + "\n";
}

nlohmann::ordered_json json_meta(const RunConfig& c) {
  nlohmann::ordered_json m;
  m["command"] = c.command;
  m["config_hash"] = hex(c.hash);
  m["dx"] = c.dx;
  m["domain"] = to_string(c.domain);
  m["bc"] = to_string(c.bc.kind);
  m["rho_convention"] = kRhoConvention;
  return m;
}

// Files are kept in memory until every computation succeeded.
using Outputs = std::vector<std::pair<std::string, std::string>>;

struct Level {
  DomainSpec spec;
  Grid grid;
  DiscreteOperator op;
  Level(const RunConfig& c, double t) : spec(c.spec(t)), grid(build_grid(spec, c.dx)), op(assemble_laplacian(grid)) {}
};

void log_perturbations(const std::vector<std::string>& lines) {
  for (const auto& l : lines) std::cerr << "note: " << l << "\n";
}

Outputs cmd_spectrum(const RunConfig& c) {
  std::vector<std::string> rows(c.ts.size()), coo(c.ts.size());
  parallel_for(c.ts.size(), c.workers, [&](std::size_t i) {
    const double t = c.ts[i];
    Level L(c, t);
    SpectrumSolver solver(L.op);
    std::ostringstream os;
    if (c.center > 0.0) {
      const auto w = solver.window(c.center, c.halfwidth);
      log_perturbations(w.perturbations);
      write_spectrum_rows(os, t, w.pairs, c.center, c.halfwidth);
    } else {
      const auto s = solver.lowest(c.m);
      write_spectrum_rows(os, t, s.pairs, NAN, NAN);
    }
    rows[i] = os.str();
    if (c.export_operator) {
      std::ostringstream ex;
      export_coordinate(L.op, ex);
      coo[i] = ex.str();
    }
  });
  std::string csv = csv_meta(c) + kSpectrumHeader + "\n";
  for (const auto& r : rows) csv += r;
  Outputs out{{"spectrum.csv", csv}};
  if (c.export_operator) {
    for (std::size_t i = 0; i < c.ts.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "operator_t%.6g.coo", c.ts[i]);
      out.emplace_back(name, coo[i]);
    }
  }
  return out;
}

Outputs cmd_flow(const RunConfig& c) {
  TrackOptions opt;
  const auto branches = track_branches(c.spec(c.ts.front()), c.ts, c.m, c.dx, opt);
  std::ostringstream os;
  os << csv_meta(c) << kBranchHeader << "\n";
  write_branch_rows(os, branches);
  return {{"branches.csv", os.str()}};
}

Outputs cmd_scan(const RunConfig& c) {
  const auto ns = c.n_range();
  const ChiProfile chi = make_chi(c.chi);
  const Cutoffs cut;
  std::vector<std::vector<ScarReport>> reports(c.ts.size());
  std::vector<double> baselines(c.ts.size());
  if (!ns.empty()) {
    parallel_for(c.ts.size(), c.workers, [&](std::size_t i) {
      Level L(c, c.ts[i]);
      SpectrumSolver solver(L.op);
      baselines[i] = bb_mass_baseline(L.spec, cut);
      for (int n : ns) reports[i].push_back(scar_report(solver, L.grid, chi, n, c.halfwidth, cut));
    });
  }
  auto meta = json_meta(c);
  meta["chi"] = to_string(c.chi);
  meta["eta_radius"] = cut.eta.radius();
  meta["zeta_radius"] = cut.zeta.radius();
  meta["scar_rule"] = "mass >= 0.75 and best_overlap >= pigeonhole_bound and bb_mass_position > 2 * baseline";
  meta["scar_excess"] = kScarExcess;
  auto base = nlohmann::ordered_json::array();
  if (!ns.empty())
    for (std::size_t i = 0; i < c.ts.size(); ++i) base.push_back({{"t", c.ts[i]}, {"value", baselines[i]}});
  meta["bb_mass_baseline"] = base;
  nlohmann::ordered_json head;
  head["meta"] = meta;

  std::string jsonl = head.dump() + "\n";
  std::ostringstream summary;
  summary << csv_meta(c) << kScanSummaryHeader << "\n";
  for (const auto& per_t : reports)
    for (const auto& r : per_t) {
      jsonl += to_json_line(r) + "\n";
      write_summary_row(summary, r);
    }
  return {{"scar_reports.jsonl", jsonl}, {"scan_summary.csv", summary.str()}};
}

Outputs cmd_quasimode(const RunConfig& c) {
  const auto ns = c.n_range();
  const ChiProfile chi = make_chi(c.chi);
  std::vector<std::string> rows(c.ts.size());
  if (!ns.empty()) {
    parallel_for(c.ts.size(), c.workers, [&](std::size_t i) {
      Level L(c, c.ts[i]);
      SpectrumSolver solver(L.op);
      std::ostringstream os;
      for (int n : ns) {
        const auto q = make_quasimode(L.grid, chi, n);
        const auto a = analyze_quasimode(solver, L.grid, q, c.halfwidth);
        log_perturbations(a.window.perturbations);
        write_quasimode_row(os, c.ts[i], n, a);
      }
      rows[i] = os.str();
    });
  }
  std::string csv = csv_meta(c) + kQuasimodeHeader + "\n";
  for (const auto& r : rows) csv += r;
  return {{"quasimodes.csv", csv}};
}

Outputs cmd_report(const RunConfig& c) {
  struct PerT {
    Spectrum spectrum;
    nlohmann::ordered_json entry;
  };
  std::vector<PerT> per(c.ts.size());
  parallel_for(c.ts.size(), c.workers, [&](std::size_t i) {
    const double t = c.ts[i];
    Level L(c, t);
    SpectrumSolver solver(L.op);
    auto s = solver.lowest(c.m);
    nlohmann::ordered_json e;
    e["t"] = t;
    e["area"] = L.spec.area();
    e["perimeter"] = L.spec.perimeter();
    const double k = boundary_velocity_integral(L.spec);
    e["k"] = k;
    e["dA_dt"] = kPi * kPi;
    e["k_over_A"] = k / L.spec.area();
    e["count"] = s.pairs.size();
    e["E_first"] = s.pairs.front().E;
    e["E_last"] = s.pairs.back().E;
    e["weyl_c1_expected"] = L.spec.area() / (4 * kPi);
    e["weyl_c2_expected"] = L.spec.perimeter() / (4 * kPi);
    if (c.bc.kind == BcKind::Dirichlet && s.pairs.size() >= 100) {
      const auto trace = boundary_trace(L.spec, std::max<std::size_t>(64, static_cast<std::size_t>(2 * L.spec.perimeter() / c.dx)));
      const auto links = build_boundary_links(L.grid, trace);
      std::vector<double> f;
      for (const auto& p : s.pairs) f.push_back(hadamard_rate_boundary(p, L.spec, trace, links).f);
      const auto lim = f_limit_check(L.spec, f);
      e["f_limit"] = {{"median_window_mean", lim.median_window_mean}, {"mean", lim.mean}, {"k_over_A", lim.k_over_A}};
    } else {
      e["f_limit"] = nullptr;
    }
    for (auto& p : s.pairs) p.u.resize(0);
    per[i] = {std::move(s), std::move(e)};
  });
  std::vector<Spectrum> spectra;
  for (auto& p : per) spectra.push_back(p.spectrum);
  const auto weyl = weyl_fit(spectra, 1);

  nlohmann::ordered_json doc;
  auto meta = json_meta(c);
  meta["m"] = c.m;
  doc["meta"] = meta;
  auto arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < per.size(); ++i) {
    auto e = per[i].entry;
    e["weyl_c1"] = weyl.fits[i].c1;
    e["weyl_c2"] = weyl.fits[i].c2;
    arr.push_back(e);
  }
  doc["per_t"] = arr;
  if (c.m >= 20) {
    doc["gamma"] = weyl.gamma;
    doc["Gamma"] = weyl.Gamma;
  } else {
    doc["gamma"] = nullptr;
    doc["Gamma"] = nullptr;
  }
  return {{"report.json", doc.dump(2) + "\n"}};
}

void write_outputs(const RunConfig& c, const Outputs& files) {
  fs::create_directories(c.out);
  for (const auto& [name, body] : files) {
    std::ofstream f(fs::path(c.out) / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (fs::path(c.out) / name).string());
    f << body;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral experiments on partially rectangular billiards"};
  app.require_subcommand(1, 1);
  std::string config_path;
  KeyValues flags;
  const std::map<std::string, std::string> help{
      {"domain", "stadium | rectangle"},
      {"t", "aspect parameter (single run)"},
      {"t_start", "t grid start"},
      {"t_stop", "t grid stop (inclusive)"},
      {"t_step", "t grid step"},
      {"dx", "lattice spacing, e.g. pi/64"},
      {"bc", "dirichlet | neumann | robin"},
      {"robin_b", "Robin coefficient b in d_n u = b u"},
      {"chi", "quasimode profile: cos2 | smooth"},
      {"phi", "flow profile: poly4"},
      {"n_min", "first quasimode index"},
      {"n_max", "last quasimode index"},
      {"halfwidth", "window halfwidth override"},
      {"center", "spectrum window centre"},
      {"m", "number of eigenvalues or branches"},
      {"out", "output directory"},
      {"workers", "worker threads"},
      {"export_operator", "also write the operator in coordinate format"}};
  for (const char* name : {"spectrum", "flow", "scan", "quasimode", "report"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("config,-c,--config", config_path, "key = value config file");
    for (const auto& key : known_keys()) {
      sub->add_option_function<std::string>(
          "--" + key, [&flags, key](const std::string& v) { flags[key] = v; }, help.at(key));
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  RunConfig config;
  try {
    KeyValues values = config_path.empty() ? KeyValues{} : read_config_file(config_path);
    for (const auto& [k, v] : flags) values[k] = v;
    config = validate(command, values);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    Outputs files;
    if (command == "spectrum") files = cmd_spectrum(config);
    else if (command == "flow") files = cmd_flow(config);
    else if (command == "scan") files = cmd_scan(config);
    else if (command == "quasimode") files = cmd_quasimode(config);
    else files = cmd_report(config);
    write_outputs(config, files);
  } catch (const CertificationError& e) {
    std::cerr << "certification failure: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
