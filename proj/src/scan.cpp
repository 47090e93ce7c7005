#include "scarlab/scan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace scarlab {

Bump::Bump(double radius) : radius_(radius) {
  if (!(radius > 0.0)) throw ScanError("cutoff radius must be positive");
}

double Bump::operator()(double s) const {
  const double q = s / radius_;
  if (std::abs(q) >= 1.0) return 0.0;
  const double w = 1.0 - q * q;
  return w * w * w * w;
}

std::vector<WindowCount> window_count_scan(SpectrumSolver& solver, const std::vector<int>& n_range, double a) {
  if (a < 0.0) throw ScanError("window halfwidth must be >= 0");
  std::vector<WindowCount> out;
  out.reserve(n_range.size());
  for (int n : n_range) {
    const double c = static_cast<double>(n) * n;
    std::size_t count = 0;
    if (a > 0.0) count = solver.count_below(c + a) - solver.count_below(c - a);
    out.push_back({n, count});
  }
  return out;
}

std::vector<WindowCount> find_loitering(const std::vector<WindowCount>& counts, std::size_t M_max) {
  std::vector<WindowCount> out;
  for (const auto& c : counts)
    if (c.count <= M_max) out.push_back(c);
  std::stable_sort(out.begin(), out.end(), [](const WindowCount& x, const WindowCount& y) {
    return x.count != y.count ? x.count < y.count : x.n < y.n;
  });
  return out;
}

namespace {

void check_cutoffs(const DomainSpec& spec, const Cutoffs& cut) {
  if (cut.eta.radius() >= spec.alpha() || cut.zeta.radius() >= spec.beta()) {
    std::ostringstream os;
    os << "cutoff support (" << cut.eta.radius() << ", " << cut.zeta.radius() << ") leaks outside the rectangle ("
       << spec.alpha() << ", " << spec.beta() << ")";
    throw ScanError(os.str());
  }
}

}  // namespace

double bb_mass_position(const EigenPair& pair, const Grid& grid, const Cutoffs& cut) {
  check_cutoffs(grid.spec(), cut);
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double u = pair.u[static_cast<Eigen::Index>(k)];
    acc += grid.weight(k) * cut.eta(grid.x(k)) * cut.zeta(grid.y(k)) * u * u;
  }
  return grid.dx() * grid.dx() * acc;
}

double bb_mass_baseline(const DomainSpec& spec, const Cutoffs& cut) {
  check_cutoffs(spec, cut);
  return cut.eta.integral() * cut.zeta.integral() / spec.area();
}

double bb_mass_momentum(const EigenPair& pair, const Grid& grid, const Bump& zeta, double t) {
  if (!(pair.E > 0.0)) throw ScanError("bb_mass_momentum needs E > 0");
  const PhiProfile phi;
  const double h = 1.0 / std::sqrt(pair.E);
  const double dx = grid.dx();
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double p = phi.at(grid.x(k), t).value;
    if (p == 0.0) continue;
    const long e = grid.neighbor(k, kEast);
    const long w = grid.neighbor(k, kWest);
    const double ue = e >= 0 ? pair.u[e] : 0.0;
    const double uw = w >= 0 ? pair.u[w] : 0.0;
    const double d = h * (ue - uw) / (2.0 * dx);
    const double z = zeta(grid.y(k));
    acc += grid.weight(k) * z * z * p * d * d;
  }
  return dx * dx * acc;
}

ScarReport scar_report(SpectrumSolver& solver, const Grid& grid, const ChiProfile& chi, int n, double halfwidth,
                       const Cutoffs& cut) {
  const auto q = make_quasimode(grid, chi, n);
  const auto a = analyze_quasimode(solver, grid, q, halfwidth);
  ScarReport r;
  r.t = grid.spec().t();
  r.n = n;
  r.a = a.window.halfwidth;
  r.M = a.window.pairs.size();
  r.mass = a.mass;
  r.dx = grid.dx();
  r.pigeonhole_bound = a.bound;
  if (a.best.found) {
    const auto& best = a.window.pairs[a.best.index];
    r.best_overlap = a.best.overlap;
    r.best_E = best.E;
    r.bb_mass_position = bb_mass_position(best, grid, cut);
    r.bb_mass_momentum = bb_mass_momentum(best, grid, cut.zeta, r.t);
  }
  for (double v : {r.mass, r.best_overlap, r.bb_mass_position}) {
    if (v < -1e-12 || v > 1.0 + 1e-8) throw std::logic_error("scar report mass field outside [0, 1]");
  }
  r.scar_candidate = r.mass >= 0.75 && a.best.found && r.best_overlap >= r.pigeonhole_bound &&
                     r.bb_mass_position > kScarExcess * bb_mass_baseline(grid.spec(), cut);
  return r;
}

BandStats band_stats(const std::vector<EigenPair>& pairs, const Grid& grid, double t, const Cutoffs& cut) {
  BandStats s;
  s.count = pairs.size();
  if (pairs.empty()) return s;
  std::vector<double> momentum;
  momentum.reserve(pairs.size());
  for (const auto& p : pairs) {
    s.mean_position += bb_mass_position(p, grid, cut);
    momentum.push_back(bb_mass_momentum(p, grid, cut.zeta, t));
  }
  s.mean_position /= static_cast<double>(pairs.size());
  std::sort(momentum.begin(), momentum.end());
  const std::size_t n = momentum.size();
  s.median_momentum = n % 2 ? momentum[n / 2] : 0.5 * (momentum[n / 2 - 1] + momentum[n / 2]);
  return s;
}

std::string to_json_line(const ScarReport& r) {
  nlohmann::ordered_json j;
  j["t"] = r.t;
  j["n"] = r.n;
  j["a"] = r.a;
  j["M"] = r.M;
  j["mass"] = r.mass;
  j["best_overlap"] = r.best_overlap;
  j["best_E"] = r.best_E;
  j["pigeonhole_bound"] = r.pigeonhole_bound;
  j["bb_mass_position"] = r.bb_mass_position;
  j["bb_mass_momentum"] = r.bb_mass_momentum;
  j["dx"] = r.dx;
  j["scar_candidate"] = r.scar_candidate;
  return j.dump();
}

void write_summary_row(std::ostream& os, const ScarReport& r) {
  char buf[320];
  std::snprintf(buf, sizeof buf, "%.10g,%d,%.12g,%zu,%.12g,%.12g,%.12g,%.12g,%.12g,%d\n", r.t, r.n, r.a, r.M, r.mass,
                r.best_overlap, r.pigeonhole_bound, r.bb_mass_position, r.bb_mass_momentum, r.scar_candidate ? 1 : 0);
  os << buf;
}

}  // namespace scarlab
