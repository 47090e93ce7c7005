#include "scarlab/variation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <sstream>
#include <utility>

#include <Eigen/SVD>

namespace scarlab {

BoundaryRate hadamard_rate_boundary(const EigenPair& pair, const DomainSpec& spec, const BoundaryTrace& trace,
                                    const BoundaryLinks& links) {
  if (spec.bc().kind != BcKind::Dirichlet) {
    throw VariationError("the boundary variation formula is implemented for Dirichlet only");
  }
  if (!(pair.E > 0.0)) throw VariationError("boundary rate needs E > 0");
  const auto dn = boundary_normal_derivative(links, pair.u);
  double integral = 0.0;
  BoundaryRate r;
  r.psi.resize(dn.size());
  const double h = 1.0 / std::sqrt(pair.E);
  for (std::size_t s = 0; s < dn.size(); ++s) {
    integral += links.weights[s] * normal_velocity(spec, trace.samples[s]) * dn[s] * dn[s];
    r.psi[s] = h * dn[s];
  }
  r.f = integral / pair.E;
  r.dotE = -pair.E * r.f;
  return r;
}

BoundaryRate hadamard_rate_boundary(const EigenPair& pair, const DomainSpec& spec, const BoundaryTrace& trace,
                                    const Grid& grid) {
  if (spec.bc().kind != BcKind::Dirichlet) {
    throw VariationError("the boundary variation formula is implemented for Dirichlet only");
  }
  return hadamard_rate_boundary(pair, spec, trace, build_boundary_links(grid, trace));
}

double hadamard_rate_interior(const EigenPair& pair, const Grid& grid, const SampledProfile& phi) {
  return -0.5 * quadratic_form_Q(grid, pair.u, phi);
}

double interior_rate_bound(double t) { return 0.5 * PhiProfile().max_abs_d2(t); }

// ---------------------------------------------------------------------------

namespace {

struct Level {
  explicit Level(DomainSpec s) : spec(std::move(s)) {}
  double t = 0.0;
  std::shared_ptr<Grid> grid;
  DomainSpec spec;
  BoundaryTrace trace;
  BoundaryLinks links;
  std::vector<EigenPair> pairs;
};

// Overlap of u (on grid a) with v (on grid b) over lattice nodes present in both.
class CommonNodes {
 public:
  CommonNodes(const Grid& a, const Grid& b) {
    for (std::size_t k = 0; k < b.size(); ++k) {
      const long ka = a.index(b.i(k), b.j(k));
      if (ka >= 0) pairs_.push_back({static_cast<Eigen::Index>(ka), static_cast<Eigen::Index>(k), b.weight(k)});
    }
    dx2_ = b.dx() * b.dx();
  }
  double inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    double acc = 0.0;
    for (const auto& p : pairs_) acc += p.w * u[p.a] * v[p.b];
    return dx2_ * acc;
  }

 private:
  struct Pair {
    Eigen::Index a, b;
    double w;
  };
  std::vector<Pair> pairs_;
  double dx2_ = 0.0;
};

// Orthogonal factor of the polar decomposition.
Eigen::MatrixXd polar(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

// Groups of consecutive indices whose eigenvalues coincide to rel_tol.
std::vector<std::vector<std::size_t>> clusters(const std::vector<EigenPair>& pairs, double rel_tol) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (!out.empty() && std::abs(pairs[k].E - pairs[out.back().back()].E) <= rel_tol * std::max(pairs[k].E, 1.0)) {
      out.back().push_back(k);
    } else {
      out.push_back({k});
    }
  }
  return out;
}

constexpr double kDegenerate = 1e-7;

Level make_level(const DomainSpec& family, double t, double dx, std::size_t want, const TrackOptions& options) {
  Level L(family.with_t(t));
  L.t = t;
  L.grid = std::make_shared<Grid>(build_grid(L.spec, dx));
  const auto op = assemble_laplacian(*L.grid);
  SpectrumSolver solver(op, options.solver);
  for (std::size_t extra = 0;; ++extra) {
    try {
      L.pairs = solver.lowest(want + extra).pairs;
      break;
    } catch (const CertificationError&) {
      if (extra >= 4) throw;
    }
  }
  if (L.spec.bc().kind == BcKind::Dirichlet) {
    const std::size_t n = options.trace_samples
                              ? options.trace_samples
                              : std::max<std::size_t>(64, static_cast<std::size_t>(std::ceil(2.0 * L.spec.perimeter() / dx)));
    L.trace = boundary_trace(L.spec, n);
    L.links = build_boundary_links(*L.grid, L.trace);
  }
  return L;
}

void annotate(BranchSample& s, const Level& L, const EigenPair& p) {
  s.t = L.t;
  s.E = p.E;
  s.dotE_interior = hadamard_rate_interior(p, *L.grid, {L.t, PhiProfile()});
  if (L.spec.bc().kind == BcKind::Dirichlet) {
    const auto r = hadamard_rate_boundary(p, L.spec, L.trace, L.links);
    s.f = r.f;
    s.dotE_boundary = r.dotE;
  }
}

}  // namespace

std::vector<Branch> track_branches(const DomainSpec& family, const std::vector<double>& t_grid, std::size_t m,
                                   double dx, TrackOptions options) {
  if (m == 0) throw VariationError("track_branches needs m >= 1");
  if (t_grid.empty()) throw VariationError("empty t grid");
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    const double step = t_grid[i] - t_grid[i - 1];
    if (!(step > 0.0)) throw VariationError("t grid must be strictly increasing");
    if (step > options.max_step + 1e-12) {
      std::ostringstream os;
      os << "t grid spacing " << step << " exceeds " << options.max_step;
      throw VariationError(os.str());
    }
  }
  const std::size_t pad = options.pad ? options.pad : std::max<std::size_t>(10, m / 2);

  std::vector<Branch> branches(m);
  // Reference vector per branch and the level it lives on.
  std::vector<Eigen::VectorXd> ref(m);
  std::vector<std::shared_ptr<Grid>> ref_grid(m);
  std::vector<bool> ref_fresh(m, true);  // reference comes from the previous level

  Level prev = make_level(family, t_grid[0], dx, m + pad, options);
  for (std::size_t a = 0; a < m; ++a) {
    branches[a].id = a + 1;
    BranchSample s;
    annotate(s, prev, prev.pairs[a]);
    s.sorted_index = a + 1;
    branches[a].samples.push_back(s);
    ref[a] = prev.pairs[a].u;
    ref_grid[a] = prev.grid;
  }
  // Branch index -> candidate index at the previous level.
  std::vector<std::size_t> prev_slot(m);
  for (std::size_t a = 0; a < m; ++a) prev_slot[a] = a;

  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    Level cur = make_level(family, t_grid[i], dx, m + pad, options);
    const std::size_t nc = cur.pairs.size();

    auto overlap_matrix = [&]() {
      Eigen::MatrixXd O(m, nc);
      std::vector<std::pair<const Grid*, std::unique_ptr<CommonNodes>>> cache;
      for (std::size_t a = 0; a < m; ++a) {
        const CommonNodes* common = nullptr;
        for (auto& [g, c] : cache)
          if (g == ref_grid[a].get()) common = c.get();
        if (!common) {
          cache.emplace_back(ref_grid[a].get(), std::make_unique<CommonNodes>(*ref_grid[a], *cur.grid));
          common = cache.back().second.get();
        }
        for (std::size_t b = 0; b < nc; ++b) O(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = common->inner(ref[a], cur.pairs[b].u);
      }
      return O;
    };

    // Degenerate clusters at the previous level: rotate their references (and
    // recompute the rates stored for them) to line up with the new vectors.
    {
      std::vector<std::size_t> slot_owner(prev.pairs.size(), m);
      for (std::size_t a = 0; a < m; ++a)
        if (ref_fresh[a]) slot_owner[prev_slot[a]] = a;
      const Eigen::MatrixXd O = overlap_matrix();
      for (const auto& cl : clusters(prev.pairs, kDegenerate)) {
        if (cl.size() < 2) continue;
        std::vector<std::size_t> owners;
        for (auto k : cl)
          if (slot_owner[k] < m) owners.push_back(slot_owner[k]);
        if (owners.size() < 2) continue;
        const auto k = static_cast<Eigen::Index>(owners.size());
        Eigen::MatrixXd M(k, static_cast<Eigen::Index>(nc));
        for (Eigen::Index r = 0; r < k; ++r) M.row(r) = O.row(static_cast<Eigen::Index>(owners[static_cast<std::size_t>(r)]));
        // Candidates carrying the most weight of this cluster.
        std::vector<Eigen::Index> cols(static_cast<std::size_t>(nc));
        for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(nc); ++c) cols[static_cast<std::size_t>(c)] = c;
        std::stable_sort(cols.begin(), cols.end(), [&](Eigen::Index x, Eigen::Index y) { return M.col(x).norm() > M.col(y).norm(); });
        Eigen::MatrixXd Msel(k, k);
        for (Eigen::Index c = 0; c < k; ++c) Msel.col(c) = M.col(cols[static_cast<std::size_t>(c)]);
        const Eigen::MatrixXd Q = polar(Msel);
        std::vector<Eigen::VectorXd> rotated(owners.size(), Eigen::VectorXd::Zero(ref[owners[0]].size()));
        for (Eigen::Index c = 0; c < k; ++c)
          for (Eigen::Index r = 0; r < k; ++r) rotated[static_cast<std::size_t>(c)] += Q(r, c) * ref[owners[static_cast<std::size_t>(r)]];
        // Assign rotated vector c to the owner whose old slot order matches.
        for (std::size_t c = 0; c < owners.size(); ++c) {
          const std::size_t a = owners[c];
          ref[a] = rotated[c];
          EigenPair p = prev.pairs[prev_slot[a]];
          p.u = rotated[c];
          BranchSample& s = branches[a].samples.back();
          const bool flagged = s.degenerate;
          const double overlap = s.overlap;
          const std::size_t idx = s.sorted_index;
          annotate(s, prev, p);
          s.degenerate = flagged;
          s.overlap = overlap;
          s.sorted_index = idx;
        }
      }
    }

    // Degenerate clusters at the new level: rotate the new vectors toward the references.
    {
      const Eigen::MatrixXd O = overlap_matrix();
      for (const auto& cl : clusters(cur.pairs, kDegenerate)) {
        if (cl.size() < 2) continue;
        const auto k = static_cast<Eigen::Index>(cl.size());
        Eigen::MatrixXd M(k, static_cast<Eigen::Index>(m));
        for (Eigen::Index r = 0; r < k; ++r) M.row(r) = O.col(static_cast<Eigen::Index>(cl[static_cast<std::size_t>(r)])).transpose();
        std::vector<Eigen::Index> rows(m);
        for (std::size_t a = 0; a < m; ++a) rows[a] = static_cast<Eigen::Index>(a);
        std::stable_sort(rows.begin(), rows.end(), [&](Eigen::Index x, Eigen::Index y) { return M.col(x).norm() > M.col(y).norm(); });
        const Eigen::Index use = std::min<Eigen::Index>(k, static_cast<Eigen::Index>(m));
        Eigen::MatrixXd Msel = Eigen::MatrixXd::Zero(k, k);
        for (Eigen::Index c = 0; c < use; ++c) Msel.col(c) = M.col(rows[static_cast<std::size_t>(c)]);
        const Eigen::MatrixXd Q = polar(Msel);
        std::vector<Eigen::VectorXd> rotated(cl.size(), Eigen::VectorXd::Zero(cur.pairs[cl[0]].u.size()));
        for (Eigen::Index c = 0; c < k; ++c)
          for (Eigen::Index r = 0; r < k; ++r) rotated[static_cast<std::size_t>(c)] += Q(r, c) * cur.pairs[cl[static_cast<std::size_t>(r)]].u;
        for (std::size_t c = 0; c < cl.size(); ++c) cur.pairs[cl[c]].u = rotated[c];
      }
    }

    // Greedy global matching on |overlap|.
    const Eigen::MatrixXd O = overlap_matrix().cwiseAbs();
    struct Entry {
      double v;
      std::size_t a, b;
    };
    std::vector<Entry> entries;
    entries.reserve(m * nc);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < nc; ++b) entries.push_back({O(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), a, b});
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) { return x.v > y.v; });
    std::vector<std::size_t> match(m, nc);
    std::vector<bool> taken(nc, false);
    std::size_t assigned = 0;
    for (const auto& e : entries) {
      if (assigned == m) break;
      if (match[e.a] != nc || taken[e.b]) continue;
      match[e.a] = e.b;
      taken[e.b] = true;
      ++assigned;
    }

    for (std::size_t a = 0; a < m; ++a) {
      const std::size_t b = match[a];
      const auto row = O.row(static_cast<Eigen::Index>(a));
      double top1 = 0.0, top2 = 0.0;
      for (Eigen::Index c = 0; c < row.size(); ++c) {
        const double v = row[c];
        if (v > top1) {
          top2 = top1;
          top1 = v;
        } else if (v > top2) {
          top2 = v;
        }
      }
      BranchSample s;
      annotate(s, cur, cur.pairs[b]);
      s.sorted_index = b + 1;
      s.overlap = row[static_cast<Eigen::Index>(b)];
      s.degenerate = (top1 - top2) < options.ambiguity;
      auto& br = branches[a];
      if (!br.samples.empty() && br.samples.back().sorted_index != s.sorted_index) br.crossings.push_back(s.t);
      br.samples.push_back(s);
      if (!s.degenerate) {
        ref[a] = cur.pairs[b].u;
        ref_grid[a] = cur.grid;
        ref_fresh[a] = true;
        prev_slot[a] = b;
      } else {
        ref_fresh[a] = false;  // frozen through the flagged region
      }
    }
    prev = std::move(cur);
  }

  for (auto& br : branches) {
    auto& s = br.samples;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      s[i].fd_estimate = (s[i + 1].E - s[i - 1].E) / (s[i + 1].t - s[i - 1].t);
    }
  }
  return branches;
}

std::vector<FdError> finite_difference_validation(const Branch& branch) {
  const auto& s = branch.samples;
  if (s.size() < 3) throw VariationError("finite-difference validation needs >= 3 samples");
  std::vector<FdError> out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s[i - 1].degenerate || s[i].degenerate || s[i + 1].degenerate) continue;
    FdError e;
    e.t = s[i].t;
    e.fd = (s[i + 1].E - s[i - 1].E) / (s[i + 1].t - s[i - 1].t);
    const double scale = std::abs(e.fd);
    if (std::isfinite(s[i].dotE_boundary)) e.boundary_rel = std::abs(s[i].dotE_boundary - e.fd) / scale;
    e.interior_rel = std::abs(s[i].dotE_interior - e.fd) / scale;
    if (std::isfinite(s[i].dotE_boundary))
      e.mutual_rel = std::abs(s[i].dotE_boundary - s[i].dotE_interior) / std::abs(s[i].dotE_interior);
    out.push_back(e);
  }
  return out;
}

double boundary_velocity_integral(const DomainSpec& spec, std::size_t samples) {
  const auto trace = boundary_trace(spec, samples);
  double k = 0.0;
  for (const auto& s : trace.samples) k += normal_velocity(spec, s) * s.weight;
  return k;
}

FLimit f_limit_check(const DomainSpec& spec, const std::vector<double>& f, std::size_t window) {
  if (f.size() < 100) {
    std::ostringstream os;
    os << "f_limit_check needs >= 100 branches, got " << f.size();
    throw VariationError(os.str());
  }
  if (window == 0) throw VariationError("window must be positive");
  FLimit out;
  out.k_over_A = boundary_velocity_integral(spec) / spec.area();
  const std::size_t start = f.size() / 2;
  double total = 0.0;
  for (std::size_t j = start; j < f.size(); ++j) total += f[j];
  out.mean = total / static_cast<double>(f.size() - start);
  for (std::size_t j = start; j + window <= f.size(); j += window) {
    double acc = 0.0;
    for (std::size_t k = j; k < j + window; ++k) acc += f[k];
    out.window_means.push_back(acc / static_cast<double>(window));
  }
  auto sorted = out.window_means;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  out.median_window_mean = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return out;
}

namespace {
std::string field(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}
}  // namespace

void write_branch_rows(std::ostream& os, const std::vector<Branch>& branches) {
  for (const auto& br : branches) {
    for (const auto& s : br.samples) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%zu,%.10g,%.15g,", br.id, s.t, s.E);
      os << buf << field(s.f) << ',' << field(s.dotE_boundary) << ',' << field(s.dotE_interior) << ','
         << field(s.fd_estimate) << ',' << (s.degenerate ? 1 : 0) << '\n';
    }
  }
}

}  // namespace scarlab
