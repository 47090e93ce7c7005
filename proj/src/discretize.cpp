#include "scarlab/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace scarlab {

namespace {

constexpr double kNodeTol = 1e-9;  // relative to dx

bool near_integer(double v) { return std::abs(v - std::round(v)) < 1e-9 * std::max(1.0, std::abs(v)); }

double nearest_gap(const std::vector<double>& cuts, double c) {
  auto it = std::lower_bound(cuts.begin(), cuts.end(), c);
  double best = std::numeric_limits<double>::infinity();
  if (it != cuts.end()) best = std::min(best, *it - c);
  if (it != cuts.begin()) best = std::min(best, c - *std::prev(it));
  return best;
}

double first_above(const std::vector<double>& cuts, double c) {
  auto it = std::upper_bound(cuts.begin(), cuts.end(), c);
  return it == cuts.end() ? std::numeric_limits<double>::infinity() : *it;
}

double first_below(const std::vector<double>& cuts, double c) {
  auto it = std::lower_bound(cuts.begin(), cuts.end(), c);
  return it == cuts.begin() ? -std::numeric_limits<double>::infinity() : *std::prev(it);
}

void check_resolution(const DomainSpec& spec, double dx) {
  const auto& pieces = spec.pieces();
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const auto& p = pieces[k];
    if (p.role != PieceRole::RightWing && p.role != PieceRole::LeftWing) continue;
    std::ostringstream os;
    if (const auto* arc = std::get_if<Arc>(&p.shape)) {
      if (arc->radius < 2.0 * dx) {
        os << "dx = " << dx << " does not resolve boundary piece " << k << " (arc of radius " << arc->radius
           << ")";
        throw DiscretizationError(os.str());
      }
    }
    if (p.length() < dx) {
      os << "dx = " << dx << " does not resolve boundary piece " << k << " (length " << p.length() << ")";
      throw DiscretizationError(os.str());
    }
  }
}

}  // namespace

long Grid::index(int i, int j) const {
  const int a = i - i0_;
  const int b = j - j0_;
  if (a < 0 || b < 0 || a >= ni_ || b >= nj_) return -1;
  return lattice_[static_cast<std::size_t>(b) * static_cast<std::size_t>(ni_) + static_cast<std::size_t>(a)];
}

double Grid::inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  return dx_ * dx_ * (u.cwiseProduct(v).cwiseProduct(weights_)).sum();
}

double Grid::norm(const Eigen::VectorXd& u) const { return std::sqrt(inner(u, u)); }

double Grid::min_cut_fraction() const {
  double best = 1.0;
  for (const auto& arms : arm_) {
    for (double a : arms) best = std::min(best, a / dx_);
  }
  return best;
}

Grid build_grid(const DomainSpec& spec, double dx) {
  if (!(dx > 0.0)) throw DiscretizationError("dx must be positive");
  if (dx > kPi / 16.0 * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "dx = " << dx << " exceeds pi/16";
    throw DiscretizationError(os.str());
  }
  check_resolution(spec, dx);

  Grid g(spec);
  g.dx_ = dx;
  const BcKind bc = spec.bc().kind;

  if (bc != BcKind::Dirichlet) {
    if (spec.kind() != DomainKind::Rectangle) {
      throw DiscretizationError(to_string(bc) + " condition is only supported on the rectangle (flat pieces)");
    }
    const double na = spec.alpha() / dx;
    const double nb = spec.beta() / dx;
    if (!near_integer(na) || !near_integer(nb)) {
      throw DiscretizationError(to_string(bc) + " condition needs a boundary-aligned lattice (alpha/dx, beta/dx integer)");
    }
    const int Na = static_cast<int>(std::lround(na));
    const int Nb = static_cast<int>(std::lround(nb));
    g.vertex_centered_ = true;
    g.i0_ = -Na;
    g.j0_ = -Nb;
    g.ni_ = 2 * Na + 1;
    g.nj_ = 2 * Nb + 1;
    g.lattice_.assign(static_cast<std::size_t>(g.ni_) * static_cast<std::size_t>(g.nj_), -1);
    for (int j = -Nb; j <= Nb; ++j) {
      for (int i = -Na; i <= Na; ++i) {
        g.lattice_[static_cast<std::size_t>(j + Nb) * static_cast<std::size_t>(g.ni_) +
                   static_cast<std::size_t>(i + Na)] = static_cast<long>(g.nodes_.size());
        g.nodes_.push_back({i, j});
        const double wx = std::abs(i) == Na ? 0.5 : 1.0;
        const double wy = std::abs(j) == Nb ? 0.5 : 1.0;
        g.weight_.push_back(wx * wy);
      }
    }
    for (std::size_t k = 0; k < g.nodes_.size(); ++k) {
      const int i = g.nodes_[k][0];
      const int j = g.nodes_[k][1];
      g.neighbor_.push_back({g.index(i + 1, j), g.index(i - 1, j), g.index(i, j + 1), g.index(i, j - 1)});
      g.arm_.push_back({dx, dx, dx, dx});
    }
  } else {
    // Bounding box from a dense sampling of the boundary.
    double xmax = 0.0;
    double ymax = 0.0;
    for (const auto& p : spec.pieces()) {
      for (int s = 0; s <= 256; ++s) {
        const Vec2 q = p.point(s / 256.0);
        xmax = std::max(xmax, std::abs(q.x));
        ymax = std::max(ymax, std::abs(q.y));
      }
    }
    const int Ni = static_cast<int>(std::ceil(xmax / dx)) + 2;
    const int Nj = static_cast<int>(std::ceil(ymax / dx)) + 2;
    g.i0_ = -Ni;
    g.j0_ = -Nj;
    g.ni_ = 2 * Ni + 1;
    g.nj_ = 2 * Nj + 1;
    g.lattice_.assign(static_cast<std::size_t>(g.ni_) * static_cast<std::size_t>(g.nj_), -1);

    std::vector<std::vector<double>> rows(static_cast<std::size_t>(g.nj_));
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(g.ni_));
    for (int j = -Nj; j <= Nj; ++j) rows[static_cast<std::size_t>(j + Nj)] = spec.crossings(Axis::Horizontal, j * dx);
    for (int i = -Ni; i <= Ni; ++i) cols[static_cast<std::size_t>(i + Ni)] = spec.crossings(Axis::Vertical, i * dx);

    const double tol = kNodeTol * dx;
    for (int j = -Nj; j <= Nj; ++j) {
      const auto& row = rows[static_cast<std::size_t>(j + Nj)];
      for (int i = -Ni; i <= Ni; ++i) {
        const double x = i * dx;
        const double y = j * dx;
        const auto right = std::upper_bound(row.begin(), row.end(), x);
        const bool odd = (std::distance(right, row.end()) % 2) == 1;
        if (!odd) continue;
        if (nearest_gap(row, x) <= tol) continue;
        if (nearest_gap(cols[static_cast<std::size_t>(i + Ni)], y) <= tol) continue;
        g.lattice_[static_cast<std::size_t>(j + Nj) * static_cast<std::size_t>(g.ni_) +
                   static_cast<std::size_t>(i + Ni)] = static_cast<long>(g.nodes_.size());
        g.nodes_.push_back({i, j});
        g.weight_.push_back(1.0);
      }
    }
    if (g.nodes_.empty()) throw DiscretizationError("grid has no interior nodes");

    for (std::size_t k = 0; k < g.nodes_.size(); ++k) {
      const int i = g.nodes_[k][0];
      const int j = g.nodes_[k][1];
      const double x = i * dx;
      const double y = j * dx;
      const auto& row = rows[static_cast<std::size_t>(j + Nj)];
      const auto& col = cols[static_cast<std::size_t>(i + Ni)];
      std::array<long, 4> nb{};
      std::array<double, 4> arm{};
      const std::array<double, 4> cut{first_above(row, x) - x, x - first_below(row, x),
                                      first_above(col, y) - y, y - first_below(col, y)};
      const std::array<long, 4> lattice_nb{g.index(i + 1, j), g.index(i - 1, j), g.index(i, j + 1),
                                           g.index(i, j - 1)};
      for (std::size_t d = 0; d < 4; ++d) {
        if (lattice_nb[d] >= 0 && cut[d] >= dx - tol) {
          nb[d] = lattice_nb[d];
          arm[d] = dx;
        } else {
          nb[d] = -1;
          arm[d] = std::clamp(cut[d], tol, dx);
        }
      }
      g.neighbor_.push_back(nb);
      g.arm_.push_back(arm);
    }
  }

  g.weights_ = Eigen::Map<const Eigen::VectorXd>(g.weight_.data(), static_cast<Eigen::Index>(g.weight_.size()));
  return g;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd DiscreteOperator::apply(const Eigen::VectorXd& u) const {
  return from_scaled(matrix * to_scaled(u));
}

double DiscreteOperator::gershgorin_lower() const {
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < matrix.outerSize(); ++c) {
    double diag = 0.0;
    double off = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrix, c); it; ++it) {
      if (it.row() == it.col()) diag = it.value(); else off += std::abs(it.value());
    }
    lo = std::min(lo, diag - off);
  }
  return lo;
}

double DiscreteOperator::gershgorin_upper() const {
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < matrix.outerSize(); ++c) {
    double diag = 0.0;
    double off = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrix, c); it; ++it) {
      if (it.row() == it.col()) diag = it.value(); else off += std::abs(it.value());
    }
    hi = std::max(hi, diag + off);
  }
  return hi;
}

DiscreteOperator assemble_laplacian(const Grid& grid, BoundaryCondition bc) {
  if (bc.kind != grid.spec().bc().kind) {
    throw DiscretizationError("boundary condition does not match the grid's domain spec");
  }
  const double dx = grid.dx();
  const double inv2 = 1.0 / (dx * dx);
  const auto n = static_cast<Eigen::Index>(grid.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(grid.size() * 5);

  DiscreteOperator op;
  op.bc = bc;
  op.dx = dx;
  op.sqrt_weight = grid.weights().cwiseSqrt();

  if (bc.kind == BcKind::Dirichlet) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double diag = 0.0;
      for (std::size_t d = 0; d < 4; ++d) {
        const auto dir = static_cast<Direction>(d);
        diag += 1.0 / (dx * grid.arm(k, dir));
        const long nb = grid.neighbor(k, dir);
        if (nb >= 0) triplets.emplace_back(static_cast<Eigen::Index>(k), nb, -inv2);
      }
      triplets.emplace_back(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k), diag);
    }
  } else {
    const double b = bc.kind == BcKind::Robin ? bc.robin_b : 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double diag = 0.0;
      const double sk = op.sqrt_weight[static_cast<Eigen::Index>(k)];
      for (std::size_t axis = 0; axis < 2; ++axis) {
        const long plus = grid.neighbor(k, static_cast<Direction>(2 * axis));
        const long minus = grid.neighbor(k, static_cast<Direction>(2 * axis + 1));
        auto add = [&](long nb, double coeff) {
          const double sn = op.sqrt_weight[nb];
          triplets.emplace_back(static_cast<Eigen::Index>(k), nb, sk * coeff / sn);
        };
        diag += 2.0 * inv2;
        if (plus >= 0 && minus >= 0) {
          add(plus, -inv2);
          add(minus, -inv2);
        } else {
          // Ghost node reflected through the boundary node: u_g = u_in + 2 dx b u_k.
          add(plus >= 0 ? plus : minus, -2.0 * inv2);
          diag -= 2.0 * b / dx;
        }
      }
      triplets.emplace_back(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k), diag);
    }
  }

  op.matrix.resize(n, n);
  op.matrix.setFromTriplets(triplets.begin(), triplets.end());
  op.matrix.makeCompressed();

  const Eigen::SparseMatrix<double> transposed = op.matrix.transpose();
  const double scale = op.matrix.coeffs().cwiseAbs().maxCoeff();
  const Eigen::SparseMatrix<double> skew = op.matrix - transposed;
  const double diff = skew.nonZeros() ? skew.coeffs().cwiseAbs().maxCoeff() : 0.0;
  op.asymmetry = diff / scale;
  return op;
}

void export_coordinate(const DiscreteOperator& op, std::ostream& os) {
  os << op.matrix.rows() << ' ' << op.matrix.cols() << ' ' << op.matrix.nonZeros() << '\n';
  char buf[96];
  for (Eigen::Index c = 0; c < op.matrix.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.matrix, c); it; ++it) {
      std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(it.row()), static_cast<long>(it.col()),
                    it.value());
      os << buf;
    }
  }
}

// ---------------------------------------------------------------------------
// Normal derivatives: local least-squares cubic through nearby unknowns and
// zero values sampled along the boundary itself.

namespace {

constexpr double kFitRadius = 4.0;      // in units of dx
constexpr double kZeroSpacing = 0.5;    // boundary zero points, units of dx
constexpr int kFitDegree = 3;

std::vector<std::array<int, 2>> monomials() {
  std::vector<std::array<int, 2>> out;
  for (int total = 0; total <= kFitDegree; ++total) {
    for (int a = total; a >= 0; --a) out.push_back({a, total - a});
  }
  return out;
}

double arclength_gap(double a, double b, double perimeter) {
  double d = std::fmod(std::abs(a - b), perimeter);
  return std::min(d, perimeter - d);
}

}  // namespace

BoundaryLinks build_boundary_links(const Grid& grid, const BoundaryTrace& trace) {
  if (grid.vertex_centered()) {
    throw DiscretizationError("normal derivative extraction expects a Dirichlet grid");
  }
  const DomainSpec& spec = grid.spec();
  const double dx = grid.dx();
  const double radius = kFitRadius * dx;
  const auto corners = spec.corner_arclengths();
  const auto basis = monomials();
  const auto nb = static_cast<Eigen::Index>(basis.size());
  const int zero_count = static_cast<int>(std::floor(kFitRadius / kZeroSpacing));

  BoundaryLinks links;
  links.stencils.resize(trace.samples.size());
  links.weights.resize(trace.samples.size());

  for (std::size_t s = 0; s < trace.samples.size(); ++s) {
    const auto& smp = trace.samples[s];
    auto& st = links.stencils[s];
    links.weights[s] = smp.weight;

    for (double c : corners) {
      if (arclength_gap(c, smp.arclength, trace.perimeter) < radius) st.flagged = true;
    }
    for (double r : {dx, 2.0 * dx}) {
      if (!spec.contains(smp.point - smp.normal * r)) st.flagged = true;
    }
    if (st.flagged) continue;

    const Vec2 inward = smp.normal * -1.0;
    const Vec2 tang{-smp.normal.y, smp.normal.x};
    std::vector<Vec2> local;
    const int ic = static_cast<int>(std::lround(smp.point.x / dx));
    const int jc = static_cast<int>(std::lround(smp.point.y / dx));
    const int reach = static_cast<int>(std::ceil(kFitRadius)) + 1;
    for (int j = jc - reach; j <= jc + reach; ++j) {
      for (int i = ic - reach; i <= ic + reach; ++i) {
        const long k = grid.index(i, j);
        if (k < 0) continue;
        const Vec2 q = Vec2{i * dx, j * dx} - smp.point;
        if (q.norm() > radius) continue;
        st.nodes.push_back(static_cast<std::size_t>(k));
        local.push_back({q.dot(inward) / dx, q.dot(tang) / dx});
      }
    }
    const auto n_nodes = static_cast<Eigen::Index>(local.size());
    for (int z = -zero_count; z <= zero_count; ++z) {
      const Vec2 q = spec.point_at_arclength(smp.arclength + z * kZeroSpacing * dx) - smp.point;
      local.push_back({q.dot(inward) / dx, q.dot(tang) / dx});
    }
    if (n_nodes < nb) {
      st.flagged = true;
      st.nodes.clear();
      continue;
    }

    Eigen::MatrixXd V(static_cast<Eigen::Index>(local.size()), nb);
    for (Eigen::Index r = 0; r < V.rows(); ++r) {
      for (Eigen::Index c = 0; c < nb; ++c) {
        const auto& m = basis[static_cast<std::size_t>(c)];
        V(r, c) = std::pow(local[static_cast<std::size_t>(r)].x, m[0]) *
                  std::pow(local[static_cast<std::size_t>(r)].y, m[1]);
      }
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(V);
    if (cod.rank() < nb) {
      st.flagged = true;
      st.nodes.clear();
      continue;
    }
    const Eigen::MatrixXd pinv = cod.pseudoInverse();
    // Monomial index 1 is xi (inward coordinate); outward derivative flips sign.
    st.coefficients.resize(static_cast<std::size_t>(n_nodes));
    for (Eigen::Index r = 0; r < n_nodes; ++r) {
      st.coefficients[static_cast<std::size_t>(r)] = -pinv(1, r) / dx;
    }
  }

  // Hand the weight of excluded samples to the nearest accepted neighbours.
  const std::size_t n = trace.samples.size();
  for (std::size_t s = 0; s < n; ++s) {
    if (!links.stencils[s].flagged) continue;
    ++links.flagged;
  }
  if (links.flagged == n) throw DiscretizationError("every boundary sample was excluded from quadrature");
  std::vector<double> w = links.weights;
  for (std::size_t s = 0; s < n; ++s) {
    if (!links.stencils[s].flagged) continue;
    std::size_t prev = s;
    std::size_t next = s;
    do prev = (prev + n - 1) % n; while (links.stencils[prev].flagged);
    do next = (next + 1) % n; while (links.stencils[next].flagged);
    w[prev] += 0.5 * links.weights[s];
    w[next] += 0.5 * links.weights[s];
    w[s] = 0.0;
  }
  links.weights = std::move(w);
  return links;
}

std::vector<double> boundary_normal_derivative(const BoundaryLinks& links, const Eigen::VectorXd& u) {
  std::vector<double> out(links.stencils.size(), 0.0);
  for (std::size_t s = 0; s < links.stencils.size(); ++s) {
    const auto& st = links.stencils[s];
    if (st.flagged) continue;
    double acc = 0.0;
    for (std::size_t r = 0; r < st.nodes.size(); ++r) {
      acc += st.coefficients[r] * u[static_cast<Eigen::Index>(st.nodes[r])];
    }
    out[s] = acc;
  }
  return out;
}

std::vector<double> boundary_normal_derivative(const Grid& grid, const Eigen::VectorXd& u,
                                               const BoundaryTrace& trace) {
  return boundary_normal_derivative(build_boundary_links(grid, trace), u);
}

// ---------------------------------------------------------------------------

namespace {

struct ColumnProfile {
  std::vector<double> mid;     // phi_t at x_i + dx/2
  std::vector<double> second;  // three-point second difference at x_i
  int i0 = 0;
};

ColumnProfile sample_columns(const Grid& grid, const SampledProfile& phi) {
  int lo = 0;
  int hi = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    lo = std::min(lo, grid.i(k));
    hi = std::max(hi, grid.i(k));
  }
  const double dx = grid.dx();
  ColumnProfile c;
  c.i0 = lo - 1;
  std::vector<double> node;
  for (int i = lo - 1; i <= hi + 1; ++i) node.push_back(phi.profile.at(i * dx, phi.t).value);
  for (int i = lo - 1; i <= hi + 1; ++i) c.mid.push_back(phi.profile.at((i + 0.5) * dx, phi.t).value);
  c.second.assign(node.size(), 0.0);
  for (std::size_t k = 1; k + 1 < node.size(); ++k) {
    c.second[k] = (node[k + 1] - 2.0 * node[k] + node[k - 1]) / (dx * dx);
  }
  return c;
}

double row_weight(const Grid& grid, std::size_t k) {
  // y-part of the trapezoid weight; x-edges in boundary rows carry half weight.
  if (!grid.vertex_centered()) return 1.0;
  const bool top = grid.neighbor(k, kNorth) < 0;
  const bool bottom = grid.neighbor(k, kSouth) < 0;
  return (top || bottom) ? 0.5 : 1.0;
}

double ghost(const Grid& grid, const Eigen::VectorXd& u, std::size_t k, Direction d) {
  const long nb = grid.neighbor(k, d);
  if (nb >= 0) return u[nb];
  return grid.vertex_centered() ? u[static_cast<Eigen::Index>(k)] : 0.0;
}

}  // namespace

double quadratic_form_Q(const Grid& grid, const Eigen::VectorXd& u, const SampledProfile& phi) {
  const ColumnProfile c = sample_columns(grid, phi);
  const double dx = grid.dx();
  double flux = 0.0;
  double potential = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto col = static_cast<std::size_t>(grid.i(k) - c.i0);
    const double uk = u[static_cast<Eigen::Index>(k)];
    const double east = ghost(grid, u, k, kEast);
    const double diff = east - uk;
    flux += row_weight(grid, k) * c.mid[col] * diff * diff;
    // West edge only when it ends on the boundary (interior edges are counted once from the west node).
    if (grid.neighbor(k, kWest) < 0) {
      const double west = ghost(grid, u, k, kWest);
      flux += row_weight(grid, k) * c.mid[col - 1] * (uk - west) * (uk - west);
    }
    potential += grid.weight(k) * c.second[col] * uk * uk;
  }
  return 4.0 * flux - dx * dx * potential;
}

Eigen::VectorXd apply_Q(const Grid& grid, const Eigen::VectorXd& u, const SampledProfile& phi) {
  const ColumnProfile c = sample_columns(grid, phi);
  const double dx = grid.dx();
  Eigen::VectorXd out(u.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto col = static_cast<std::size_t>(grid.i(k) - c.i0);
    const double uk = u[static_cast<Eigen::Index>(k)];
    const double east = ghost(grid, u, k, kEast);
    const double west = ghost(grid, u, k, kWest);
    const double div = c.mid[col] * (east - uk) - c.mid[col - 1] * (uk - west);
    // Divide by the x-weight so that dx^2 sum w_k (Qu)_k u_k reproduces the flux sum.
    const double wx = grid.weight(k) / row_weight(grid, k);
    out[static_cast<Eigen::Index>(k)] = -4.0 * div / (dx * dx) / wx - c.second[col] * uk;
  }
  return out;
}

}  // namespace scarlab
