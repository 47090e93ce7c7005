#include "scarlab/quasimode.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/Eigenvalues>

namespace scarlab {

namespace {

template <typename F>
double integrate(F&& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
}

// 1-D ghost-point Robin operator on j = -N..N, symmetrized with trapezoid weights.
Eigen::VectorXd robin_profile(int N, double dx, double b, int n, double* eigenvalue) {
  const int m = 2 * N + 1;
  if (n >= m) throw QuasimodeError("Robin mode number exceeds the 1-D grid size");
  Eigen::VectorXd w = Eigen::VectorXd::Ones(m);
  w[0] = w[m - 1] = 0.5;
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const double inv2 = 1.0 / (dx * dx);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    A(i, i) = 2.0 * inv2;
    if (i > 0) A(i, i - 1) = -inv2;
    if (i < m - 1) A(i, i + 1) = -inv2;
  }
  A(0, 1) = A(m - 1, m - 2) = -2.0 * inv2;
  A(0, 0) -= 2.0 * b / dx;
  A(m - 1, m - 1) -= 2.0 * b / dx;
  const Eigen::MatrixXd S = sw.asDiagonal() * A * sw.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
  *eigenvalue = es.eigenvalues()[n];
  Eigen::VectorXd y = es.eigenvectors().col(n).cwiseQuotient(sw);
  if (y[N] < 0.0 || (std::abs(y[N]) < 1e-12 && y[N + 1] < 0.0)) y = -y;
  return y;
}

}  // namespace

std::string to_string(ChiKind kind) { return kind == ChiKind::Cos2 ? "cos2" : "smooth"; }

ChiKind chi_kind_from_string(const std::string& name) {
  if (name == "cos2") return ChiKind::Cos2;
  if (name == "smooth") return ChiKind::Smooth;
  throw QuasimodeError("unknown chi family '" + name + "' (expected cos2 or smooth)");
}

std::string to_string(Parity parity) {
  switch (parity) {
    case Parity::Sin: return "sin";
    case Parity::Cos: return "cos";
    case Parity::Robin: return "robin";
  }
  return "sin";
}

ChiProfile::ChiProfile(ChiKind kind) : kind_(kind), radius_(kPi / 4.0) {
  amplitude_ = std::sqrt((2.0 / kPi) / norm2());
}

ChiProfile ChiProfile::scaled(double factor) const {
  ChiProfile out = *this;
  out.amplitude_ *= factor;
  return out;
}

ProfileValue ChiProfile::at(double x) const {
  if (std::abs(x) >= radius_) return {};
  const double c = amplitude_;
  if (kind_ == ChiKind::Cos2) {
    const double q = std::cos(2.0 * x);
    return {c * q * q, -2.0 * c * std::sin(4.0 * x), -8.0 * c * std::cos(4.0 * x)};
  }
  const double s = x / radius_;
  const double q = 1.0 - s * s;
  const double g = std::exp(-1.0 / q);
  return {c * g, c * g * (-2.0 * s / (q * q)) / radius_,
          c * g * (6.0 * s * s * s * s - 2.0) / (q * q * q * q) / (radius_ * radius_)};
}

double ChiProfile::norm2() const {
  return integrate([&](double x) { const double v = at(x).value; return v * v; }, -radius_, radius_);
}

double ChiProfile::d2_norm2() const {
  return integrate([&](double x) { const double v = at(x).d2; return v * v; }, -radius_, radius_);
}

ChiProfile make_chi(ChiKind kind) { return ChiProfile(kind); }

double residual_bound(const ChiProfile& chi) { return std::sqrt(chi.d2_norm2() / chi.norm2()); }

Quasimode make_quasimode(const Grid& grid, const ChiProfile& chi, int n) {
  if (n < 2) throw QuasimodeError("quasimode index n must be >= 2");
  const double dx = grid.dx();
  if (n * dx > kPi / 8.0 * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "n = " << n << " is under-resolved at dx = " << dx << " (need n*dx <= pi/8)";
    throw QuasimodeError(os.str());
  }
  const DomainSpec& spec = grid.spec();
  if (chi.radius() > spec.alpha()) throw QuasimodeError("chi support leaves the rectangle");

  Quasimode q;
  q.n = n;
  q.K = residual_bound(chi);
  const double beta = spec.beta();
  const BoundaryCondition bc = spec.bc();
  std::vector<double> robin;
  int j0 = 0;
  switch (bc.kind) {
    case BcKind::Dirichlet:
      q.parity = (n % 2 == 0) ? Parity::Sin : Parity::Cos;
      q.center = static_cast<double>(n) * n;
      break;
    case BcKind::Neumann:
      q.parity = Parity::Cos;
      q.center = static_cast<double>(n) * n;
      break;
    case BcKind::Robin: {
      q.parity = Parity::Robin;
      const int N = static_cast<int>(std::lround(beta / dx));
      const Eigen::VectorXd y = robin_profile(N, dx, bc.robin_b, n, &q.center);
      robin.assign(y.data(), y.data() + y.size());
      j0 = -N;
      break;
    }
  }

  q.v.resize(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid.x(k);
    const double y = grid.y(k);
    double Y = 0.0;
    switch (q.parity) {
      case Parity::Sin: Y = std::sin(n * y); break;
      case Parity::Cos: Y = bc.kind == BcKind::Neumann ? std::cos(n * (y + beta)) : std::cos(n * y); break;
      case Parity::Robin: Y = robin[static_cast<std::size_t>(grid.j(k) - j0)]; break;
    }
    q.v[static_cast<Eigen::Index>(k)] = chi(x) * Y;
  }
  const double norm = grid.norm(q.v);
  if (!(norm > 0.0)) throw QuasimodeError("quasimode vanishes on the grid");
  q.v /= norm;
  return q;
}

double discrete_residual(const DiscreteOperator& op, const Grid& grid, const Quasimode& q) {
  return grid.norm(op.apply(q.v) - q.center * q.v);
}

double projection_mass(const Grid& grid, const Quasimode& q, const SpectralWindow& window) {
  if (!window.complete()) throw QuasimodeError("projection_mass needs a certified complete window");
  double mass = 0.0;
  for (const auto& p : window.pairs) {
    if (p.u.size() != q.v.size()) throw QuasimodeError("window eigenvectors were not stored");
    const double c = grid.inner(p.u, q.v);
    mass += c * c;
  }
  return mass;
}

Overlap best_overlap(const Grid& grid, const Quasimode& q, const SpectralWindow& window) {
  Overlap best;
  for (std::size_t i = 0; i < window.pairs.size(); ++i) {
    const auto& p = window.pairs[i];
    const double c = std::abs(grid.inner(p.u, q.v));
    if (!best.found || c > best.overlap) best = {true, p.j, p.E, c, i};
  }
  return best;
}

QuasimodeAnalysis analyze_quasimode(SpectrumSolver& solver, const Grid& grid, const Quasimode& q,
                                    double halfwidth) {
  QuasimodeAnalysis a;
  a.K_continuum = q.K;
  a.K_discrete = discrete_residual(solver.op(), grid, q);
  const double hw = halfwidth > 0.0 ? halfwidth : 2.0 * a.K_discrete;
  // When the window reaches below the spectrum, certify from a floor shift
  // instead: same eigenpairs, no positivity requirement on center - hw.
  a.window = q.center - hw > 0.0 ? solver.window(q.center, hw)
                                 : solver.range(q.center, hw, solver.spectrum_floor(), q.center + hw);
  a.mass = projection_mass(grid, q, a.window);
  a.best = best_overlap(grid, q, a.window);
  a.bound = pigeonhole_bound(a.window.pairs.size());
  if (a.mass >= 0.75 && a.best.overlap < a.bound) {
    std::ostringstream os;
    os << "pigeonhole implication violated at n = " << q.n << ": mass " << a.mass << ", overlap "
       << a.best.overlap << " < " << a.bound;
    throw std::logic_error(os.str());
  }
  return a;
}

void write_quasimode_row(std::ostream& os, double t, int n, const QuasimodeAnalysis& a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.10g,%d,%.12g,%.12g,%zu,%.12g,%.12g,%.12g\n", t, n, a.K_continuum, a.K_discrete,
                a.window.pairs.size(), a.mass, a.best.overlap, a.bound);
  os << buf;
}

}  // namespace scarlab
