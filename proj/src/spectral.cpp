#include "scarlab/spectral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <arpack/arpack.hpp>

namespace scarlab {

struct SpectrumSolver::Factor {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  Eigen::SparseMatrix<double> shifted;
  Eigen::VectorXd diagonal;
  double current = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
};

namespace {

constexpr double kTinyPivot = 1e-12;

// dsaupd/dseupd keep SAVE state between reverse-communication calls.
std::mutex arpack_mutex;

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& Y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(Y.rows(), Y.cols());
}

std::uint64_t seed_for(double lo, double hi) {
  return std::bit_cast<std::uint64_t>(lo) * 0x9E3779B97F4A7C15ULL ^ std::bit_cast<std::uint64_t>(hi);
}

}  // namespace

SpectrumSolver::SpectrumSolver(const DiscreteOperator& op, SolverOptions options)
    : op_(op), options_(options), factor_(std::make_unique<Factor>()) {
  if (op.dimension() == 0) throw SpectralError("operator has dimension 0");
  factor_->shifted = op.matrix;
  factor_->diagonal = op.matrix.diagonal();
  factor_->ldlt.analyzePattern(factor_->shifted);
}

SpectrumSolver::~SpectrumSolver() = default;

SpectrumSolver::Inertia SpectrumSolver::inertia(double sigma) {
  if (auto it = cache_.find(sigma); it != cache_.end()) return it->second;
  auto& f = *factor_;
  f.shifted.diagonal() = f.diagonal.array() - sigma;
  f.ldlt.factorize(f.shifted);
  ++factorizations_;
  f.current = sigma;
  Inertia in;
  if (f.ldlt.info() != Eigen::Success) {
    in.singular = true;
    f.ok = false;
  } else {
    const Eigen::VectorXd d = f.ldlt.vectorD();
    const double big = d.cwiseAbs().maxCoeff();
    const double small = d.cwiseAbs().minCoeff();
    in.negative = static_cast<std::size_t>((d.array() < 0.0).count());
    in.singular = !(small > kTinyPivot * big);
    f.ok = !in.singular;
  }
  cache_[sigma] = in;
  return in;
}

std::size_t SpectrumSolver::count_below(double sigma) {
  const Inertia in = inertia(sigma);
  if (in.singular) {
    std::ostringstream os;
    os << "factorization of L - sigma I is singular at sigma = " << sigma;
    throw CertificationError(os.str());
  }
  return in.negative;
}

double SpectrumSolver::certified_shift(double sigma, double direction, double scale,
                                       std::vector<std::string>* log) {
  const double step = 1e-8 * std::max(std::abs(scale), 1.0);
  for (int attempt = 0; attempt < 8; ++attempt) {
    if (!inertia(sigma).singular) return sigma;
    const double moved = sigma + direction * step;
    if (log) {
      std::ostringstream os;
      os.precision(17);
      os << "endpoint " << sigma << " moved to " << moved << " (near-singular factorization)";
      log->push_back(os.str());
    }
    sigma = moved;
  }
  std::ostringstream os;
  os << "could not find a regular shift near " << sigma;
  throw CertificationError(os.str());
}

SpectralWindow SpectrumSolver::window(double center, double halfwidth) {
  if (!(halfwidth >= 0.0)) throw SpectralError("window halfwidth must be nonnegative");
  if (!(center - halfwidth > 0.0)) throw SpectralError("window must satisfy center - halfwidth > 0");
  return range(center, halfwidth, center - halfwidth, center + halfwidth);
}

double SpectrumSolver::spectrum_floor() {
  const double floor = certified_shift(std::min(op_.gershgorin_lower(), 0.0) - 1.0, -1.0, 1.0, nullptr);
  if (count_below(floor) != 0) throw CertificationError("eigenvalues below the Gershgorin bound");
  return floor;
}

SpectralWindow SpectrumSolver::range(double center, double halfwidth, double lower, double upper) {
  if (!(upper > lower)) throw SpectralError("empty energy range");
  SpectralWindow w;
  w.center = center;
  w.halfwidth = halfwidth;
  const double scale = std::max(std::abs(center), 1.0);
  w.lower = certified_shift(lower, -1.0, scale, &w.perturbations);
  w.upper = certified_shift(upper, +1.0, scale, &w.perturbations);
  w.count_lower = count_below(w.lower);
  w.count_upper = count_below(w.upper);
  w.pairs = solve_range(w.lower, w.upper, w.count_lower, w.count_upper);
  if (!w.complete()) {
    std::ostringstream os;
    os << "window [" << w.lower << ", " << w.upper << "]: inertia count " << w.certified_count() << " but "
       << w.pairs.size() << " pairs found";
    throw CertificationError(os.str());
  }
  return w;
}

Spectrum SpectrumSolver::lowest(std::size_t m) {
  if (m == 0) throw SpectralError("eigs_lowest needs m >= 1");
  const auto n = static_cast<std::size_t>(op_.dimension());
  if (m * 10 > n) {
    std::ostringstream os;
    os << "eigs_lowest: m = " << m << " exceeds n_interior/10 = " << n / 10;
    throw SpectralError(os.str());
  }
  const double floor = spectrum_floor();

  // Bracket the cut so that m+1 <= N(cut) <= m+1+slack.
  const std::size_t slack = std::max<std::size_t>(2, m / 20);
  double lo = floor;
  double hi = std::max(1.0, floor + 2.0);
  while (count_below(hi = certified_shift(hi, 1.0, hi, nullptr)) < m + 1) {
    lo = hi;
    hi *= 2.0;
    if (hi > op_.gershgorin_upper() * 2.0) throw CertificationError("could not bracket the lowest eigenvalues");
  }
  for (int it = 0; it < 60 && count_below(hi) > m + 1 + slack; ++it) {
    const double mid = certified_shift(0.5 * (lo + hi), 1.0, hi, nullptr);
    if (count_below(mid) >= m + 1) hi = mid; else lo = mid;
  }
  const std::size_t total = count_below(hi);
  auto pairs = solve_range(floor, hi, 0, total);
  if (pairs.size() != total) throw CertificationError("lowest part: inertia count does not match pairs found");

  const double Em = pairs[m - 1].E;
  const double Em1 = pairs[m].E;
  if (!(Em1 - Em > options_.tolerance * std::max(std::abs(Em1), 1.0) * 10.0)) {
    std::ostringstream os;
    os << "E_m = " << Em << " and E_{m+1} = " << Em1 << " coincide; choose another m";
    throw CertificationError(os.str());
  }
  const double mid = 0.5 * (Em + Em1);
  const Inertia in = inertia(mid);
  if (in.singular || in.negative != m) {
    std::ostringstream os;
    os << "missed-eigenvalue certificate failed: N(" << mid << ") = " << in.negative << ", expected " << m;
    throw CertificationError(os.str());
  }
  pairs.resize(m);
  Spectrum s;
  s.pairs = std::move(pairs);
  s.certified_upper = mid;
  return s;
}

std::vector<EigenPair> SpectrumSolver::solve_range(double lo, double hi, std::size_t count_lo,
                                                   std::size_t count_hi) {
  if (count_hi <= count_lo) return {};
  std::vector<Eigen::VectorXd> scaled;
  const bool dense = static_cast<std::size_t>(op_.dimension()) <= options_.dense_limit;

  struct Range {
    double lo, hi;
    std::size_t clo, chi;
  };
  std::vector<Range> stack{{lo, hi, count_lo, count_hi}};
  std::vector<Range> leaves;
  while (!stack.empty()) {
    const Range r = stack.back();
    stack.pop_back();
    const std::size_t k = r.chi - r.clo;
    if (k == 0) continue;
    const bool narrow = (r.hi - r.lo) < 1e-6 * std::max(std::abs(r.hi), 1.0);
    if (dense || k <= options_.leaf_size || narrow) {
      leaves.push_back(r);
      continue;
    }
    const double mid = certified_shift(0.5 * (r.lo + r.hi), 1.0, r.hi, nullptr);
    const std::size_t cm = count_below(mid);
    // Push upper half first so leaves come out in ascending order.
    stack.push_back({mid, r.hi, cm, r.chi});
    stack.push_back({r.lo, mid, r.clo, cm});
  }
  for (const auto& r : leaves) {
    if (dense) dense_range(r.lo, r.hi, scaled);
    else solve_leaf(r.lo, r.hi, r.chi - r.clo, scaled);
  }
  return finalize(std::move(scaled), count_lo + 1);
}

void SpectrumSolver::dense_range(double lo, double hi, std::vector<Eigen::VectorXd>& out) {
  if (dense_values_.size() == 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(op_.matrix)};
    dense_values_ = es.eigenvalues();
    dense_vectors_ = es.eigenvectors();
  }
  for (Eigen::Index i = 0; i < dense_values_.size(); ++i) {
    if (dense_values_[i] > lo && dense_values_[i] < hi) out.push_back(dense_vectors_.col(i));
  }
}

double SpectrumSolver::factor_inside(double lo, double hi) {
  double sigma = 0.5 * (lo + hi);
  for (int attempt = 0; inertia(sigma).singular; ++attempt) {
    if (attempt > 8) throw CertificationError("no regular shift inside the leaf");
    sigma += 1e-3 * (hi - lo);
  }
  if (factor_->current != sigma) {
    cache_.erase(sigma);
    inertia(sigma);
  }
  return sigma;
}

void SpectrumSolver::solve_leaf(double lo, double hi, std::size_t expected, std::vector<Eigen::VectorXd>& out) {
  if (lanczos_leaf(lo, hi, expected, out)) return;
  subspace_leaf(lo, hi, expected, out);
}

// Shift-invert Lanczos: with the shift at the leaf centre, the `expected`
// eigenvalues nearest the shift are exactly those inside the leaf.
bool SpectrumSolver::lanczos_leaf(double lo, double hi, std::size_t expected, std::vector<Eigen::VectorXd>& out) {
  const a_int n = static_cast<a_int>(op_.dimension());
  const double sigma = factor_inside(lo, hi);
  const a_int nev = std::min<a_int>(static_cast<a_int>(expected) + 2, n - 1);
  const a_int ncv = std::min<a_int>(n, std::max<a_int>(2 * nev + 1, nev + 20));
  if (nev < 1 || ncv <= nev) return false;
  const std::lock_guard<std::mutex> lock(arpack_mutex);

  std::mt19937_64 rng(seed_for(lo, hi));
  std::normal_distribution<double> normal;
  Eigen::VectorXd resid(n);
  for (a_int i = 0; i < n; ++i) resid[i] = normal(rng);
  Eigen::MatrixXd V(n, ncv);
  Eigen::VectorXd workd(3 * n);
  const a_int lworkl = ncv * (ncv + 8);
  Eigen::VectorXd workl(lworkl);
  a_int iparam[11] = {1, 0, options_.max_iterations, 1, 0, 0, 3, 0, 0, 0, 0};
  a_int ipntr[11] = {};
  a_int ido = 0;
  a_int info = 1;
  const double tol = 1e-14;
  Eigen::VectorXd x(n);
  for (;;) {
    arpack::saupd(ido, arpack::bmat::identity, n, arpack::which::largest_magnitude, nev, tol, resid.data(), ncv,
                  V.data(), n, iparam, ipntr, workd.data(), workl.data(), lworkl, info);
    if (ido == -1 || ido == 1) {
      x = Eigen::Map<Eigen::VectorXd>(workd.data() + ipntr[0] - 1, n);
      Eigen::Map<Eigen::VectorXd>(workd.data() + ipntr[1] - 1, n) = factor_->ldlt.solve(x);
    } else if (ido == 2) {
      Eigen::Map<Eigen::VectorXd>(workd.data() + ipntr[1] - 1, n) =
          Eigen::Map<Eigen::VectorXd>(workd.data() + ipntr[0] - 1, n);
    } else {
      break;
    }
  }
  if (info != 0) return false;

  std::vector<a_int> select(static_cast<std::size_t>(ncv));
  Eigen::VectorXd d(nev);
  Eigen::MatrixXd Z(n, nev);
  arpack::seupd(1, arpack::howmny::ritz_vectors, select.data(), d.data(), Z.data(), n, sigma,
                arpack::bmat::identity, n, arpack::which::largest_magnitude, nev, tol, resid.data(), ncv, V.data(), n,
                iparam, ipntr, workd.data(), workl.data(), lworkl, info);
  if (info != 0) return false;
  std::vector<Eigen::VectorXd> found;
  for (a_int c = 0; c < iparam[4]; ++c) {
    if (d[c] > lo && d[c] < hi) found.push_back(Z.col(c));
  }
  if (found.size() != expected) return false;
  for (auto& v : found) out.push_back(std::move(v));
  return true;
}

void SpectrumSolver::subspace_leaf(double lo, double hi, std::size_t expected, std::vector<Eigen::VectorXd>& out) {
  const Eigen::Index n = op_.dimension();
  const auto& S = op_.matrix;
  factor_inside(lo, hi);

  const Eigen::Index k = static_cast<Eigen::Index>(expected);
  const Eigen::Index p = std::min<Eigen::Index>(n, std::max<Eigen::Index>(2 * k, k + 8));
  std::mt19937_64 rng(seed_for(lo, hi));
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index c = 0; c < p; ++c)
    for (Eigen::Index r = 0; r < n; ++r) X(r, c) = normal(rng);
  X = orthonormalize(X);

  const double tol = options_.tolerance;
  Eigen::Index converged_in = 0;
  Eigen::Index found_in = 0;
  for (int it = 0; it < options_.max_iterations; ++it) {
    const Eigen::MatrixXd Q = orthonormalize(factor_->ldlt.solve(X));
    const Eigen::MatrixXd SQ = S * Q;
    Eigen::MatrixXd H = Q.transpose() * SQ;
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    X = Q * es.eigenvectors();
    const Eigen::MatrixXd R = SQ * es.eigenvectors() - X * es.eigenvalues().asDiagonal();
    found_in = 0;
    converged_in = 0;
    for (Eigen::Index c = 0; c < p; ++c) {
      const double theta = es.eigenvalues()[c];
      if (theta <= lo || theta >= hi) continue;
      ++found_in;
      if (R.col(c).norm() <= tol * std::max(std::abs(theta), 1.0)) ++converged_in;
    }
    if (found_in == k && converged_in == k) {
      for (Eigen::Index c = 0; c < p; ++c) {
        const double theta = es.eigenvalues()[c];
        if (theta > lo && theta < hi) out.push_back(X.col(c));
      }
      return;
    }
  }
  std::ostringstream os;
  os << "subspace iteration on [" << lo << ", " << hi << "] did not converge: " << converged_in << " of " << k
     << " converged (" << found_in << " Ritz values in range)";
  throw CertificationError(os.str());
}

std::vector<EigenPair> SpectrumSolver::finalize(std::vector<Eigen::VectorXd> scaled, std::size_t first_index) {
  std::vector<EigenPair> pairs;
  if (scaled.empty()) return pairs;
  const Eigen::Index n = op_.dimension();
  const auto k = static_cast<Eigen::Index>(scaled.size());
  Eigen::MatrixXd X(n, k);
  for (Eigen::Index c = 0; c < k; ++c) X.col(c) = scaled[static_cast<std::size_t>(c)];
  scaled.clear();
  // Joint Rayleigh-Ritz restores orthogonality between vectors from different leaves.
  const Eigen::MatrixXd Q = orthonormalize(X);
  const Eigen::MatrixXd SQ = op_.matrix * Q;
  Eigen::MatrixXd H = Q.transpose() * SQ;
  H = 0.5 * (H + H.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  X = Q * es.eigenvectors();
  const Eigen::MatrixXd R = SQ * es.eigenvectors() - X * es.eigenvalues().asDiagonal();

  const double dx = op_.dx;
  for (Eigen::Index c = 0; c < k; ++c) {
    EigenPair pr;
    pr.j = first_index + static_cast<std::size_t>(c);
    pr.E = es.eigenvalues()[c];
    pr.residual = R.col(c).norm();
    if (pr.residual > 10.0 * options_.tolerance * std::max(std::abs(pr.E), 1.0)) {
      std::ostringstream os;
      os << "eigenpair " << pr.j << " (E = " << pr.E << ") has residual " << pr.residual;
      throw CertificationError(os.str());
    }
    if (options_.vectors) {
      pr.u = op_.from_scaled(X.col(c)) / dx;
      Eigen::Index imax = 0;
      pr.u.cwiseAbs().maxCoeff(&imax);
      if (pr.u[imax] < 0.0) pr.u = -pr.u;
    }
    pairs.push_back(std::move(pr));
  }
  return pairs;
}

SpectralWindow eigs_window(const DiscreteOperator& op, double center, double halfwidth, SolverOptions options) {
  SpectrumSolver solver(op, options);
  return solver.window(center, halfwidth);
}

Spectrum eigs_lowest(const DiscreteOperator& op, std::size_t m, SolverOptions options) {
  SpectrumSolver solver(op, options);
  return solver.lowest(m);
}

std::size_t counting_function(const Spectrum& spectrum, double E) {
  if (E >= spectrum.certified_upper) {
    std::ostringstream os;
    os << "counting function requested at E = " << E << " above certified range " << spectrum.certified_upper;
    throw SpectralError(os.str());
  }
  return static_cast<std::size_t>(std::count_if(spectrum.pairs.begin(), spectrum.pairs.end(),
                                                [E](const EigenPair& p) { return p.E <= E; }));
}

WeylFit weyl_fit(const std::vector<Spectrum>& spectra, std::size_t min_count) {
  if (spectra.empty()) throw SpectralError("weyl_fit needs at least one spectrum");
  WeylFit out;
  out.gamma = std::numeric_limits<double>::infinity();
  out.Gamma = 0.0;
  for (const auto& s : spectra) {
    const auto m = static_cast<Eigen::Index>(s.pairs.size());
    if (s.pairs.size() < min_count) {
      std::ostringstream os;
      os << "weyl_fit needs >= " << min_count << " certified eigenvalues, got " << m << " at t = " << s.t;
      throw SpectralError(os.str());
    }
    // Staircase midpoints: N(E_j) = j - 1/2.
    Eigen::MatrixXd A(m, 2);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double E = s.pairs[static_cast<std::size_t>(i)].E;
      A(i, 0) = E;
      A(i, 1) = -std::sqrt(E);
      b[i] = static_cast<double>(i + 1) - 0.5;
    }
    const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
    out.fits.push_back({s.t, c[0], c[1], s.pairs.size()});
    for (std::size_t j = 20; j <= s.pairs.size(); ++j) {
      const double ratio = s.pairs[j - 1].E / static_cast<double>(j);
      out.gamma = std::min(out.gamma, ratio);
      out.Gamma = std::max(out.Gamma, ratio);
    }
  }
  return out;
}

void write_spectrum_rows(std::ostream& os, double t, const std::vector<EigenPair>& pairs, double center,
                         double halfwidth) {
  char buf[256];
  char win[96] = ",";  // empty fields when there is no window
  if (std::isfinite(center) && std::isfinite(halfwidth)) std::snprintf(win, sizeof win, "%.15g,%.15g", center, halfwidth);
  for (const auto& p : pairs) {
    std::snprintf(buf, sizeof buf, "%.10g,%zu,%.15g,%.6e,%s\n", t, p.j, p.E, p.residual, win);
    os << buf;
  }
}

}  // namespace scarlab
