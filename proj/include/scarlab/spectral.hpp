#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "scarlab/discretize.hpp"

namespace scarlab {

/// A window or lowest-part computation could not be certified complete.
class CertificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SpectralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EigenPair {
  std::size_t j = 0;  ///< global 1-based index by increasing E (from inertia)
  double E = 0.0;
  Eigen::VectorXd u;  ///< grid values, unit discrete L2 norm
  double residual = 0.0;  ///< ||L u - E u|| in the discrete norm
};

struct SpectralWindow {
  double center = 0.0;
  double halfwidth = 0.0;
  /// Endpoints actually certified (differ from center -+ halfwidth only after a perturbation).
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count_lower = 0;  ///< eigenvalues below `lower`
  std::size_t count_upper = 0;  ///< eigenvalues below `upper`
  std::vector<EigenPair> pairs;
  std::vector<std::string> perturbations;

  std::size_t certified_count() const { return count_upper - count_lower; }
  bool complete() const { return pairs.size() == certified_count(); }
};

/// Lowest part of a spectrum: every eigenvalue below `certified_upper` is in `pairs`.
struct Spectrum {
  double t = 1.0;
  std::vector<EigenPair> pairs;
  double certified_upper = 0.0;
};

struct SolverOptions {
  double tolerance = 1e-9;         ///< residual <= tolerance * max(|E|, 1)
  std::size_t leaf_size = 40;      ///< max eigenvalues per subspace iteration
  int max_iterations = 300;
  std::size_t dense_limit = 600;   ///< dimension below which a dense solver is used
  bool vectors = true;
};

/**
 * Certified eigen-solver for one discrete operator.
 *
 * Counts come from the inertia of an LDL^T factorization of L - sigma I
 * (Sylvester's law); the symbolic analysis is shared by every shift and counts
 * are cached by shift.
 */
class SpectrumSolver {
 public:
  explicit SpectrumSolver(const DiscreteOperator& op, SolverOptions options = {});
  SpectrumSolver(DiscreteOperator&&, SolverOptions = {}) = delete;  // keeps a reference to op
  ~SpectrumSolver();
  SpectrumSolver(const SpectrumSolver&) = delete;
  SpectrumSolver& operator=(const SpectrumSolver&) = delete;

  const DiscreteOperator& op() const { return op_; }
  const SolverOptions& options() const { return options_; }

  /// Number of eigenvalues strictly below sigma.
  std::size_t count_below(double sigma);
  /// Like count_below, but moves sigma outward (direction sign) by 1e-8*scale
  /// while the factorization is near-singular. Returns the shift used.
  double certified_shift(double sigma, double direction, double scale, std::vector<std::string>* log);

  SpectralWindow window(double center, double halfwidth);
  /// All pairs in [lower, upper], reported under the given centre/halfwidth labels.
  SpectralWindow range(double center, double halfwidth, double lower, double upper);
  /// A certified shift below the whole spectrum.
  double spectrum_floor();
  Spectrum lowest(std::size_t m);

  std::size_t factorizations() const { return factorizations_; }

 private:
  struct Factor;
  struct Inertia {
    std::size_t negative = 0;
    bool singular = false;
  };

  Inertia inertia(double sigma);
  std::vector<EigenPair> solve_range(double lo, double hi, std::size_t count_lo, std::size_t count_hi);
  double factor_inside(double lo, double hi);
  void solve_leaf(double lo, double hi, std::size_t expected, std::vector<Eigen::VectorXd>& out);
  bool lanczos_leaf(double lo, double hi, std::size_t expected, std::vector<Eigen::VectorXd>& out);
  void subspace_leaf(double lo, double hi, std::size_t expected, std::vector<Eigen::VectorXd>& out);
  void dense_range(double lo, double hi, std::vector<Eigen::VectorXd>& out);
  std::vector<EigenPair> finalize(std::vector<Eigen::VectorXd> scaled, std::size_t first_index);

  const DiscreteOperator& op_;
  SolverOptions options_;
  std::unique_ptr<Factor> factor_;
  std::map<double, Inertia> cache_;
  std::size_t factorizations_ = 0;
  Eigen::VectorXd dense_values_;
  Eigen::MatrixXd dense_vectors_;
};

/// All eigenpairs in [center - halfwidth, center + halfwidth], certified by inertia.
SpectralWindow eigs_window(const DiscreteOperator& op, double center, double halfwidth, SolverOptions options = {});
/// The m smallest eigenpairs, certified by inertia between E_m and E_{m+1}.
Spectrum eigs_lowest(const DiscreteOperator& op, std::size_t m, SolverOptions options = {});

/// #{j : E_j <= E}; throws if E lies above the certified range.
std::size_t counting_function(const Spectrum& spectrum, double E);

struct WeylFitEntry {
  double t = 1.0;
  double c1 = 0.0;  ///< N(E) ~ c1 E - c2 sqrt(E)
  double c2 = 0.0;
  std::size_t count = 0;
};

struct WeylFit {
  std::vector<WeylFitEntry> fits;
  double gamma = 0.0;  ///< min over t and j >= 20 of E_j / j
  double Gamma = 0.0;  ///< max over t and j >= 20 of E_j / j
};

WeylFit weyl_fit(const std::vector<Spectrum>& spectra, std::size_t min_count = 200);

/// Rows "t,j,E,residual,window_center,window_halfwidth" (no header); the window
/// fields are empty when center or halfwidth is not finite.
void write_spectrum_rows(std::ostream& os, double t, const std::vector<EigenPair>& pairs, double center,
                         double halfwidth);
inline constexpr const char* kSpectrumHeader = "t,j,E,residual,window_center,window_halfwidth";

}  // namespace scarlab
