#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "scarlab/discretize.hpp"
#include "scarlab/spectral.hpp"

namespace scarlab {

class QuasimodeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ChiKind { Cos2, Smooth };

std::string to_string(ChiKind kind);
ChiKind chi_kind_from_string(const std::string& name);

/**
 * x-profile of the bouncing-ball quasimodes, supported in |x| <= pi/4.
 *
 * Cos2: c cos^2(2x), closed form. Smooth: c exp(-1/(1 - (x/r)^2)).
 * The default amplitude makes ||chi||^2 = 2/pi, so that chi(x) sin(ny) has unit
 * norm on the rectangle.
 */
class ChiProfile {
 public:
  explicit ChiProfile(ChiKind kind = ChiKind::Cos2);

  ChiKind kind() const { return kind_; }
  double radius() const { return radius_; }
  double amplitude() const { return amplitude_; }
  ChiProfile scaled(double factor) const;

  ProfileValue at(double x) const;
  double operator()(double x) const { return at(x).value; }
  /// Integral of chi^2 (Gauss-Kronrod).
  double norm2() const;
  /// Integral of chi''^2 (Gauss-Kronrod).
  double d2_norm2() const;

 private:
  ChiKind kind_;
  double radius_;
  double amplitude_ = 1.0;
};

ChiProfile make_chi(ChiKind kind = ChiKind::Cos2);

/// K = ||chi''|| / ||chi||.
double residual_bound(const ChiProfile& chi);

enum class Parity { Sin, Cos, Robin };
std::string to_string(Parity parity);

struct Quasimode {
  int n = 0;
  Parity parity = Parity::Sin;
  Eigen::VectorXd v;          ///< grid values, unit discrete norm
  double K = 0.0;             ///< continuum residual bound
  double center = 0.0;        ///< energy the residual is measured against (n^2, or mu_n for Robin)
};

/// Samples chi(x) Y_n(y) on the grid: sin(ny) for even n, cos(ny) for odd n
/// (Dirichlet), cos(n(y + pi/2)) (Neumann), or the n-th 1-D discrete Robin mode.
Quasimode make_quasimode(const Grid& grid, const ChiProfile& chi, int n);

/// ||(L - center) v|| in the discrete norm.
double discrete_residual(const DiscreteOperator& op, const Grid& grid, const Quasimode& q);

/// Sum of <u_j, v>^2 over the window; the window must be certified complete.
double projection_mass(const Grid& grid, const Quasimode& q, const SpectralWindow& window);

struct Overlap {
  bool found = false;
  std::size_t j = 0;
  double E = 0.0;
  double overlap = 0.0;  ///< |<u_j, v>|
  std::size_t index = 0;  ///< position within window.pairs
};

Overlap best_overlap(const Grid& grid, const Quasimode& q, const SpectralWindow& window);

inline double pigeonhole_bound(std::size_t M) {
  return M == 0 ? 0.0 : std::sqrt(3.0 / (4.0 * static_cast<double>(M)));
}

struct QuasimodeAnalysis {
  double K_continuum = 0.0;
  double K_discrete = 0.0;
  SpectralWindow window;
  double mass = 0.0;
  Overlap best;
  double bound = 0.0;
};

/// Window of halfwidth 2 K_discrete (or `halfwidth` if positive) around the
/// quasimode's centre, with mass and best overlap. Asserts the pigeonhole
/// implication mass >= 3/4 => overlap >= sqrt(3/(4M)).
QuasimodeAnalysis analyze_quasimode(SpectrumSolver& solver, const Grid& grid, const Quasimode& q,
                                    double halfwidth = -1.0);

inline constexpr const char* kQuasimodeHeader = "t,n,K_continuum,K_discrete,M,mass,best_overlap,pigeonhole_bound";
void write_quasimode_row(std::ostream& os, double t, int n, const QuasimodeAnalysis& a);

}  // namespace scarlab
