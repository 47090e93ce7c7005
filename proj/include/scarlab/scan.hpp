#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "scarlab/quasimode.hpp"
#include "scarlab/spectral.hpp"

namespace scarlab {

class ScanError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bump (1 - (s/r)^2)^4, equal to 1 at the origin.
class Bump {
 public:
  explicit Bump(double radius);
  double radius() const { return radius_; }
  double operator()(double s) const;
  /// Closed-form integral 256 r / 315.
  double integral() const { return radius_ * 256.0 / 315.0; }

 private:
  double radius_;
};

struct Cutoffs {
  Bump eta{kPi / 4.0};  ///< x-cutoff over the rectangle's centre
  Bump zeta{0.4 * kPi};  ///< y-cutoff, 1 near y = 0 and 0 near |y| = pi/2
};

struct WindowCount {
  int n = 0;
  std::size_t count = 0;
};

/// Eigenvalue counts in [n^2 - a, n^2 + a] from inertia differences.
std::vector<WindowCount> window_count_scan(SpectrumSolver& solver, const std::vector<int>& n_range, double a);

/// Entries with count <= M_max, sorted by count then n.
std::vector<WindowCount> find_loitering(const std::vector<WindowCount>& counts, std::size_t M_max);

/// Position-space mass of u^2 under eta(x) zeta(y).
double bb_mass_position(const EigenPair& pair, const Grid& grid, const Cutoffs& cut = {});

/// Value of bb_mass_position for a uniformly spread mode: int(eta zeta) / A.
double bb_mass_baseline(const DomainSpec& spec, const Cutoffs& cut = {});

/// r = dx^2 sum zeta(y)^2 phi_t(x) (h D_x u)^2, h = E^{-1/2}, centred differences.
double bb_mass_momentum(const EigenPair& pair, const Grid& grid, const Bump& zeta, double t);

struct ScarReport {
  double t = 0.0;
  int n = 0;
  double a = 0.0;
  std::size_t M = 0;
  double mass = 0.0;
  double best_overlap = 0.0;
  double best_E = 0.0;
  double pigeonhole_bound = 0.0;
  double bb_mass_position = 0.0;
  double bb_mass_momentum = 0.0;
  double dx = 0.0;
  bool scar_candidate = false;
};

/// Excess factor of bb_mass_position over its baseline needed for a candidate.
inline constexpr double kScarExcess = 2.0;

/// Quasimode analysis at n plus the bouncing-ball diagnostics of the best
/// overlapping eigenfunction. halfwidth <= 0 means 2 K_discrete.
ScarReport scar_report(SpectrumSolver& solver, const Grid& grid, const ChiProfile& chi, int n,
                       double halfwidth = -1.0, const Cutoffs& cut = {});

struct BandStats {
  std::size_t count = 0;
  double mean_position = 0.0;
  double median_momentum = 0.0;
};

/// Averages of the diagnostics over a set of eigenpairs (e.g. a wide band).
BandStats band_stats(const std::vector<EigenPair>& pairs, const Grid& grid, double t, const Cutoffs& cut = {});

std::string to_json_line(const ScarReport& r);

inline constexpr const char* kScanSummaryHeader =
    "t,n,a,M,mass,best_overlap,pigeonhole_bound,bb_mass_position,bb_mass_momentum,scar_candidate";
void write_summary_row(std::ostream& os, const ScarReport& r);

}  // namespace scarlab
