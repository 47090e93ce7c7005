#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <vector>

#include "scarlab/discretize.hpp"
#include "scarlab/spectral.hpp"

namespace scarlab {

class VariationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BoundaryRate {
  double dotE = 0.0;        ///< -int rho (d_n u)^2 ds, stored as -E * f
  double f = 0.0;           ///< -dotE / E
  std::vector<double> psi;  ///< E^{-1/2} d_n u on the trace (0 at flagged samples)
};

/// Hadamard boundary formula; Dirichlet only.
BoundaryRate hadamard_rate_boundary(const EigenPair& pair, const DomainSpec& spec, const BoundaryTrace& trace,
                                    const BoundaryLinks& links);
BoundaryRate hadamard_rate_boundary(const EigenPair& pair, const DomainSpec& spec, const BoundaryTrace& trace,
                                    const Grid& grid);

/// Interior formula dotE = -1/2 <Q u, u>; any boundary condition.
double hadamard_rate_interior(const EigenPair& pair, const Grid& grid, const SampledProfile& phi);

/// 1/2 max |phi_t''|, the upper bound for the interior rate.
double interior_rate_bound(double t);

struct BranchSample {
  double t = 0.0;
  double E = 0.0;
  double f = std::numeric_limits<double>::quiet_NaN();
  double dotE_boundary = std::numeric_limits<double>::quiet_NaN();
  double dotE_interior = 0.0;
  double fd_estimate = std::numeric_limits<double>::quiet_NaN();
  double overlap = 1.0;        ///< |<u(t_prev), u(t)>| on common nodes
  std::size_t sorted_index = 0;  ///< 1-based position among eigenvalues at this t
  bool degenerate = false;
};

struct Branch {
  std::size_t id = 0;
  std::vector<BranchSample> samples;
  std::vector<double> crossings;  ///< t values where the sorted index changed
};

struct TrackOptions {
  std::size_t pad = 0;           ///< extra candidates; 0 means max(10, m/2)
  double ambiguity = 0.05;
  std::size_t trace_samples = 0;  ///< 0 means about 2 samples per dx of perimeter
  double max_step = 0.02;
  SolverOptions solver;
};

/// Branches continued by maximal eigenvector overlap on common lattice nodes.
std::vector<Branch> track_branches(const DomainSpec& family, const std::vector<double>& t_grid, std::size_t m,
                                   double dx, TrackOptions options = {});

struct FdError {
  double t = 0.0;
  double fd = 0.0;
  double boundary_rel = std::numeric_limits<double>::quiet_NaN();
  double interior_rel = std::numeric_limits<double>::quiet_NaN();
  double mutual_rel = std::numeric_limits<double>::quiet_NaN();  ///< |boundary - interior| / |interior|
};

/// Central differences of E along the branch against both rates; flagged
/// samples (and those next to them) are skipped.
std::vector<FdError> finite_difference_validation(const Branch& branch);

struct FLimit {
  double median_window_mean = 0.0;
  double mean = 0.0;
  double k_over_A = 0.0;
  std::vector<double> window_means;
};

/// Median over j-windows of f_j in the top half of the computed j.
FLimit f_limit_check(const DomainSpec& spec, const std::vector<double>& f, std::size_t window = 10);

/// k = int rho ds by boundary quadrature.
double boundary_velocity_integral(const DomainSpec& spec, std::size_t samples = 4096);

inline constexpr const char* kBranchHeader =
    "branch_id,t,E,f,dotE_boundary,dotE_interior,fd_estimate,degenerate_flag";
void write_branch_rows(std::ostream& os, const std::vector<Branch>& branches);

}  // namespace scarlab
