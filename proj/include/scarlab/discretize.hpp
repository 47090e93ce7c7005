#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "scarlab/geometry.hpp"

namespace scarlab {

class DiscretizationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum Direction : std::size_t { kEast = 0, kWest = 1, kNorth = 2, kSouth = 3 };

/**
 * Uniform Cartesian lattice x = i dx, y = j dx restricted to a domain.
 *
 * For Dirichlet problems the unknowns are the nodes strictly inside the
 * boundary; each keeps its four arm lengths, shortened where a grid line is cut
 * by the boundary. For Neumann/Robin problems on the rectangle the lattice must
 * be boundary-aligned and the boundary nodes are unknowns with trapezoid
 * weights 1/2 (edges) and 1/4 (corners).
 */
class Grid {
 public:
  const DomainSpec& spec() const { return spec_; }
  double dx() const { return dx_; }
  std::size_t size() const { return nodes_.size(); }
  bool vertex_centered() const { return vertex_centered_; }

  int i(std::size_t k) const { return nodes_[k][0]; }
  int j(std::size_t k) const { return nodes_[k][1]; }
  double x(std::size_t k) const { return nodes_[k][0] * dx_; }
  double y(std::size_t k) const { return nodes_[k][1] * dx_; }
  /// Unknown index of lattice node (i, j), or -1 if it is not an unknown.
  long index(int i, int j) const;

  /// Neighbour unknown in a direction, or -1 when the arm ends on the boundary.
  long neighbor(std::size_t k, Direction d) const { return neighbor_[k][d]; }
  /// Distance to the neighbour or to the boundary cut along that direction.
  double arm(std::size_t k, Direction d) const { return arm_[k][d]; }
  /// Quadrature weight factor (1 in the interior).
  double weight(std::size_t k) const { return weight_[k]; }
  const Eigen::VectorXd& weights() const { return weights_; }

  /// Discrete L2 inner product dx^2 sum w_k u_k v_k.
  double inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
  double norm(const Eigen::VectorXd& u) const;

  /// Samples f(x, y) at every unknown.
  template <typename F>
  Eigen::VectorXd sample(F&& f) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
    for (std::size_t k = 0; k < size(); ++k) out[static_cast<Eigen::Index>(k)] = f(x(k), y(k));
    return out;
  }

  /// Smallest cut fraction over all arms (1 when nothing is cut).
  double min_cut_fraction() const;

 private:
  friend Grid build_grid(const DomainSpec& spec, double dx);

  explicit Grid(DomainSpec spec) : spec_(std::move(spec)) {}

  DomainSpec spec_;
  double dx_ = 0.0;
  bool vertex_centered_ = false;
  int i0_ = 0, j0_ = 0, ni_ = 0, nj_ = 0;
  std::vector<long> lattice_;
  std::vector<std::array<int, 2>> nodes_;
  std::vector<std::array<long, 4>> neighbor_;
  std::vector<std::array<double, 4>> arm_;
  std::vector<double> weight_;
  Eigen::VectorXd weights_;
};

Grid build_grid(const DomainSpec& spec, double dx);

/**
 * Symmetric discrete positive Laplacian.
 *
 * The matrix acts on scaled unknowns w = W^{1/2} u, where W holds the grid
 * weights, so that the Euclidean structure of w matches the discrete L2
 * product of u. For Dirichlet grids W = I.
 */
struct DiscreteOperator {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd sqrt_weight;
  BoundaryCondition bc;
  double dx = 0.0;
  /// max |A - A^T| / max |A| after assembly.
  double asymmetry = 0.0;

  Eigen::Index dimension() const { return matrix.rows(); }
  /// L u on grid values (undoes the weight scaling).
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
  Eigen::VectorXd to_scaled(const Eigen::VectorXd& u) const { return u.cwiseProduct(sqrt_weight); }
  Eigen::VectorXd from_scaled(const Eigen::VectorXd& w) const { return w.cwiseQuotient(sqrt_weight); }
  double gershgorin_lower() const;
  double gershgorin_upper() const;
};

DiscreteOperator assemble_laplacian(const Grid& grid, BoundaryCondition bc);
inline DiscreteOperator assemble_laplacian(const Grid& grid) { return assemble_laplacian(grid, grid.spec().bc()); }

/// Coordinate text format: "rows cols nnz" header, then "row col value" lines.
void export_coordinate(const DiscreteOperator& op, std::ostream& os);

/// Linear functional giving d_n u at one trace sample from nearby unknowns.
struct NormalDerivativeStencil {
  std::vector<std::size_t> nodes;
  std::vector<double> coefficients;
  bool flagged = false;
};

/// Normal-derivative stencils for every trace sample plus quadrature weights
/// after excluded samples have handed their weight to their neighbours.
struct BoundaryLinks {
  std::vector<NormalDerivativeStencil> stencils;
  std::vector<double> weights;
  std::size_t flagged = 0;
};

BoundaryLinks build_boundary_links(const Grid& grid, const BoundaryTrace& trace);

/// Outward normal derivative sampled on the trace (0 at flagged samples).
std::vector<double> boundary_normal_derivative(const Grid& grid, const Eigen::VectorXd& u,
                                               const BoundaryTrace& trace);
std::vector<double> boundary_normal_derivative(const BoundaryLinks& links, const Eigen::VectorXd& u);

/// phi_t, its midpoint values along x-edges and its second differences.
struct SampledProfile {
  double t = 1.0;
  PhiProfile profile;
};

/// <Q u, u> = 4 <phi_t d_x u, d_x u> - <phi_t'' u, u> in summation-by-parts
/// form: midpoint differences for d_x u and the three-point second difference
/// of phi_t for phi_t''.
double quadratic_form_Q(const Grid& grid, const Eigen::VectorXd& u, const SampledProfile& phi);
/// Same quantity through the explicit operator stencil applied to u.
Eigen::VectorXd apply_Q(const Grid& grid, const Eigen::VectorXd& u, const SampledProfile& phi);

}  // namespace scarlab
