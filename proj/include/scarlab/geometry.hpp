#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

/**
 * @file geometry.hpp
 * @brief Partially rectangular domains X_t: a flat rectangle [-a, a] x [-b, b]
 *        with b = pi/2 and a = t*b, plus wings attached along x = +-a.
 *
 * The boundary is stored as one closed counterclockwise chain of line segments
 * and circular arcs. The parameter t moves the wings rigidly at speed pi/2 in x,
 * which fixes the normal velocity convention used by the variation formulas.
 */

namespace scarlab {

inline constexpr double kPi = std::numbers::pi;
/// Rectangle half-height, fixed for the whole family.
inline constexpr double kHalfHeight = kPi / 2.0;
/// Speed of each wing along x per unit t (d alpha / dt).
inline constexpr double kWingSpeed = kPi / 2.0;

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

/// Circular arc from angle0 to angle1. angle1 > angle0 runs counterclockwise
/// (convex as seen from the domain when the chain is counterclockwise);
/// angle1 < angle0 runs clockwise (concave).
struct Arc {
  Vec2 center;
  double radius = 0.0;
  double angle0 = 0.0;
  double angle1 = 0.0;
};

using Shape = std::variant<Segment, Arc>;

enum class DomainKind { Stadium, Rectangle, Generic };
enum class BcKind { Dirichlet, Neumann, Robin };
enum class PieceRole { Bottom, RightWing, Top, LeftWing };

struct BoundaryCondition {
  BcKind kind = BcKind::Dirichlet;
  /// Robin coefficient b in d_n u = b u (Neumann is b = 0).
  double robin_b = 0.0;

  static BoundaryCondition dirichlet() { return {BcKind::Dirichlet, 0.0}; }
  static BoundaryCondition neumann() { return {BcKind::Neumann, 0.0}; }
  static BoundaryCondition robin(double b) { return {BcKind::Robin, b}; }
};

std::string to_string(DomainKind kind);
std::string to_string(BcKind kind);

/// One piece of the closed boundary chain, in global coordinates.
struct BoundaryPiece {
  Shape shape;
  PieceRole role = PieceRole::Bottom;
  Vec2 start;
  Vec2 end;

  double length() const;
  Vec2 point(double s) const;           ///< s in [0, 1]
  Vec2 tangent(double s) const;         ///< unit, along the chain direction
  Vec2 outward_normal(double s) const;  ///< unit, pointing out of the domain
  bool is_curved() const { return std::holds_alternative<Arc>(shape); }
};

struct BoundaryTraceSample {
  Vec2 point;
  double arclength = 0.0;  ///< distance along the chain from its start
  Vec2 normal;             ///< outward unit normal
  double weight = 0.0;     ///< quadrature weight (length)
  std::size_t piece = 0;
  PieceRole role = PieceRole::Bottom;
};

struct BoundaryTrace {
  std::vector<BoundaryTraceSample> samples;
  double perimeter = 0.0;
};

/// Result of locating a point on the boundary chain.
struct BoundaryLocation {
  std::size_t piece = 0;
  double param = 0.0;  ///< parameter in [0, 1] along that piece
  double distance = 0.0;
};

enum class Axis { Horizontal, Vertical };

class DomainSpec {
 public:
  static DomainSpec stadium(double t, BoundaryCondition bc = BoundaryCondition::dirichlet());
  static DomainSpec rectangle(double t, BoundaryCondition bc = BoundaryCondition::dirichlet());
  /// Generic partially rectangular domain. right_wing is a chain in local
  /// coordinates relative to (alpha, 0), running from (0, -beta) to
  /// (0, beta) with x >= 0. The left wing is its mirror image.
  static DomainSpec generic(double t, std::vector<Shape> right_wing,
                            BoundaryCondition bc = BoundaryCondition::dirichlet());

  DomainKind kind() const { return kind_; }
  double t() const { return t_; }
  double alpha() const { return t_ * kHalfHeight; }
  double beta() const { return kHalfHeight; }
  const BoundaryCondition& bc() const { return bc_; }
  const std::vector<Shape>& right_wing() const { return right_wing_; }
  const std::vector<BoundaryPiece>& pieces() const { return pieces_; }

  /// Same wings and boundary condition at another aspect parameter.
  DomainSpec with_t(double t) const;
  DomainSpec with_bc(BoundaryCondition bc) const;

  double area() const;
  double perimeter() const;

  /// Sorted coordinates where the boundary crosses the line
  /// {y = c} (Horizontal, returns x values) or {x = c} (Vertical, returns y
  /// values). Half-open rule on monotone sub-pieces so that parity is exact.
  std::vector<double> crossings(Axis axis, double c) const;

  /// Strict interior test (ray parity), without tolerance.
  bool contains(Vec2 p) const;
  double distance_to_boundary(Vec2 p) const;
  BoundaryLocation locate(Vec2 p) const;

  /// Point on the chain at arclength s (wraps around the perimeter).
  Vec2 point_at_arclength(double s) const;
  /// Arclength offsets of the chain vertices where the tangent jumps.
  std::vector<double> corner_arclengths() const;
  std::vector<double> piece_start_arclengths() const;

  bool rectangle_contains(Vec2 p) const;

 private:
  struct Monotone {
    Shape shape;
    Vec2 start;
    Vec2 end;
  };

  DomainSpec(DomainKind kind, double t, std::vector<Shape> right_wing, BoundaryCondition bc);
  void build();

  DomainKind kind_ = DomainKind::Stadium;
  double t_ = 1.0;
  std::vector<Shape> right_wing_;
  BoundaryCondition bc_;
  std::vector<BoundaryPiece> pieces_;
  std::vector<Monotone> monotone_;
};

DomainSpec make_stadium(double t);

/// Samples the boundary counterclockwise with the composite midpoint rule.
BoundaryTrace boundary_trace(const DomainSpec& spec, std::size_t n_samples);

/// Normal velocity rho_t of the boundary under d/dt at a boundary point.
double normal_velocity(const DomainSpec& spec, Vec2 point);
double normal_velocity(const DomainSpec& spec, const BoundaryTraceSample& sample);

/// Closed-form area and perimeter of the stadium S_t.
double stadium_area(double t);
double stadium_perimeter(double t);

struct ProfileValue {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/**
 * Polynomial bump phi(x) = c (1 - (x/r)^2)^4 on |x| <= r with unit integral,
 * and the pushed-forward profile phi_t on the physical domain.
 *
 * The coordinate change x -> x + (t-1) pi Phi(x), Phi' = phi, Phi(0) = 0,
 * stretches [-pi/2, pi/2] to [-t pi/2, t pi/2] while leaving everything with
 * |x| >= r rigidly translated. phi_t is the x-divergence of the resulting
 * velocity field, so it integrates to pi over the physical line.
 */
class PhiProfile {
 public:
  explicit PhiProfile(double radius = kPi / 4.0);

  double radius() const { return radius_; }
  double amplitude() const { return amplitude_; }

  ProfileValue base(double x) const;
  /// Antiderivative of phi, normalized to Phi(0) = 0, Phi(+-inf) = +-1/2.
  double antiderivative(double x) const;

  /// Physical x for a reference x at parameter t.
  double forward(double x, double t) const;
  /// Reference x for a physical X at parameter t.
  double inverse(double X, double t) const;

  /// phi_t and its first two X-derivatives at physical coordinate X.
  ProfileValue at(double X, double t) const;
  /// Physical support half-width of phi_t.
  double support(double t) const;
  /// Upper bound for |phi_t''| over X, valid for every t in [1, 2].
  double max_abs_d2(double t) const;

 private:
  double radius_;
  double amplitude_;
};

ProfileValue phi_profile(double x, double t);

}  // namespace scarlab
