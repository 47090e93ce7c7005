#include "scarlab/geometry.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <sstream>

namespace scarlab {

namespace {

constexpr double kJoinTol = 1e-9;

// Exact cos/sin at multiples of pi/2 so that split points of arcs land on the
// same coordinates as the axis-aligned pieces they may touch.
Vec2 unit_at(double angle) {
  const double q = angle / (kPi / 2.0);
  const double r = std::round(q);
  if (std::abs(q - r) < 1e-14) {
    static constexpr std::array<Vec2, 4> table{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};
    const long k = static_cast<long>(r);
    return table[static_cast<std::size_t>(((k % 4) + 4) % 4)];
  }
  return {std::cos(angle), std::sin(angle)};
}

Vec2 arc_point(const Arc& a, double angle) { return a.center + unit_at(angle) * a.radius; }

bool angle_in_arc(const Arc& a, double theta, double* param = nullptr) {
  const double lo = std::min(a.angle0, a.angle1);
  const double hi = std::max(a.angle0, a.angle1);
  double shifted = lo + std::fmod(theta - lo, 2.0 * kPi);
  if (shifted < lo) shifted += 2.0 * kPi;
  if (shifted > hi + 1e-14) return false;
  if (param != nullptr) {
    *param = std::clamp((shifted - a.angle0) / (a.angle1 - a.angle0), 0.0, 1.0);
  }
  return true;
}

double segment_distance(const Segment& s, Vec2 p, double* param) {
  const Vec2 d = s.b - s.a;
  const double len2 = d.dot(d);
  const double u = len2 > 0.0 ? std::clamp((p - s.a).dot(d) / len2, 0.0, 1.0) : 0.0;
  *param = u;
  return (p - (s.a + d * u)).norm();
}

double piece_distance(const BoundaryPiece& piece, Vec2 p, double* param) {
  if (std::holds_alternative<Segment>(piece.shape)) {
    return segment_distance(Segment{piece.start, piece.end}, p, param);
  }
  const auto& arc = std::get<Arc>(piece.shape);
  const Vec2 rel = p - arc.center;
  if (angle_in_arc(arc, std::atan2(rel.y, rel.x), param)) {
    return std::abs(rel.norm() - arc.radius);
  }
  const double d0 = (p - piece.start).norm();
  const double d1 = (p - piece.end).norm();
  *param = d0 <= d1 ? 0.0 : 1.0;
  return std::min(d0, d1);
}

Shape translate(const Shape& shape, Vec2 offset) {
  if (const auto* seg = std::get_if<Segment>(&shape)) {
    return Segment{seg->a + offset, seg->b + offset};
  }
  Arc a = std::get<Arc>(shape);
  a.center = a.center + offset;
  return a;
}

// Mirror x -> -x and reverse direction, so a right wing chain running upward
// becomes a left wing chain running downward (still counterclockwise).
Shape mirror_reversed(const Shape& shape) {
  if (const auto* seg = std::get_if<Segment>(&shape)) {
    return Segment{{-seg->b.x, seg->b.y}, {-seg->a.x, seg->a.y}};
  }
  const auto& a = std::get<Arc>(shape);
  return Arc{{-a.center.x, a.center.y}, a.radius, kPi - a.angle1, kPi - a.angle0};
}

Vec2 shape_start(const Shape& shape) {
  if (const auto* seg = std::get_if<Segment>(&shape)) return seg->a;
  const auto& a = std::get<Arc>(shape);
  return arc_point(a, a.angle0);
}

Vec2 shape_end(const Shape& shape) {
  if (const auto* seg = std::get_if<Segment>(&shape)) return seg->b;
  const auto& a = std::get<Arc>(shape);
  return arc_point(a, a.angle1);
}

std::string describe(const Shape& shape) {
  std::ostringstream os;
  if (const auto* seg = std::get_if<Segment>(&shape)) {
    os << "segment (" << seg->a.x << "," << seg->a.y << ")-(" << seg->b.x << "," << seg->b.y << ")";
  } else {
    const auto& a = std::get<Arc>(shape);
    os << "arc center (" << a.center.x << "," << a.center.y << ") r=" << a.radius;
  }
  return os.str();
}

bool polylines_cross(Vec2 p0, Vec2 p1, Vec2 q0, Vec2 q1) {
  const Vec2 r = p1 - p0;
  const Vec2 s = q1 - q0;
  const double denom = r.cross(s);
  if (std::abs(denom) < 1e-300) return false;
  const double u = (q0 - p0).cross(s) / denom;
  const double v = (q0 - p0).cross(r) / denom;
  return u > 1e-9 && u < 1 - 1e-9 && v > 1e-9 && v < 1 - 1e-9;
}

}  // namespace

std::string to_string(DomainKind kind) {
  switch (kind) {
    case DomainKind::Stadium: return "stadium";
    case DomainKind::Rectangle: return "rectangle";
    case DomainKind::Generic: return "generic";
  }
  return "unknown";
}

std::string to_string(BcKind kind) {
  switch (kind) {
    case BcKind::Dirichlet: return "dirichlet";
    case BcKind::Neumann: return "neumann";
    case BcKind::Robin: return "robin";
  }
  return "unknown";
}

double BoundaryPiece::length() const {
  if (std::holds_alternative<Segment>(shape)) return (end - start).norm();
  const auto& a = std::get<Arc>(shape);
  return a.radius * std::abs(a.angle1 - a.angle0);
}

Vec2 BoundaryPiece::point(double s) const {
  if (std::holds_alternative<Segment>(shape)) return start + (end - start) * s;
  if (s <= 0.0) return start;
  if (s >= 1.0) return end;
  const auto& a = std::get<Arc>(shape);
  return arc_point(a, a.angle0 + s * (a.angle1 - a.angle0));
}

Vec2 BoundaryPiece::tangent(double s) const {
  if (std::holds_alternative<Segment>(shape)) {
    const Vec2 d = end - start;
    return d * (1.0 / d.norm());
  }
  const auto& a = std::get<Arc>(shape);
  const double theta = a.angle0 + s * (a.angle1 - a.angle0);
  const double dir = a.angle1 > a.angle0 ? 1.0 : -1.0;
  return Vec2{-std::sin(theta), std::cos(theta)} * dir;
}

Vec2 BoundaryPiece::outward_normal(double s) const {
  const Vec2 t = tangent(s);
  return {t.y, -t.x};
}

DomainSpec::DomainSpec(DomainKind kind, double t, std::vector<Shape> right_wing, BoundaryCondition bc)
    : kind_(kind), t_(t), right_wing_(std::move(right_wing)), bc_(bc) {
  if (!(t >= 1.0 - 1e-12 && t <= 2.0 + 1e-12)) {
    std::ostringstream os;
    os << "aspect parameter t = " << t << " outside [1, 2]";
    throw GeometryError(os.str());
  }
  build();
}

DomainSpec DomainSpec::stadium(double t, BoundaryCondition bc) {
  return DomainSpec(DomainKind::Stadium, t, {Arc{{0.0, 0.0}, kHalfHeight, -kPi / 2.0, kPi / 2.0}}, bc);
}

DomainSpec DomainSpec::rectangle(double t, BoundaryCondition bc) {
  return DomainSpec(DomainKind::Rectangle, t, {Segment{{0.0, -kHalfHeight}, {0.0, kHalfHeight}}}, bc);
}

DomainSpec DomainSpec::generic(double t, std::vector<Shape> right_wing, BoundaryCondition bc) {
  if (right_wing.empty()) throw GeometryError("generic domain needs at least one wing piece");
  return DomainSpec(DomainKind::Generic, t, std::move(right_wing), bc);
}

DomainSpec DomainSpec::with_t(double t) const { return DomainSpec(kind_, t, right_wing_, bc_); }

DomainSpec DomainSpec::with_bc(BoundaryCondition bc) const { return DomainSpec(kind_, t_, right_wing_, bc); }

DomainSpec make_stadium(double t) { return DomainSpec::stadium(t); }

void DomainSpec::build() {
  const double a = alpha();
  const double b = beta();

  // Wing validation in local coordinates.
  Vec2 cursor{0.0, -b};
  for (std::size_t k = 0; k < right_wing_.size(); ++k) {
    const Shape& s = right_wing_[k];
    if ((shape_start(s) - cursor).norm() > kJoinTol) {
      throw GeometryError("wing piece " + std::to_string(k) + " (" + describe(s) +
                          ") does not continue the chain");
    }
    if (const auto* arc = std::get_if<Arc>(&s)) {
      if (!(arc->radius > 0.0) || std::abs(arc->angle1 - arc->angle0) < 1e-12) {
        throw GeometryError("wing piece " + std::to_string(k) + " is a degenerate arc");
      }
      // Extreme x of the arc must stay on the wing side.
      double xmin = std::min(shape_start(s).x, shape_end(s).x);
      if (angle_in_arc(*arc, kPi)) xmin = std::min(xmin, arc->center.x - arc->radius);
      if (xmin < -kJoinTol) {
        throw GeometryError("wing piece " + std::to_string(k) + " crosses into the rectangle");
      }
    } else {
      const auto& seg = std::get<Segment>(s);
      if ((seg.b - seg.a).norm() < 1e-12) {
        throw GeometryError("wing piece " + std::to_string(k) + " has zero length");
      }
      if (std::min(seg.a.x, seg.b.x) < -kJoinTol) {
        throw GeometryError("wing piece " + std::to_string(k) + " crosses into the rectangle");
      }
    }
    cursor = shape_end(s);
  }
  if ((cursor - Vec2{0.0, b}).norm() > kJoinTol) {
    throw GeometryError("wing chain must end at (0, beta)");
  }

  pieces_.clear();
  auto push = [&](const Shape& shape, PieceRole role) {
    BoundaryPiece piece;
    piece.shape = shape;
    piece.role = role;
    piece.start = pieces_.empty() ? shape_start(shape) : pieces_.back().end;
    piece.end = shape_end(shape);
    pieces_.push_back(piece);
  };

  push(Segment{{-a, -b}, {a, -b}}, PieceRole::Bottom);
  for (const Shape& s : right_wing_) push(translate(s, {a, 0.0}), PieceRole::RightWing);
  pieces_.back().end = {a, b};
  push(Segment{{a, b}, {-a, b}}, PieceRole::Top);
  for (auto it = right_wing_.rbegin(); it != right_wing_.rend(); ++it) {
    push(translate(mirror_reversed(*it), {-a, 0.0}), PieceRole::LeftWing);
  }
  pieces_.back().end = pieces_.front().start;
  for (auto& p : pieces_) {
    if (auto* seg = std::get_if<Segment>(&p.shape)) *seg = Segment{p.start, p.end};
  }

  // Monotone decomposition for ray crossings.
  monotone_.clear();
  for (const auto& p : pieces_) {
    if (std::holds_alternative<Segment>(p.shape)) {
      monotone_.push_back({p.shape, p.start, p.end});
      continue;
    }
    const auto& arc = std::get<Arc>(p.shape);
    std::vector<double> cuts{arc.angle0};
    const double lo = std::min(arc.angle0, arc.angle1);
    const double hi = std::max(arc.angle0, arc.angle1);
    std::vector<double> inner;
    for (double q = std::ceil(lo / (kPi / 2.0)) * (kPi / 2.0); q < hi; q += kPi / 2.0) {
      if (q > lo + 1e-14 && q < hi - 1e-14) inner.push_back(q);
    }
    if (arc.angle1 < arc.angle0) std::reverse(inner.begin(), inner.end());
    cuts.insert(cuts.end(), inner.begin(), inner.end());
    cuts.push_back(arc.angle1);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      Arc sub = arc;
      sub.angle0 = cuts[k];
      sub.angle1 = cuts[k + 1];
      const Vec2 s0 = k == 0 ? p.start : arc_point(arc, cuts[k]);
      const Vec2 s1 = k + 2 == cuts.size() ? p.end : arc_point(arc, cuts[k + 1]);
      monotone_.push_back({sub, s0, s1});
    }
  }

  // Closed, counterclockwise, non-self-intersecting.
  if (!(area() > 0.0)) throw GeometryError("boundary chain is not counterclockwise");
  std::vector<std::vector<Vec2>> poly;
  for (const auto& p : pieces_) {
    std::vector<Vec2> pts;
    const int k = p.is_curved() ? 64 : 1;
    for (int i = 0; i <= k; ++i) pts.push_back(p.point(static_cast<double>(i) / k));
    poly.push_back(std::move(pts));
  }
  for (std::size_t i = 0; i < poly.size(); ++i) {
    for (std::size_t j = i + 1; j < poly.size(); ++j) {
      for (std::size_t u = 0; u + 1 < poly[i].size(); ++u) {
        for (std::size_t v = 0; v + 1 < poly[j].size(); ++v) {
          if (polylines_cross(poly[i][u], poly[i][u + 1], poly[j][v], poly[j][v + 1])) {
            throw GeometryError("boundary pieces " + std::to_string(i) + " and " + std::to_string(j) +
                                " intersect");
          }
        }
      }
    }
  }
}

double DomainSpec::area() const {
  double twice = 0.0;
  for (const auto& p : pieces_) {
    if (std::holds_alternative<Segment>(p.shape)) {
      twice += p.start.cross(p.end);
    } else {
      const auto& a = std::get<Arc>(p.shape);
      twice += a.radius * (a.center.x * (std::sin(a.angle1) - std::sin(a.angle0)) -
                           a.center.y * (std::cos(a.angle1) - std::cos(a.angle0))) +
               a.radius * a.radius * (a.angle1 - a.angle0);
    }
  }
  return 0.5 * twice;
}

double DomainSpec::perimeter() const {
  double total = 0.0;
  for (const auto& p : pieces_) total += p.length();
  return total;
}

std::vector<double> DomainSpec::crossings(Axis axis, double c) const {
  std::vector<double> out;
  const bool horizontal = axis == Axis::Horizontal;
  for (const auto& m : monotone_) {
    const double c0 = horizontal ? m.start.y : m.start.x;
    const double c1 = horizontal ? m.end.y : m.end.x;
    const double lo = std::min(c0, c1);
    const double hi = std::max(c0, c1);
    if (!(lo <= c && c < hi)) continue;
    if (std::holds_alternative<Segment>(m.shape)) {
      const double u = (c - c0) / (c1 - c0);
      const double o0 = horizontal ? m.start.x : m.start.y;
      const double o1 = horizontal ? m.end.x : m.end.y;
      out.push_back(o0 + u * (o1 - o0));
    } else {
      const auto& arc = std::get<Arc>(m.shape);
      const double mid = 0.5 * (arc.angle0 + arc.angle1);
      const double along = horizontal ? c - arc.center.y : c - arc.center.x;
      const double reach = std::sqrt(std::max(0.0, arc.radius * arc.radius - along * along));
      const double sign = horizontal ? (std::cos(mid) >= 0 ? 1.0 : -1.0) : (std::sin(mid) >= 0 ? 1.0 : -1.0);
      out.push_back((horizontal ? arc.center.x : arc.center.y) + sign * reach);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool DomainSpec::contains(Vec2 p) const {
  const auto xs = crossings(Axis::Horizontal, p.y);
  const auto right = std::upper_bound(xs.begin(), xs.end(), p.x);
  return (std::distance(right, xs.end()) % 2) == 1;
}

bool DomainSpec::rectangle_contains(Vec2 p) const {
  return std::abs(p.x) < alpha() && std::abs(p.y) < beta();
}

double DomainSpec::distance_to_boundary(Vec2 p) const { return locate(p).distance; }

BoundaryLocation DomainSpec::locate(Vec2 p) const {
  BoundaryLocation best{0, 0.0, std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    double param = 0.0;
    const double d = piece_distance(pieces_[k], p, &param);
    if (d < best.distance) best = {k, param, d};
  }
  return best;
}

std::vector<double> DomainSpec::piece_start_arclengths() const {
  std::vector<double> starts;
  double s = 0.0;
  for (const auto& p : pieces_) {
    starts.push_back(s);
    s += p.length();
  }
  return starts;
}

Vec2 DomainSpec::point_at_arclength(double s) const {
  const double per = perimeter();
  s = std::fmod(s, per);
  if (s < 0.0) s += per;
  for (const auto& p : pieces_) {
    const double len = p.length();
    if (s <= len) return p.point(s / len);
    s -= len;
  }
  return pieces_.back().end;
}

std::vector<double> DomainSpec::corner_arclengths() const {
  std::vector<double> corners;
  const auto starts = piece_start_arclengths();
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    const auto& prev = pieces_[(k + pieces_.size() - 1) % pieces_.size()];
    const Vec2 t0 = prev.tangent(1.0);
    const Vec2 t1 = pieces_[k].tangent(0.0);
    if (std::abs(t0.cross(t1)) > 1e-9 || t0.dot(t1) < 0.0) corners.push_back(starts[k]);
  }
  return corners;
}

BoundaryTrace boundary_trace(const DomainSpec& spec, std::size_t n_samples) {
  if (n_samples < 64) throw GeometryError("boundary_trace needs at least 64 samples");
  BoundaryTrace trace;
  trace.perimeter = spec.perimeter();
  const auto& pieces = spec.pieces();
  double s0 = 0.0;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const auto& p = pieces[k];
    const double len = p.length();
    if (len < 1e-12) throw GeometryError("boundary piece " + std::to_string(k) + " has zero length");
    const auto count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(n_samples) * len / trace.perimeter)));
    const double w = len / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(count);
      trace.samples.push_back({p.point(u), s0 + u * len, p.outward_normal(u), w, k, p.role});
    }
    s0 += len;
  }
  return trace;
}

namespace {
double role_velocity(PieceRole role) {
  switch (role) {
    case PieceRole::RightWing: return kWingSpeed;
    case PieceRole::LeftWing: return -kWingSpeed;
    default: return 0.0;
  }
}
}  // namespace

double normal_velocity(const DomainSpec& spec, Vec2 point) {
  const auto loc = spec.locate(point);
  if (loc.distance > 1e-9) {
    std::ostringstream os;
    os << "point (" << point.x << ", " << point.y << ") is not on the boundary";
    throw GeometryError(os.str());
  }
  const auto& piece = spec.pieces()[loc.piece];
  return role_velocity(piece.role) * piece.outward_normal(loc.param).x;
}

double normal_velocity(const DomainSpec&, const BoundaryTraceSample& sample) {
  return role_velocity(sample.role) * sample.normal.x;
}

double stadium_area(double t) { return t * kPi * kPi + kPi * kPi * kPi / 4.0; }

double stadium_perimeter(double t) { return 2.0 * t * kPi + kPi * kPi; }

// ---------------------------------------------------------------------------
// phi profile

PhiProfile::PhiProfile(double radius) : radius_(radius), amplitude_(315.0 / (256.0 * radius)) {
  if (!(radius > 0.0) || radius >= kHalfHeight) throw GeometryError("phi radius must lie in (0, pi/2)");
}

ProfileValue PhiProfile::base(double x) const {
  const double s = x / radius_;
  if (std::abs(s) >= 1.0) return {};
  const double q = 1.0 - s * s;
  const double c = amplitude_;
  return {c * q * q * q * q, -8.0 * c * s * q * q * q / radius_,
          -8.0 * c * q * q * (q - 6.0 * s * s) / (radius_ * radius_)};
}

double PhiProfile::antiderivative(double x) const {
  const double s = std::clamp(x / radius_, -1.0, 1.0);
  const double s2 = s * s;
  const double f = s * (1.0 + s2 * (-4.0 / 3.0 + s2 * (6.0 / 5.0 + s2 * (-4.0 / 7.0 + s2 / 9.0))));
  return amplitude_ * radius_ * f;
}

double PhiProfile::forward(double x, double t) const { return x + (t - 1.0) * kPi * antiderivative(x); }

double PhiProfile::inverse(double X, double t) const {
  const double shift = (t - 1.0) * kPi / 2.0;
  if (X >= radius_ + shift) return X - shift;
  if (X <= -radius_ - shift) return X + shift;
  double lo = -radius_;
  double hi = radius_;
  double x = std::clamp(X / (1.0 + (t - 1.0) * kPi * amplitude_), lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double f = forward(x, t) - X;
    if (f > 0.0) hi = x; else lo = x;
    const double df = 1.0 + (t - 1.0) * kPi * base(x).value;
    double next = x - f / df;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) < 1e-16 * (1.0 + std::abs(x))) return next;
    x = next;
  }
  return x;
}

ProfileValue PhiProfile::at(double X, double t) const {
  const double x = inverse(X, t);
  const ProfileValue p = base(x);
  if (p.value == 0.0 && p.d1 == 0.0 && p.d2 == 0.0) return {};
  const double s = (t - 1.0) * kPi;
  const double J = 1.0 + s * p.value;
  const double J2 = J * J;
  return {kPi * p.value / J, kPi * p.d1 / (J2 * J),
          kPi * p.d2 / (J2 * J2) - 3.0 * kPi * s * p.d1 * p.d1 / (J2 * J2 * J)};
}

double PhiProfile::support(double t) const { return radius_ + (t - 1.0) * kPi / 2.0; }

double PhiProfile::max_abs_d2(double t) const {
  // Dense scan in the reference coordinate, where phi_t'' is a smooth function.
  constexpr int kSamples = 40001;
  const double s = (t - 1.0) * kPi;
  double best = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    const double x = -radius_ + 2.0 * radius_ * i / (kSamples - 1);
    const ProfileValue p = base(x);
    const double J = 1.0 + s * p.value;
    const double d2 = kPi * p.d2 / std::pow(J, 4) - 3.0 * kPi * s * p.d1 * p.d1 / std::pow(J, 5);
    best = std::max(best, std::abs(d2));
  }
  return best * (1.0 + 1e-6);
}

ProfileValue phi_profile(double x, double t) { return PhiProfile().at(x, t); }

}  // namespace scarlab
