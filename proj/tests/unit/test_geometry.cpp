#include "doctest.h"

#include <cmath>

#include "scarlab/geometry.hpp"

using namespace scarlab;

namespace {

// Composite Simpson on [a, b] with n (even) panels.
template <typename F>
double simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

std::vector<Shape> half_disc_wing() {
  return {Arc{{0.0, 0.0}, kHalfHeight, -kPi / 2.0, kPi / 2.0}};
}

}  // namespace

TEST_CASE("stadium area and perimeter match closed forms") {
  for (double t : {1.0, 1.37, 2.0}) {
    const auto s = DomainSpec::stadium(t);
    CHECK(s.area() == doctest::Approx(t * kPi * kPi + std::pow(kPi, 3) / 4.0).epsilon(1e-13));
    CHECK(s.perimeter() == doctest::Approx(2.0 * t * kPi + kPi * kPi).epsilon(1e-13));
    CHECK(stadium_area(t) == doctest::Approx(s.area()).epsilon(1e-13));
  }
}

TEST_CASE("rectangle area") {
  const auto r = DomainSpec::rectangle(1.5);
  CHECK(r.area() == doctest::Approx(1.5 * kPi * kPi).epsilon(1e-13));
  CHECK(r.perimeter() == doctest::Approx(2.0 * 1.5 * kPi + 2.0 * kPi).epsilon(1e-13));
}

TEST_CASE("generic half-disc wings reproduce the stadium") {
  const auto g = DomainSpec::generic(1.3, half_disc_wing());
  const auto s = DomainSpec::stadium(1.3);
  CHECK(g.area() == doctest::Approx(s.area()).epsilon(1e-13));
  CHECK(g.perimeter() == doctest::Approx(s.perimeter()).epsilon(1e-13));
  CHECK(g.kind() == DomainKind::Generic);
}

TEST_CASE("boundary integral of the normal velocity equals dA/dt") {
  for (double t : {1.1, 1.5, 1.9}) {
    const auto s = DomainSpec::stadium(t);
    const auto trace = boundary_trace(s, 4096);
    double k = 0.0;
    for (const auto& smp : trace.samples) k += normal_velocity(s, smp) * smp.weight;
    // Independent: central difference of the area.
    const double h = 1e-4;
    const double fd = (DomainSpec::stadium(t + h).area() - DomainSpec::stadium(t - h).area()) / (2 * h);
    CHECK(k == doctest::Approx(fd).epsilon(1e-6));
    CHECK(k == doctest::Approx(kPi * kPi).epsilon(1e-6));
  }
}

TEST_CASE("normal velocity convention") {
  const auto s = DomainSpec::stadium(1.0);
  const double a = s.alpha();
  CHECK(normal_velocity(s, Vec2{a + kHalfHeight, 0.0}) == doctest::Approx(kPi / 2.0));
  CHECK(normal_velocity(s, Vec2{-a - kHalfHeight, 0.0}) == doctest::Approx(kPi / 2.0));
  CHECK(normal_velocity(s, Vec2{0.3, kHalfHeight}) == doctest::Approx(0.0));
  CHECK(normal_velocity(s, Vec2{0.3, -kHalfHeight}) == doctest::Approx(0.0));
  const double th = 0.7;
  CHECK(normal_velocity(s, Vec2{a + kHalfHeight * std::cos(th), kHalfHeight * std::sin(th)}) ==
        doctest::Approx(kPi / 2.0 * std::cos(th)));
  CHECK_THROWS_AS(normal_velocity(s, Vec2{0.0, 0.0}), GeometryError);
}

TEST_CASE("trace weights sum to the perimeter") {
  const auto s = DomainSpec::stadium(1.7);
  const auto trace = boundary_trace(s, 500);
  double total = 0.0;
  for (const auto& smp : trace.samples) {
    total += smp.weight;
    CHECK(s.distance_to_boundary(smp.point) < 1e-12);
    CHECK(std::abs(smp.normal.norm() - 1.0) < 1e-12);
  }
  CHECK(total == doctest::Approx(s.perimeter()).epsilon(1e-12));
}

TEST_CASE("containment and crossings") {
  const auto s = DomainSpec::stadium(1.2);
  const double tip = s.alpha() + kHalfHeight;
  CHECK(s.contains({0.0, 0.0}));
  CHECK(s.contains({tip - 1e-3, 0.0}));
  CHECK_FALSE(s.contains({tip + 1e-3, 0.0}));
  CHECK_FALSE(s.contains({0.0, kHalfHeight + 1e-3}));
  const auto xs = s.crossings(Axis::Horizontal, 0.4);
  REQUIRE(xs.size() == 2);
  const double expect = s.alpha() + std::sqrt(kHalfHeight * kHalfHeight - 0.16);
  CHECK(xs[1] == doctest::Approx(expect).epsilon(1e-14));
  CHECK(xs[0] == doctest::Approx(-expect).epsilon(1e-14));
  const auto ys = s.crossings(Axis::Vertical, 0.0);
  REQUIRE(ys.size() == 2);
  CHECK(ys[1] == doctest::Approx(kHalfHeight));
  CHECK(s.crossings(Axis::Horizontal, 2.0).empty());
}

TEST_CASE("invalid domains are rejected") {
  CHECK_THROWS_AS(DomainSpec::stadium(0.9), GeometryError);
  CHECK_THROWS_AS(DomainSpec::stadium(2.1), GeometryError);
  // Wing does not close up at (0, beta).
  CHECK_THROWS_AS(DomainSpec::generic(1.0, {Segment{{0.0, -kHalfHeight}, {1.0, 0.0}}}), GeometryError);
  // Wing crosses into x < 0.
  CHECK_THROWS_AS(DomainSpec::generic(1.0, {Segment{{0.0, -kHalfHeight}, {-0.5, 0.0}},
                                            Segment{{-0.5, 0.0}, {0.0, kHalfHeight}}}),
                  GeometryError);
}

TEST_CASE("phi profile integrates to one and pushes forward to pi") {
  const PhiProfile p;
  const double r = p.radius();
  CHECK(simpson([&](double x) { return p.base(x).value; }, -r, r, 2000) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.antiderivative(r) == doctest::Approx(0.5).epsilon(1e-14));
  for (double t : {1.0, 1.5, 2.0}) {
    const double w = p.support(t);
    CHECK(w < t * kHalfHeight);
    const double integral = simpson([&](double X) { return p.at(X, t).value; }, -w, w, 4000);
    CHECK(integral == doctest::Approx(kPi).epsilon(1e-9));
    CHECK(p.at(w + 1e-9, t).value == 0.0);
  }
}

TEST_CASE("phi_t derivatives agree with finite differences") {
  const PhiProfile p;
  const double h = 1e-4;
  for (double t : {1.0, 1.6}) {
    for (double X : {-0.9, -0.3, 0.1, 0.55}) {
      const auto v = p.at(X, t);
      const double d1 = (p.at(X + h, t).value - p.at(X - h, t).value) / (2 * h);
      const double d2 = (p.at(X + h, t).value - 2 * v.value + p.at(X - h, t).value) / (h * h);
      CHECK(v.d1 == doctest::Approx(d1).epsilon(1e-6));
      CHECK(v.d2 == doctest::Approx(d2).epsilon(1e-4));
      CHECK(std::abs(v.d2) <= p.max_abs_d2(t));
    }
  }
  CHECK(p.inverse(p.forward(0.3, 1.8), 1.8) == doctest::Approx(0.3).epsilon(1e-13));
}
