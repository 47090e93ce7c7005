#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scarlab/spectral.hpp"

using namespace scarlab;

namespace {

// Five-point Dirichlet eigenvalues on the aligned box [-t pi/2, t pi/2] x [-pi/2, pi/2].
std::vector<double> box_dirichlet(double t, double dx, std::size_t count) {
  const int nx = static_cast<int>(std::lround(t * kPi / dx));
  const int ny = static_cast<int>(std::lround(kPi / dx));
  std::vector<double> out;
  for (int p = 1; p < nx; ++p)
    for (int q = 1; q < ny; ++q) {
      const double sx = std::sin(p * kPi / (2.0 * nx)), sy = std::sin(q * kPi / (2.0 * ny));
      out.push_back(4.0 / (dx * dx) * (sx * sx + sy * sy));
    }
  std::sort(out.begin(), out.end());
  out.resize(std::min(count, out.size()));
  return out;
}

void check_orthonormal(const Grid& grid, const std::vector<EigenPair>& pairs) {
  for (std::size_t a = 0; a < pairs.size(); ++a) {
    CHECK(std::abs(grid.norm(pairs[a].u) - 1.0) < 1e-10);
    for (std::size_t b = a + 1; b < pairs.size(); ++b) CHECK(std::abs(grid.inner(pairs[a].u, pairs[b].u)) < 1e-8);
  }
}

}  // namespace

TEST_CASE("square: lowest six match the discrete sine spectrum") {
  const double dx = kPi / 32.0;
  const auto grid = build_grid(DomainSpec::rectangle(1.0), dx);
  const auto op = assemble_laplacian(grid);
  const auto s = eigs_lowest(op, 6);
  const auto want = box_dirichlet(1.0, dx, 6);
  REQUIRE(s.pairs.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(s.pairs[k].E == doctest::Approx(want[k]).epsilon(1e-9));
    CHECK(s.pairs[k].j == k + 1);
    CHECK(s.pairs[k].residual <= 1e-8 * s.pairs[k].E);
    // Independent residual in the discrete norm.
    const Eigen::VectorXd r = op.apply(s.pairs[k].u) - s.pairs[k].E * s.pairs[k].u;
    CHECK(grid.norm(r) <= 1e-8 * s.pairs[k].E);
  }
  check_orthonormal(grid, s.pairs);
  // Continuum {2,5,5,8,10,10} within discretization error.
  const double cont[] = {2, 5, 5, 8, 10, 10};
  for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(s.pairs[k].E - cont[k]) / cont[k] < 0.01);
}

TEST_CASE("rectangle t=2: ground state tends to 1.25") {
  const auto op = assemble_laplacian(build_grid(DomainSpec::rectangle(2.0), kPi / 32.0));
  const auto s = eigs_lowest(op, 3);
  CHECK(s.pairs[0].E == doctest::Approx(1.25).epsilon(2e-3));
}

TEST_CASE("square windows") {
  const auto op = assemble_laplacian(build_grid(DomainSpec::rectangle(1.0), kPi / 32.0));
  SpectrumSolver solver(op);
  const auto w = solver.window(10.0, 1.0);
  CHECK(w.certified_count() == 2);
  CHECK(w.complete());
  CHECK(solver.window(3.0, 0.5).pairs.empty());
  CHECK_THROWS_AS(solver.window(1.0, 2.0), SpectralError);
}

TEST_CASE("counting function") {
  const auto op = assemble_laplacian(build_grid(DomainSpec::rectangle(1.0), kPi / 32.0));
  const auto s = eigs_lowest(op, 8);  // E_8 ~ 13, E_9 ~ 17
  CHECK(counting_function(s, 10.5) == 6);
  CHECK(counting_function(s, 1.0) == 0);
  CHECK_THROWS_AS(counting_function(s, 50.0), SpectralError);
  SpectrumSolver solver(op);
  CHECK(counting_function(s, 9.0 + 1.5) - counting_function(s, 9.0 - 1.5) == solver.window(9.0, 1.5).pairs.size());
}

TEST_CASE("stadium window count equals the lowest-part count") {
  const auto grid = build_grid(DomainSpec::stadium(1.0), kPi / 32.0);
  const auto op = assemble_laplacian(grid);
  const auto lowest = eigs_lowest(op, 170);
  REQUIRE(lowest.certified_upper > 105.0);
  std::size_t brute = 0;
  for (const auto& p : lowest.pairs) brute += (p.E >= 95.0 && p.E <= 105.0);
  const auto w = eigs_window(op, 100.0, 5.0);
  CHECK(w.pairs.size() == brute);
  CHECK(w.complete());
  check_orthonormal(grid, w.pairs);
  for (const auto& p : w.pairs) {
    const auto it = std::find_if(lowest.pairs.begin(), lowest.pairs.end(), [&](const EigenPair& q) { return q.j == p.j; });
    REQUIRE(it != lowest.pairs.end());
    CHECK(p.E == doctest::Approx(it->E).epsilon(1e-9));
  }
}

TEST_CASE("leaf splitting agrees with the dense solver") {
  const auto grid = build_grid(DomainSpec::stadium(1.3), kPi / 20.0);
  const auto op = assemble_laplacian(grid);
  SolverOptions dense;
  dense.dense_limit = 100000;
  SolverOptions split;
  split.dense_limit = 0;
  split.leaf_size = 5;
  const auto a = eigs_window(op, 60.0, 20.0, dense);
  const auto b = eigs_window(op, 60.0, 20.0, split);
  REQUIRE(a.pairs.size() == b.pairs.size());
  CHECK(a.pairs.size() > 15);
  for (std::size_t k = 0; k < a.pairs.size(); ++k) CHECK(b.pairs[k].E == doctest::Approx(a.pairs[k].E).epsilon(1e-9));
  check_orthonormal(grid, b.pairs);
}

TEST_CASE("degenerate pairs split across leaves stay orthogonal") {
  // The square has exact double eigenvalues; tiny leaves force splits near them.
  const auto grid = build_grid(DomainSpec::rectangle(1.0), kPi / 24.0);
  const auto op = assemble_laplacian(grid);
  SolverOptions split;
  split.dense_limit = 0;
  split.leaf_size = 3;
  const auto w = eigs_window(op, 30.0, 25.0, split);
  CHECK(w.complete());
  check_orthonormal(grid, w.pairs);
}

TEST_CASE("Neumann lowest eigenvalue is zero") {
  const auto op = assemble_laplacian(build_grid(DomainSpec::rectangle(1.0, BoundaryCondition::neumann()), kPi / 32.0));
  const auto s = eigs_lowest(op, 3);
  CHECK(std::abs(s.pairs[0].E) < 1e-9);
  CHECK(s.pairs[1].E == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("Weyl fit on the square") {
  const auto op = assemble_laplacian(build_grid(DomainSpec::rectangle(1.0), kPi / 64.0));
  auto s = eigs_lowest(op, 250, SolverOptions{.vectors = false});
  s.t = 1.0;
  const auto fit = weyl_fit({s});
  REQUIRE(fit.fits.size() == 1);
  CHECK(fit.fits[0].c1 == doctest::Approx(kPi / 4.0).epsilon(0.05));
  CHECK(fit.gamma > 0.0);
  CHECK(fit.gamma <= fit.Gamma);
  for (std::size_t j = 20; j <= s.pairs.size(); ++j) {
    CHECK(s.pairs[j - 1].E / j >= fit.gamma);
    CHECK(s.pairs[j - 1].E / j <= fit.Gamma);
  }
  CHECK_THROWS_AS(weyl_fit({s}, 300), SpectralError);
}

TEST_CASE("precondition m <= n/10") {
  const auto op = assemble_laplacian(build_grid(DomainSpec::rectangle(1.0), kPi / 16.0));
  CHECK_THROWS_AS(eigs_lowest(op, 30), SpectralError);
}

TEST_CASE("spectrum rows") {
  std::ostringstream os;
  EigenPair p;
  p.j = 3;
  p.E = 5.25;
  p.residual = 1e-12;
  write_spectrum_rows(os, 1.5, {p}, 5.0, 1.0);
  CHECK(os.str() == "1.5,3,5.25,1.000000e-12,5,1\n");
}
