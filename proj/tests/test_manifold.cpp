#include "doctest.h"

#include <cmath>
#include <vector>

#include "hycone/common.hpp"
#include "hycone/manifold.hpp"

using namespace hycone;
using namespace hycone::manifold;

namespace {

// High-precision references (computed to 40 digits, independently of this
// library).
constexpr double kCosh1 = 1.543080634815243778477905620757061682602;
constexpr double kSinh1 = 1.175201193643801456882381850595600815156;
constexpr double kAcoshSqrt2 = 0.8813735870195430252326093249797923090281;

HyperPoint random_point(Rng& rng, double kappa, std::size_t dim, double max_norm) {
  std::vector<double> v(dim);
  double scale = rng.uniform(0.0, max_norm);
  double n2 = 0;
  for (auto& x : v) {
    x = rng.normal();
    n2 += x * x;
  }
  double n = std::sqrt(n2);
  if (n > 0)
    for (auto& x : v) x *= scale / n;
  return exp_map(origin(Curvature(kappa), dim), TangentVector{v});
}

}  // namespace

TEST_CASE("curvature rejects non-positive or non-finite values") {
  CHECK_THROWS_AS(Curvature(0.0), contract_violation);
  CHECK_THROWS_AS(Curvature(-1.0), contract_violation);
  CHECK_THROWS_AS(Curvature(std::nan("")), contract_violation);
  CHECK(Curvature(2.5).value() == 2.5);
}

TEST_CASE("lorentz inner product on explicit coordinates") {
  // Origin at curvature 1 pairs with itself to -1.
  const std::vector<double> o1{1.0, 0.0, 0.0};
  CHECK(lorentz_inner(o1, o1) == -1.0);

  const double r2 = std::sqrt(2.0);
  const std::vector<double> a{r2, 1.0, 0.0};
  const std::vector<double> b{r2, 0.0, 1.0};
  CHECK(lorentz_inner(a, b) == doctest::Approx(-2.0).epsilon(1e-15));

  // Curvature 4: origin time coordinate is 1/2, inner product -1/4.
  const std::vector<double> o4{0.5, 0.0, 0.0};
  CHECK(lorentz_inner(o4, o4) == -0.25);
}

TEST_CASE("time lift restores the hyperboloid constraint") {
  Curvature one(1.0);
  const std::vector<double> z{0.0, 0.0};
  const std::vector<double> e1{1.0, 0.0};
  CHECK(time_lift(z, one)[0] == 1.0);
  CHECK(time_lift(e1, one)[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(time_lift(z, Curvature(0.25))[0] == 2.0);
}

TEST_CASE("points satisfy the constraint exactly through the residual") {
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    double kappa = (i % 3 == 0) ? 0.1 : (i % 3 == 1) ? 1.0 : 10.0;
    HyperPoint p = random_point(rng, kappa, 6, 5.0);
    CHECK(minkowski_residual(p, p) == 0.0);
    // The naive full-coordinate product agrees within roundoff, which grows
    // with the cancellation scale kappa*|spatial|^2.
    std::vector<double> full = time_lift(p.spatial, Curvature(p.kappa));
    double ip = lorentz_inner(full, full);
    double s2 = p.spatial_norm() * p.spatial_norm();
    CHECK(std::abs(kappa * ip + 1.0) < 4e-15 * (1.0 + kappa * s2));
  }
}

TEST_CASE("distance worked values") {
  Curvature one(1.0);
  HyperPoint o = origin(one, 2);
  CHECK(geodesic_distance(o, o) == 0.0);

  // Point at radial coordinate sinh(1) sits at distance 1 from the origin.
  HyperPoint p = make_point({kSinh1, 0.0}, one);
  CHECK(geodesic_distance(o, p) == doctest::Approx(1.0).epsilon(1e-12));

  // Spatial norm 1 gives time coordinate sqrt(2) and distance acosh(sqrt 2).
  HyperPoint q = make_point({1.0, 0.0}, one);
  CHECK(geodesic_distance(o, q) == doctest::Approx(kAcoshSqrt2).epsilon(1e-12));
}

TEST_CASE("distance metric axioms hold numerically") {
  Rng rng(47);
  for (int i = 0; i < 1000; ++i) {
    double kappa = (i % 3 == 0) ? 0.1 : (i % 3 == 1) ? 1.0 : 10.0;
    HyperPoint a = random_point(rng, kappa, 4, 3.0);
    HyperPoint b = random_point(rng, kappa, 4, 3.0);
    HyperPoint c = random_point(rng, kappa, 4, 3.0);
    double dab = geodesic_distance(a, b);
    double dba = geodesic_distance(b, a);
    double dac = geodesic_distance(a, c);
    double dbc = geodesic_distance(b, c);
    CHECK(dab >= 0.0);
    CHECK(std::abs(dab - dba) <= 1e-12 * (1.0 + dab));
    CHECK(dac <= dab + dbc + 1e-7);
    CHECK(geodesic_distance(a, a) == 0.0);
  }
}

TEST_CASE("exp map worked values") {
  Curvature one(1.0);
  HyperPoint o = origin(one, 2);

  HyperPoint same = exp_map(o, TangentVector{{0.0, 0.0}});
  CHECK(same.spatial == o.spatial);

  // Unit tangent along the first axis lands at (cosh 1, sinh 1, 0).
  HyperPoint p = exp_map(o, TangentVector{{1.0, 0.0}});
  CHECK(p.spatial[0] == doctest::Approx(kSinh1).epsilon(1e-14));
  CHECK(p.spatial[1] == 0.0);
  CHECK(p.time() == doctest::Approx(kCosh1).epsilon(1e-14));
}

TEST_CASE("exp map from the origin is unit speed") {
  Curvature one(1.0);
  HyperPoint o = origin(one, 3);
  Rng rng(13);
  for (double norm : {1e-7, 1e-4, 0.01, 0.5, 1.0, 2.5, 4.9}) {
    std::vector<double> v(3);
    double n2 = 0;
    for (auto& x : v) {
      x = rng.normal();
      n2 += x * x;
    }
    for (auto& x : v) x *= norm / std::sqrt(n2);
    HyperPoint p = exp_map(o, TangentVector{v});
    CHECK(geodesic_distance(o, p) == doctest::Approx(norm).epsilon(1e-9));
  }
}

TEST_CASE("exp map distance grows monotonically with tangent norm") {
  Curvature k(0.7);
  Rng rng(17);
  HyperPoint base = random_point(rng, 0.7, 4, 1.0);
  std::vector<double> dir(4);
  for (auto& x : dir) x = rng.normal();
  double prev = -1.0;
  for (double t : {0.1, 0.3, 0.7, 1.2, 2.0, 3.5}) {
    std::vector<double> v(dir);
    for (auto& x : v) x *= t;
    double d = geodesic_distance(base, exp_map(base, TangentVector{v}));
    CHECK(d > prev);
    prev = d;
  }
}

TEST_CASE("log map worked values and roundtrip") {
  Curvature one(1.0);
  HyperPoint o = origin(one, 2);

  TangentVector z = log_map(o, o);
  CHECK(z.spatial == std::vector<double>{0.0, 0.0});

  Rng rng(53);
  for (int i = 0; i < 2000; ++i) {
    double kappa = (i % 3 == 0) ? 0.1 : (i % 3 == 1) ? 1.0 : 10.0;
    Curvature k(kappa);
    std::size_t dim = 2 + (i % 4);
    HyperPoint base = random_point(rng, kappa, dim, 1.5);
    std::vector<double> v(dim);
    double scale = rng.uniform(0.0, 3.0);
    double n2 = 0;
    for (auto& x : v) {
      x = rng.normal();
      n2 += x * x;
    }
    double n = std::sqrt(n2);
    if (n > 0)
      for (auto& x : v) x *= scale / n;

    HyperPoint q = exp_map(base, TangentVector{v});
    TangentVector back = log_map(base, q);
    double err2 = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      double e = back.spatial[d] - v[d];
      err2 += e * e;
    }
    CHECK(std::sqrt(err2) <= 1e-6 * (1.0 + scale));
    // The recovered tangent norm equals the geodesic distance.
    CHECK(std::abs(tangent_norm(base, back) - geodesic_distance(base, q)) <=
          1e-9 * (1.0 + scale));
  }
}

TEST_CASE("projection maps raw vectors onto the manifold") {
  Curvature one(1.0);
  const std::vector<double> zero{0.0, 0.0};
  HyperPoint o = project_to_manifold(zero, 1.0, one);
  CHECK(o.spatial == std::vector<double>{0.0, 0.0});
  CHECK(o.time() == 1.0);

  // Scale 1 matches the exp-map image of the same tangent vector.
  const std::vector<double> e1{1.0, 0.0};
  HyperPoint p = project_to_manifold(e1, 1.0, one);
  CHECK(p.spatial[0] == doctest::Approx(kSinh1).epsilon(1e-14));
  CHECK(p.time() == doctest::Approx(kCosh1).epsilon(1e-14));
}

TEST_CASE("doubling the projection scale doubles the distance") {
  Curvature k(2.0);
  Rng rng(71);
  HyperPoint o = origin(k, 5);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> raw(5);
    for (auto& x : raw) x = rng.normal();
    double d1 = geodesic_distance(o, project_to_manifold(raw, 0.4, k));
    double d2 = geodesic_distance(o, project_to_manifold(raw, 0.8, k));
    CHECK(d2 == doctest::Approx(2.0 * d1).epsilon(1e-10));
  }
}

TEST_CASE("dimension mismatches are rejected") {
  Curvature one(1.0);
  HyperPoint a = origin(one, 2);
  HyperPoint b = origin(one, 3);
  CHECK_THROWS_AS(geodesic_distance(a, b), contract_violation);
  CHECK_THROWS_AS(exp_map(a, TangentVector{{1.0, 0.0, 0.0}}), contract_violation);
  CHECK_THROWS_AS(log_map(a, b), contract_violation);
}

TEST_CASE("curvature mismatches are rejected") {
  HyperPoint a = origin(Curvature(1.0), 2);
  HyperPoint b = origin(Curvature(2.0), 2);
  CHECK_THROWS_AS(geodesic_distance(a, b), contract_violation);
  CHECK_THROWS_AS(log_map(a, b), contract_violation);
}
