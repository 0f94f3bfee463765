#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "saddlelab/torus_linear.hpp"

using namespace saddlelab;

namespace {

IMat fib2() {
  IMat M(2, 2);
  M << 2, 1, 1, 1;
  return M;
}

IMat t4_matrix() {
  IMat M(4, 4);
  M << 1, -1, 1, -1, -1, 3, 0, 1, 1, 0, 3, -2, -1, 1, -2, 2;
  return M;
}

}  // namespace

TEST_CASE("splitting of the 2x2 hyperbolic matrix") {
  auto A = compute_splitting(fib2(), 0.2, 5.0);
  CHECK(A.det == 1);
  CHECK(A.dims == std::array<int, 4>{0, 1, 1, 0});
  // roots of t^2 - 3t + 1
  double lo = (3.0 - std::sqrt(5.0)) / 2.0;
  double hi = (3.0 + std::sqrt(5.0)) / 2.0;
  CHECK(A.moduli[0] == doctest::Approx(lo).epsilon(1e-12));
  CHECK(A.moduli[1] == doctest::Approx(hi).epsilon(1e-12));
  CHECK(A.invariance_residual() <= 1e-9);
}

TEST_CASE("identity is rejected as non-hyperbolic") {
  IMat I = IMat::Identity(2, 2);
  CHECK_THROWS_AS(compute_splitting(I, 0.2, 5.0), NotHyperbolic);
}

TEST_CASE("non-unimodular matrix is rejected") {
  IMat M(2, 2);
  M << 2, 0, 0, 1;
  CHECK_THROWS_AS(compute_splitting(M, 0.2, 5.0), NotUnimodular);
}

TEST_CASE("4x4 block similarity gets dims (1,1,1,1)") {
  // conjugate diag-block matrix by a unimodular integer matrix; moduli are
  // preserved under similarity
  IMat B = IMat::Zero(4, 4);
  B(0, 0) = 5; B(0, 1) = 3; B(1, 0) = 3; B(1, 1) = 2;   // moduli 0.146, 6.854
  B(2, 2) = 2; B(2, 3) = 1; B(3, 2) = 1; B(3, 3) = 1;   // moduli 0.382, 2.618
  IMat U = IMat::Identity(4, 4);
  U(0, 2) = 1;
  U(3, 1) = -1;
  IMat Uinv = IMat::Identity(4, 4);
  Uinv(0, 2) = -1;
  Uinv(3, 1) = 1;
  IMat M = Uinv * B * U;
  auto A = compute_splitting(M, 0.25, 4.0);
  CHECK(A.dims == std::array<int, 4>{1, 1, 1, 1});
  CHECK(A.moduli[0] == doctest::Approx(0.146).epsilon(1e-2));
  CHECK(A.moduli[3] == doctest::Approx(6.854).epsilon(1e-2));
}

TEST_CASE("frozen T4 example matrix") {
  auto A = compute_splitting(t4_matrix(), 0.25, 4.0);
  CHECK(A.det == 1);
  CHECK(A.dims == std::array<int, 4>{1, 1, 1, 1});
  CHECK(A.moduli[1] * A.moduli[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(A.invariance_residual() <= 1e-9);
  // symmetric input: full frame orthogonal
  Eigen::MatrixXd Q = A.full_frame();
  CHECK((Q.transpose() * Q - Eigen::MatrixXd::Identity(4, 4)).norm() <= 1e-9);
}

TEST_CASE("splitting stable under powers") {
  auto A = compute_splitting(fib2(), 0.2, 5.0);
  for (int k = 2; k <= 3; ++k) {
    IMat Mk = integer_power(fib2(), k);
    auto Ak = compute_splitting(Mk, std::pow(0.2, k), std::pow(5.0, k));
    CHECK(Ak.dims == A.dims);
    for (int i = 0; i < 2; ++i)
      CHECK(Ak.moduli[i] ==
            doctest::Approx(std::pow(A.moduli[i], k)).epsilon(1e-9));
  }
}

TEST_CASE("project and lift_near") {
  Vec x(2);
  x << 1.25, -0.5;
  Vec p = project_point(x);
  CHECK(p[0] == doctest::Approx(0.25));
  CHECK(p[1] == doctest::Approx(0.5));

  Vec q(1), anchor(1);
  q << 0.9;
  anchor << 2.05;
  Vec lifted = lift_near(q, anchor);
  CHECK(lifted[0] == doctest::Approx(1.9));

  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    Vec tp(3), an(3);
    for (int j = 0; j < 3; ++j) {
      tp[j] = rng.next_double();
      an[j] = rng.uniform(-5.0, 5.0);
    }
    Vec back = project_point(lift_near(tp, an));
    CHECK((back - tp).norm() <= 1e-12);
  }
}

TEST_CASE("torus distance") {
  Vec a(2), b(2);
  a << 0.9, 0.0;
  b << 0.1, 0.0;
  CHECK(torus_distance(a, b) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(torus_distance(a, a) == 0.0);
  Vec c(2), d(2);
  c << 0.0, 0.0;
  d << 0.5, 0.5;
  CHECK(torus_distance(c, d) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("fixed point counts match |det(M^m - I)| exactly") {
  for (int m = 1; m <= 4; ++m) {
    IMat K2 = integer_power(fib2(), m) - IMat::Identity(2, 2);
    auto pts2 = fixed_points(fib2(), m);
    CHECK(static_cast<long long>(pts2.size()) ==
          std::llabs(det_integer(K2)));

    IMat K4 = integer_power(t4_matrix(), m) - IMat::Identity(4, 4);
    auto pts4 = fixed_points(t4_matrix(), m);
    CHECK(static_cast<long long>(pts4.size()) ==
          std::llabs(det_integer(K4)));
  }
  // frozen counts for the T4 matrix
  CHECK(fixed_points(t4_matrix(), 1).size() == 5);
  CHECK(fixed_points(t4_matrix(), 2).size() == 205);
}

TEST_CASE("fixed points: m=1 solutions") {
  auto pts = fixed_points(fib2(), 1);
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].norm() <= 1e-12);

  auto pts2 = fixed_points(fib2(), 2);
  CHECK(pts2.size() == 5);
  // origin is always among them
  bool has_origin = false;
  for (const auto& p : pts2)
    if (p.norm() <= 1e-9) has_origin = true;
  CHECK(has_origin);
  // each is genuinely fixed by M^2 mod 1
  IMat M2 = integer_power(fib2(), 2);
  for (const auto& p : pts2) {
    Vec img(2);
    img = M2.cast<double>() * p;
    CHECK(torus_distance(project_point(img), p) <= 1e-9);
  }
}

TEST_CASE("degenerate period throws") {
  IMat M(2, 2);
  M << 0, 1, 1, 0;  // involution: M^2 = I
  CHECK_THROWS_AS(fixed_points(M, 2), DegeneratePeriod);
}

TEST_CASE("splitting json export") {
  auto A = compute_splitting(fib2(), 0.2, 5.0);
  auto j = splitting_to_json(A);
  CHECK(j["n"] == 2);
  CHECK(j["dims"][1] == 1);
  CHECK(j["frame_wu"].size() == 2);
}
