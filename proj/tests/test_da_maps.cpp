#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "saddlelab/da_maps.hpp"

using namespace saddlelab;

namespace {

const double kLam = (3.0 - std::sqrt(5.0)) / 2.0;
const double kMu = (3.0 + std::sqrt(5.0)) / 2.0;

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

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec v4(double a, double b, double c, double d) {
  Vec v(4);
  v << a, b, c, d;
  return v;
}

MapPtr t4_three_surgeries() {
  auto A = compute_splitting(t4_matrix(), 0.25, 4.0);
  auto fps = fixed_points(t4_matrix(), 1);
  REQUIRE(fps.size() == 5);
  std::vector<SurgeryChoice> chs;
  for (int i = 1; i <= 3; ++i) {
    PlanarMixChoice pm;
    pm.point = fps[i];
    pm.rho = 0.0008;
    pm.l = 0.0008;
    pm.r1 = 0.0032;
    pm.w_out = 0.0032;
    chs.push_back(pm);
  }
  return general_da(A, chs);
}

}  // namespace

TEST_CASE("mane mix: identity derivative at the origin") {
  auto g = mane_mix_2d(kLam, kMu, 0.03, 0.03, 0.12, 0.2);
  Mat J = g->jacobian(Vec::Zero(2));
  CHECK((J - Mat::Identity(2, 2)).norm() <= 1e-12);
}

TEST_CASE("mane mix: equals the linear part outside the support") {
  auto g = mane_mix_2d(kLam, kMu, 0.03, 0.03, 0.12, 0.2);
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    Vec x = rng.unit_vector(2) * rng.uniform(std::sqrt(0.12), 3.0);
    Vec img = g->eval_lift(x);
    CHECK(std::abs(img[0] - kLam * x[0]) <= 1e-12);
    CHECK(std::abs(img[1] - kMu * x[1]) <= 1e-12);
  }
}

TEST_CASE("mane mix: displayed jacobian behaviour on the x-axis") {
  auto g = mane_mix_2d(kLam, kMu, 0.03, 0.03, 0.12, 0.2);
  for (double x : {0.05, 0.1, 0.15}) {  // x^2 < rho = 0.03 needs x < 0.173
    Mat J = g->jacobian(v2(x, 0.0));
    CHECK(J(0, 0) < 1.0);
    CHECK(J(1, 1) > 1.0);
    CHECK(J(0, 1) == 0.0);
    CHECK(J(1, 0) == 0.0);
  }
}

TEST_CASE("mane mix: analytic jacobian vs central differences") {
  auto g = mane_mix_2d(kLam, kMu, 0.03, 0.03, 0.12, 0.2);
  Rng rng(99);
  double worst = jacobian_fd_error(*g, 1000, rng);
  CHECK(worst <= 1e-6);
}

TEST_CASE("mane mix: invalid linear part") {
  CHECK_THROWS_AS(mane_mix_2d(1.2, kMu, 0.03, 0.03, 0.12, 0.2),
                  NotHyperbolicLinearPart);
  CHECK_THROWS_AS(mane_mix_2d(kLam, 0.8, 0.03, 0.03, 0.12, 0.2),
                  NotHyperbolicLinearPart);
  CHECK_THROWS_AS(mane_mix_2d(kLam, kMu, 0.05, 0.05, 0.12, 0.2), BadGeometry);
}

TEST_CASE("embed 4d: derivative at zero is diag(1,1,ss,uu)") {
  auto f = embed_center_4d(0.18, kLam, kMu, 5.4, 0.2, 0.02);
  Mat J = f->jacobian(Vec::Zero(4));
  Mat expect = Mat::Zero(4, 4);
  expect(0, 0) = 1.0;
  expect(1, 1) = 1.0;
  expect(2, 2) = 0.18;
  expect(3, 3) = 5.4;
  CHECK((J - expect).norm() <= 1e-12);
}

TEST_CASE("embed 4d: linear outside the eps ball") {
  auto f = embed_center_4d(0.18, kLam, kMu, 5.4, 0.2, 0.02);
  Rng rng(3);
  Mat A = f->linear_matrix();
  for (int i = 0; i < 500; ++i) {
    Vec x = rng.unit_vector(4) * rng.uniform(0.2, 2.0);
    CHECK((f->eval_lift(x) - A * x).norm() <= 1e-12);
  }
}

TEST_CASE("embed 4d: center-plane restriction reproduces the planar model") {
  double rho = 0.005, l = 0.005, r1 = 0.019;
  auto f = embed_center_4d(0.18, kLam, kMu, 5.4, 0.2, 0.02, rho, l, r1);
  auto g = mane_mix_2d(kLam, kMu, rho, l, r1, 0.2);
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    Vec u = rng.in_ball(2, 0.25);
    Vec x4 = v4(u[0], u[1], 0.0, 0.0);
    Vec img4 = f->eval_lift(x4);
    Vec img2 = g->eval_lift(u);
    CHECK(std::abs(img4[0] - img2[0]) <= 1e-12);
    CHECK(std::abs(img4[1] - img2[1]) <= 1e-12);
    CHECK(std::abs(img4[2]) <= 1e-15);
    CHECK(std::abs(img4[3]) <= 1e-15);
  }
}

TEST_CASE("embed 4d: jacobian vs finite differences including cutoff region") {
  auto f = embed_center_4d(0.18, kLam, kMu, 5.4, 0.2, 0.02);
  Rng rng(5);
  double worst = 0.0;
  for (int i = 0; i < 300; ++i) {
    Vec x = rng.in_ball(4, 0.21);
    Mat J = f->jacobian(x);
    Mat F(4, 4);
    double h = 1e-6;
    for (int j = 0; j < 4; ++j) {
      Vec xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      F.col(j) = (f->eval_lift(xp) - f->eval_lift(xm)) / (2.0 * h);
    }
    worst = std::max(worst, (J - F).norm() / std::max(1.0, J.norm()));
  }
  CHECK(worst <= 2e-5);  // straddles profile kinks; relaxed accordingly
}

TEST_CASE("contracting center: identity at zero and radial sphere map") {
  std::vector<double> eigs = {0.3, 0.4, 0.5};
  auto g = contracting_center_kd(eigs, 0.9, 0.2, 1e-14);
  Mat J = g->jacobian(Vec::Zero(3));
  CHECK((J - Mat::Identity(3, 3)).norm() <= 1e-12);

  const auto* dm = dynamic_cast<const DerivedMap*>(g.get());
  REQUIRE(dm != nullptr);
  auto field =
      std::dynamic_pointer_cast<const CenterFlattenField>(dm->patches()[0].field);
  REQUIRE(field != nullptr);

  // spheres of radius R <= sqrt(delta) map to spheres of radius alpha(R^2) R
  Rng rng(13);
  double delta = field->delta_r();
  for (int i = 0; i < 1000; ++i) {
    double R = std::sqrt(delta) * rng.next_double();
    Vec x = rng.unit_vector(3) * R;
    Vec img = g->eval_lift(x);
    double a = field->alpha(R * R);
    CHECK(a <= 1.0 - R * R + 1e-15);
    CHECK(img.norm() == doctest::Approx(a * R).epsilon(1e-10));
  }
}

TEST_CASE("contracting center: max-norm operator contraction everywhere") {
  std::vector<double> eigs = {0.3, 0.4, 0.5};
  auto g = contracting_center_kd(eigs, 0.9, 0.2, 1e-14);
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    Vec x(3);
    for (int j = 0; j < 3; ++j) x[j] = rng.uniform(-0.5, 0.5);
    Mat J = g->jacobian(x);
    double opinf = 0.0;
    for (int r = 0; r < 3; ++r) opinf = std::max(opinf, J.row(r).cwiseAbs().sum());
    CHECK(opinf < 1.0);
  }
}

TEST_CASE("contracting center: linear outside") {
  std::vector<double> eigs = {0.3, 0.4, 0.5};
  auto g = contracting_center_kd(eigs, 0.9, 0.2, 1e-14);
  Mat A = g->linear_matrix();
  Rng rng(19);
  for (int i = 0; i < 200; ++i) {
    Vec x = rng.unit_vector(3) * rng.uniform(0.2, 1.5);
    CHECK((g->eval_lift(x) - A * x).norm() <= 1e-14);
  }
  CHECK_THROWS_AS(contracting_center_kd(eigs, 0.9, 0.2, 0.005),
                  InfeasiblePlateau);
}

TEST_CASE("general_da: zero surgeries reproduces the linear map") {
  auto A = compute_splitting(t4_matrix(), 0.25, 4.0);
  auto f = general_da(A, {});
  Rng rng(23);
  Mat Ad = A.Ad();
  for (int i = 0; i < 100; ++i) {
    Vec x(4);
    for (int j = 0; j < 4; ++j) x[j] = rng.next_double();
    CHECK((f->eval_lift(x) - Ad * x).norm() <= 1e-12);
    CHECK((f->jacobian(x) - Ad).norm() == 0.0);
  }
}

TEST_CASE("general_da: three disjoint surgeries, linear outside") {
  auto f = t4_three_surgeries();
  Rng rng(29);
  Mat A = f->linear_matrix();
  int outside = 0;
  for (int i = 0; i < 1000; ++i) {
    Vec x(4);
    for (int j = 0; j < 4; ++j) x[j] = rng.next_double();
    bool in_support = false;
    for (const auto& b : f->supports())
      if (torus_distance(x, b.center) < b.radius) in_support = true;
    if (in_support) continue;
    ++outside;
    CHECK((f->eval_lift(x) - A * x).norm() <= 1e-12);
  }
  CHECK(outside > 900);
}

TEST_CASE("general_da: equivariance of the lift") {
  auto f = t4_three_surgeries();
  Rng rng(31);
  Mat A = f->linear_matrix();
  for (int i = 0; i < 100; ++i) {
    Vec x(4), m(4);
    for (int j = 0; j < 4; ++j) {
      x[j] = rng.uniform(-1.0, 2.0);
      m[j] = std::floor(rng.uniform(-3.0, 4.0));
    }
    Vec lhs = f->eval_lift(x + m);
    Vec rhs = f->eval_lift(x) + A * m;
    CHECK((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
  }
}

TEST_CASE("general_da: center derivative at surgery points is the identity") {
  auto f = t4_three_surgeries();
  auto A = compute_splitting(t4_matrix(), 0.25, 4.0);
  Eigen::MatrixXd C = A.center_frame();
  auto fps = fixed_points(t4_matrix(), 1);
  for (int i = 1; i <= 3; ++i) {
    Mat J = f->jacobian(fps[i]);
    Eigen::MatrixXd Jc = C.transpose() * J * C;
    CHECK((Jc - Eigen::MatrixXd::Identity(2, 2)).norm() <= 1e-12);
  }
}

TEST_CASE("general_da: overlapping supports rejected") {
  auto A = compute_splitting(t4_matrix(), 0.25, 4.0);
  auto fps = fixed_points(t4_matrix(), 1);
  std::vector<SurgeryChoice> chs;
  for (int i = 1; i <= 2; ++i) {
    PlanarMixChoice pm;
    pm.point = fps[i];
    pm.rho = 0.02;
    pm.l = 0.02;
    pm.r1 = 0.08;
    pm.w_out = 0.08;  // radius sqrt(0.16) = 0.4 > half the pairwise distance
    chs.push_back(pm);
  }
  CHECK_THROWS_AS(general_da(A, chs), OverlappingSupports);
}

TEST_CASE("general_da: jacobian vs finite differences near supports") {
  auto f = t4_three_surgeries();
  auto fps = fixed_points(t4_matrix(), 1);
  Rng rng(37);
  double worst = 0.0;
  for (int i = 0; i < 300; ++i) {
    Vec x = project_point(Vec(fps[1 + (i % 3)] + rng.in_ball(4, 0.09)));
    Mat J = f->jacobian(x);
    Mat F(4, 4);
    double h = 1e-6;
    for (int j = 0; j < 4; ++j) {
      Vec xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      F.col(j) = (f->eval_lift(xp) - f->eval_lift(xm)) / (2.0 * h);
    }
    worst = std::max(worst, (J - F).norm() / std::max(1.0, J.norm()));
  }
  CHECK(worst <= 1e-4);  // includes points straddling profile kinks
}

TEST_CASE("fixed point index: linear 2x2") {
  auto A = compute_splitting(fib2(), 0.2, 5.0);
  auto f = make_linear_map(A);
  auto idx = fixed_point_index(*f, Vec::Zero(2));
  CHECK(idx.index == 1);
  CHECK_FALSE(idx.warning);
}

TEST_CASE("fixed point index: pre-surgery T4 points have unit center moduli") {
  auto f = t4_three_surgeries();
  auto fps = fixed_points(t4_matrix(), 1);
  auto idx = fixed_point_index(*f, fps[1]);
  CHECK(idx.warning);
  int on_unit = 0;
  for (auto ev : idx.eigenvalues)
    if (std::abs(std::abs(ev) - 1.0) < 1e-9) ++on_unit;
  CHECK(on_unit == 2);
  CHECK_THROWS_AS(fixed_point_index(*f, v4(0.11, 0.22, 0.33, 0.44)),
                  NotAFixedPoint);
}

TEST_CASE("franks surgery: no-op when B equals the base jacobian") {
  // affine base within the ball, so the blended target coincides with the map
  auto A = compute_splitting(t4_matrix(), 0.25, 4.0);
  auto f = make_linear_map(A);
  SurgerySpec spec;
  spec.point = Vec::Zero(4);
  spec.B = f->jacobian(Vec::Zero(4));
  spec.radius = 0.01;
  spec.eta = 1e-6;
  auto g = franks_surgery(f, spec);
  CHECK(g->measured_c1() <= 1e-9);
  Rng rng(41);
  for (int i = 0; i < 100; ++i) {
    Vec x(4);
    for (int j = 0; j < 4; ++j) x[j] = rng.next_double();
    CHECK((g->eval_lift(x) - f->eval_lift(x)).norm() <= 1e-12);
  }
}

TEST_CASE("franks surgery: B0/B1/B2 index bookkeeping") {
  auto f = t4_three_surgeries();
  auto Asp = compute_splitting(t4_matrix(), 0.25, 4.0);
  auto fps = fixed_points(t4_matrix(), 1);
  Eigen::MatrixXd Q = Asp.full_frame();  // [ss ws wu uu]
  double lss = Asp.moduli[0], muu = Asp.moduli[3];
  double eta = 0.02;

  auto in_frame = [&](double m00, double m01, double m10, double m11) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(4, 4);
    D(0, 0) = lss;
    D(3, 3) = muu;
    D(1, 1) = m00;
    D(1, 2) = m01;
    D(2, 1) = m10;
    D(2, 2) = m11;
    return Mat(Q * D * Q.transpose());
  };

  // B0: both center directions contracting -> index 3
  SurgerySpec s0{fps[1], in_frame(1.0 - eta, 0.0, 0.0, 1.0 - eta), 0.012,
                 0.25};
  auto g0 = franks_surgery(f, s0);
  auto i0 = fixed_point_index(*g0, fps[1]);
  CHECK(i0.index == 3);

  // B1: both center directions expanding -> index 1 = dim E^ss
  SurgerySpec s1{fps[2], in_frame(1.0 + eta, 0.0, 0.0, 1.0 + eta), 0.012,
                 0.25};
  auto g1 = franks_surgery(g0, s1);
  auto i1 = fixed_point_index(*g1, fps[2]);
  CHECK(i1.index == 1);

  // B2: rotation block a +- ib in the center
  double a = 1.0 - eta / 2.0, b = eta / 2.0;
  SurgerySpec s2{fps[3], in_frame(a, b, -b, a), 0.012, 0.25};
  auto g2 = franks_surgery(g1, s2);
  auto i2 = fixed_point_index(*g2, fps[3]);
  CHECK(i2.complex_center);
  bool found = false;
  for (auto ev : i2.eigenvalues)
    if (std::abs(ev - std::complex<double>(a, b)) < 1e-9) found = true;
  CHECK(found);

  // untouched fixed points keep the linear index 2
  auto i3 = fixed_point_index(*g2, fps[4]);
  CHECK(i3.index == 2);

  // surgeries are local: g2 = f outside the three balls
  Rng rng(43);
  int outside = 0;
  for (int i = 0; i < 1000; ++i) {
    Vec x(4);
    for (int j = 0; j < 4; ++j) x[j] = rng.next_double();
    bool in_ball = false;
    for (int p = 1; p <= 3; ++p)
      if (torus_distance(x, fps[p]) < 0.012) in_ball = true;
    if (in_ball) continue;
    ++outside;
    CHECK((g2->eval_lift(x) - f->eval_lift(x)).norm() <= 1e-12);
  }
  CHECK(outside > 950);
}

TEST_CASE("franks surgery: oversized target rejected") {
  auto f = t4_three_surgeries();
  auto fps = fixed_points(t4_matrix(), 1);
  SurgerySpec spec;
  spec.point = fps[1];
  spec.B = f->jacobian(fps[1]) + 0.5 * Mat::Identity(4, 4);
  spec.radius = 0.01;
  spec.eta = 0.05;  // measured C1 will exceed 1.1 * eta
  CHECK_THROWS_AS(franks_surgery(f, spec), SurgeryTooLarge);
}

TEST_CASE("newton inverse") {
  auto f = t4_three_surgeries();
  Rng rng(47);
  for (int i = 0; i < 50; ++i) {
    Vec x(4);
    for (int j = 0; j < 4; ++j) x[j] = rng.next_double();
    Vec y = f->eval_lift(x);
    Vec back = newton_inverse_lift(*f, y);
    CHECK((back - x).norm() <= 1e-10);
  }
}

TEST_CASE("iterated map: jacobian chain and lattice powers") {
  auto A = compute_splitting(fib2(), 0.2, 5.0);
  auto f = make_linear_map(A);
  IteratedMap f2(f, 2);
  Vec x = v2(0.3, 0.7);
  CHECK((f2.eval_lift(x) - f->eval_lift(f->eval_lift(x))).norm() <= 1e-12);
  REQUIRE(f2.lattice() != nullptr);
  CHECK(f2.lattice()->moduli[1] ==
        doctest::Approx(A.moduli[1] * A.moduli[1]).epsilon(1e-12));
}

TEST_CASE("measured ph bounds of the T4 example") {
  auto f = t4_three_surgeries();
  PHBounds b = measure_ph_bounds(*f, 12);
  CHECK(b.lambda_s == doctest::Approx(0.184).epsilon(1e-2));
  CHECK(b.lambda_u == doctest::Approx(5.434).epsilon(1e-2));
  // The trapezoid bumps push pointwise center rates outside the strong
  // moduli; domination here is a cone property, not an entry bound, so the
  // measured interval is reported but not required to nest.
  CHECK(b.lambda_c_minus > 0.0);
  CHECK(b.lambda_c_plus < 6.0);

  auto Alin = make_linear_map(*f->lattice());
  PHBounds bl = measure_ph_bounds(*Alin, 8);
  CHECK(bl.valid());
  CHECK(bl.lambda_c_minus == doctest::Approx(0.327).epsilon(1e-2));
  CHECK(bl.lambda_c_plus == doctest::Approx(3.055).epsilon(1e-2));
}
