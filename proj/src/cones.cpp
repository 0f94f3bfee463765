#include "saddlelab/cones.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace saddlelab {

namespace {

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

double polyline_arclength(const std::vector<Vec>& nodes) {
  double s = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i)
    s += (nodes[i] - nodes[i - 1]).norm();
  return s;
}

std::vector<double> cumulative_arclength(const std::vector<Vec>& nodes) {
  std::vector<double> s(nodes.size(), 0.0);
  for (std::size_t i = 1; i < nodes.size(); ++i)
    s[i] = s[i - 1] + (nodes[i] - nodes[i - 1]).norm();
  return s;
}

Vec point_at_arclength(const std::vector<Vec>& nodes,
                       const std::vector<double>& s, double t) {
  if (t <= 0.0) return nodes.front();
  if (t >= s.back()) return nodes.back();
  auto it = std::upper_bound(s.begin(), s.end(), t);
  std::size_t i = static_cast<std::size_t>(it - s.begin());
  double seg = s[i] - s[i - 1];
  double a = seg > 0.0 ? (t - s[i - 1]) / seg : 0.0;
  return nodes[i - 1] + a * (nodes[i] - nodes[i - 1]);
}

// Evenly resample keeping the point at arclength s_center as a node; trims to
// at most `half` of arclength on each side of it.
void resample_centered(std::vector<Vec>& nodes, double s_center, double half,
                       double h, int* center_index) {
  auto s = cumulative_arclength(nodes);
  double lo = std::max(0.0, s_center - half);
  double hi = std::min(s.back(), s_center + half);
  int kl = static_cast<int>(std::floor((s_center - lo) / h + 1e-12));
  int kr = static_cast<int>(std::floor((hi - s_center) / h + 1e-12));
  std::vector<Vec> out;
  out.reserve(kl + kr + 1);
  for (int k = -kl; k <= kr; ++k)
    out.push_back(point_at_arclength(nodes, s, s_center + k * h));
  if (center_index) *center_index = kl;
  nodes = std::move(out);
}

void resample_uniform(std::vector<Vec>& nodes, double h) {
  auto s = cumulative_arclength(nodes);
  int count = std::max(2, static_cast<int>(std::ceil(s.back() / h)) + 1);
  std::vector<Vec> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k)
    out.push_back(point_at_arclength(nodes, s, s.back() * k / (count - 1)));
  nodes = std::move(out);
}

// Shift all nodes by an integer vector so that the middle node lands in the
// fundamental domain.
void rechart(std::vector<Vec>& nodes) {
  if (nodes.empty()) return;
  const Vec& c = nodes[nodes.size() / 2];
  Vec shift(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) shift[i] = std::floor(c[i]);
  if (shift.cwiseAbs().maxCoeff() == 0.0) return;
  for (auto& nd : nodes) nd -= shift;
}

Vec project_onto_polyline(const std::vector<Vec>& nodes, const Vec& p) {
  double best = 1e300;
  Vec best_pt = nodes.front();
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const Vec& a = nodes[i - 1];
    Vec d = nodes[i] - a;
    double len2 = d.squaredNorm();
    double t = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    Vec q = a + t * d;
    double dist = (p - q).squaredNorm();
    if (dist < best) {
      best = dist;
      best_pt = q;
    }
  }
  return best_pt;
}

double min_ball_clearance(const Vec& torus_pt,
                          const std::vector<SupportBall>& balls) {
  double c = 1e300;
  for (const auto& b : balls)
    c = std::min(c, torus_distance(torus_pt, b.center) - b.radius);
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// ConeSpec

ConeSpec::ConeSpec(Mat E, Mat F, double theta)
    : E_(std::move(E)), F_(std::move(F)), theta_(theta) {
  if (theta_ <= 0.0) throw BadGeometry("cone size theta must be positive");
  if (F_.cols() < 1) throw BadGeometry("cone needs a nonempty F block");
  const int n = static_cast<int>(F_.rows());
  const int d = static_cast<int>(E_.cols() + F_.cols());
  if (d > n) throw BadGeometry("cone frames exceed the ambient dimension");
  Eigen::MatrixXd B(n, d);
  if (E_.cols() > 0) B << Eigen::MatrixXd(E_), Eigen::MatrixXd(F_);
  else B = F_;
  // pseudo-inverse through the normal equations; frames are well-conditioned
  Eigen::MatrixXd G = B.transpose() * B;
  solver_ = Mat(G.ldlt().solve(B.transpose()));
}

double ConeSpec::quadratic_form(const Vec& v) const {
  if (v.norm() == 0.0) throw ZeroVector("cone membership of the zero vector");
  Vec c = solver_ * v;
  double e2 = 0.0, f2 = 0.0;
  for (Eigen::Index i = 0; i < E_.cols(); ++i) e2 += c[i] * c[i];
  for (Eigen::Index i = E_.cols(); i < c.size(); ++i) f2 += c[i] * c[i];
  double b = e2 - theta_ * theta_ * f2;
  return b / c.squaredNorm();
}

double ConeSpec::margin(const Vec& v) const { return -quadratic_form(v); }

double ConeSpec::cone_max_norm(const Vec& v) const {
  Vec c = solver_ * v;
  return c.cwiseAbs().maxCoeff();
}

Vec ConeSpec::sample(Rng& rng, double shell) const {
  const int dE = static_cast<int>(E_.cols());
  const int dF = static_cast<int>(F_.cols());
  Vec b = rng.unit_vector(dF);
  Vec v = F_ * b;
  if (dE > 0 && shell > 0.0) {
    Vec a = rng.unit_vector(dE) * (shell * theta_);
    v += E_ * a;
  }
  return v / v.norm();
}

ConeField constant_cone_field(const ConeSpec& cone) {
  return [cone](const Vec&) { return cone; };
}

// ---------------------------------------------------------------------------
// Orbit certification

nlohmann::json OrbitConeCertificate::to_json() const {
  nlohmann::json j;
  j["pass"] = pass;
  j["direction"] = forward ? "forward" : "backward";
  j["horizon"] = horizon;
  j["lambda0"] = lambda0;
  j["C"] = C;
  j["invariance_margin"] = invariance_margin;
  j["expansion_margin"] = expansion_margin;
  j["min_step_factor"] = min_step_factor;
  nlohmann::json w = nlohmann::json::array();
  for (const auto& x : witnesses) {
    nlohmann::json e;
    e["step"] = x.step;
    e["vector"] = vec_json(x.vector);
    e["margin"] = x.margin;
    e["what"] = x.what;
    w.push_back(e);
  }
  j["witnesses"] = w;
  return j;
}

namespace {

OrbitConeCertificate certify_along(const TorusMap& map,
                                   const std::vector<Vec>& orbit, bool forward,
                                   const ConeField& field, double lambda0,
                                   double C, const ConeCertifyOptions& opt) {
  const int N = static_cast<int>(orbit.size()) - 1;
  OrbitConeCertificate cert;
  cert.forward = forward;
  cert.horizon = N;
  cert.lambda0 = lambda0;
  cert.C = C;
  cert.orbit = orbit;
  cert.invariance_margin = 1e300;
  cert.expansion_margin = 1e300;
  cert.min_step_factor = 1e300;

  std::vector<ConeSpec> cones;
  cones.reserve(N + 1);
  for (int l = 0; l <= N; ++l) cones.push_back(field(orbit[l]));

  // J[l] maps tangent vectors at orbit[l] to vectors at orbit[l+1].
  std::vector<Mat> J(N);
  for (int l = 0; l < N; ++l) {
    if (forward) {
      J[l] = map.jacobian(orbit[l]);
    } else {
      Mat Jn = map.jacobian(orbit[l + 1]);
      J[l] = Mat(Eigen::MatrixXd(Jn).inverse());
    }
  }

  auto note_witness = [&](int step, const Vec& v, double m, const char* what) {
    if (static_cast<int>(cert.witnesses.size()) < opt.max_witnesses)
      cert.witnesses.push_back({step, v, m, what});
  };

  const double shells[3] = {1.0, 0.5, 0.0};
  for (int l = 0; l < N; ++l) {
    Rng rng = Rng::stream(opt.seed, 1000003ULL * l);
    for (int s = 0; s < opt.samples_per_step; ++s) {
      Vec v = cones[l].sample(rng, shells[s % 3]);
      double nv = cones[l].cone_max_norm(v);

      Vec w = J[l] * v;
      double im = cones[l + 1].margin(w);
      cert.invariance_margin = std::min(cert.invariance_margin, im);
      if (im < -opt.tol) note_witness(l, v, im, "invariance");

      double factor = cones[l + 1].cone_max_norm(w) / nv;
      cert.min_step_factor = std::min(cert.min_step_factor, factor);
      double em = factor / lambda0 - 1.0;
      if (!opt.exhaustive_pairs) {
        cert.expansion_margin = std::min(cert.expansion_margin, em);
        if (em < -opt.tol) note_witness(l, v, em, "expansion");
      } else {
        Vec u = w;
        for (int n = 1; l + n <= N; ++n) {
          double ratio = cones[l + n].cone_max_norm(u) /
                         (C * std::pow(lambda0, n) * nv);
          double m = ratio - 1.0;
          cert.expansion_margin = std::min(cert.expansion_margin, m);
          if (m < -opt.tol) note_witness(l, v, m, "expansion");
          if (l + n < N) u = Vec(J[l + n] * u);
        }
      }
    }
  }
  if (N == 0) {
    cert.invariance_margin = 0.0;
    cert.expansion_margin = 0.0;
    cert.min_step_factor = lambda0;
  }
  cert.pass = cert.invariance_margin >= -opt.tol &&
              cert.expansion_margin >= -opt.tol;
  return cert;
}

std::vector<Vec> forward_orbit(const TorusMap& map, const Vec& x0, int N) {
  std::vector<Vec> orbit(N + 1);
  orbit[0] = project_point(x0);
  for (int l = 0; l < N; ++l) orbit[l + 1] = map.eval(orbit[l]);
  return orbit;
}

std::vector<Vec> backward_orbit(const TorusMap& map, const Vec& x0, int N) {
  std::vector<Vec> orbit(N + 1);
  orbit[0] = project_point(x0);
  for (int l = 0; l < N; ++l)
    orbit[l + 1] = newton_inverse_torus(map, orbit[l]);
  return orbit;
}

}  // namespace

OrbitConeCertificate certify_forward_cones(const TorusMap& map, const Vec& x0,
                                           const ConeField& field, int horizon,
                                           double lambda0, double C,
                                           const ConeCertifyOptions& opt) {
  return certify_along(map, forward_orbit(map, x0, horizon), true, field,
                       lambda0, C, opt);
}

OrbitConeCertificate certify_backward_cones(const TorusMap& map, const Vec& x0,
                                            const ConeField& field,
                                            int horizon, double lambda0,
                                            double C,
                                            const ConeCertifyOptions& opt) {
  return certify_along(map, backward_orbit(map, x0, horizon), false, field,
                       lambda0, C, opt);
}

// ---------------------------------------------------------------------------
// Strong leaves

namespace {

struct SideFrames {
  Mat F;  // strong direction(s)
  Mat E;  // complement
  double rate;  // per-step strong expansion in the stepping direction
};

SideFrames side_frames(const ToralAutomorphism& lat, int side) {
  const int n = lat.n();
  Eigen::MatrixXd F, E;
  double rate = 0.0;
  if (side > 0) {
    bool strong = lat.dims[3] > 0;
    F = strong ? lat.frame_uu : lat.frame_wu;
    int nf = static_cast<int>(F.cols());
    E.resize(n, n - nf);
    E << lat.frame_ss, lat.frame_ws, (strong ? lat.frame_wu : lat.frame_uu);
    rate = strong ? lat.moduli[n - lat.dims[3]] : lat.moduli[n - lat.dims[3] - lat.dims[2]];
  } else {
    bool strong = lat.dims[0] > 0;
    F = strong ? lat.frame_ss : lat.frame_ws;
    int nf = static_cast<int>(F.cols());
    E.resize(n, n - nf);
    E << (strong ? lat.frame_ws : lat.frame_ss), lat.frame_wu, lat.frame_uu;
    rate = 1.0 / (strong ? lat.moduli[lat.dims[0] - 1]
                         : lat.moduli[lat.dims[0] + lat.dims[1] - 1]);
  }
  return {Mat(F), Mat(E), rate};
}

}  // namespace

StrongSegment grow_strong_leaf(const TorusMap& map, const Vec& x, int side,
                               double L, double tol, const LeafOptions& opt) {
  const ToralAutomorphism* lat = map.lattice();
  if (!lat)
    throw StrongConesUncertified("leaf growth needs a torus lattice map");
  SideFrames sf = side_frames(*lat, side);
  if (sf.F.cols() != 1)
    throw UnsupportedDimension("leaf growth supports 1-dimensional strong bundles");
  ConeSpec strong_cone(sf.E, sf.F, opt.theta_strong);

  if (opt.precheck_cones) {
    Rng rng = Rng::stream(0xC0FEULL, 5);
    double worst = 1e300;
    for (int i = 0; i < 128; ++i) {
      Vec y(map.n());
      for (int j = 0; j < map.n(); ++j) y[j] = rng.next_double();
      Mat J = map.jacobian(y);
      if (side < 0) J = Mat(Eigen::MatrixXd(J).inverse());
      for (double shell : {1.0, 0.5}) {
        Vec v = strong_cone.sample(rng, shell);
        worst = std::min(worst, strong_cone.margin(Vec(J * v)));
      }
    }
    if (worst < -opt.cone_tol)
      throw StrongConesUncertified(
          "strong cone field is not invariant on samples");
  }

  const double h = opt.spacing > 0.0 ? opt.spacing : L / 200.0;

  // Seed through the settle-length backward chain so the final segment passes
  // through x itself.
  Vec c = project_point(x);
  for (int i = 0; i < opt.settle_iterations; ++i)
    c = (side > 0) ? newton_inverse_torus(map, c) : map.eval(c);

  int count = std::max(3, static_cast<int>(std::round(L / h)) | 1);
  std::vector<Vec> nodes(count);
  int center = count / 2;
  for (int i = 0; i < count; ++i)
    nodes[i] = c + ((i - center) * (L / (count - 1))) * Vec(sf.F.col(0));

  for (int it = 0; it < opt.settle_iterations; ++it) {
    std::vector<Vec> mapped(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
      mapped[i] = (side > 0) ? map.eval_lift(nodes[i])
                             : newton_inverse_lift(map, nodes[i], tol);
    rechart(mapped);
    auto s = cumulative_arclength(mapped);
    resample_centered(mapped, s[center], L / 2.0, h, &center);
    nodes = std::move(mapped);
  }

  StrongSegment seg;
  seg.side = side;
  seg.polyline = std::move(nodes);
  seg.center_index = center;
  seg.arc_length = polyline_arclength(seg.polyline);
  seg.tangent_cone_margin = 1e300;
  for (std::size_t i = 1; i < seg.polyline.size(); ++i) {
    Vec d = seg.polyline[i] - seg.polyline[i - 1];
    if (d.norm() == 0.0) continue;
    seg.tangent_cone_margin =
        std::min(seg.tangent_cone_margin, strong_cone.margin(d));
  }
  if (seg.tangent_cone_margin < -opt.cone_tol)
    throw ConeEscape("leaf tangent left the strong cone");
  return seg;
}

// ---------------------------------------------------------------------------
// Avoidance search

nlohmann::json AvoidanceResult::to_json() const {
  nlohmann::json j;
  j["point"] = vec_json(point);
  j["max_defect"] = max_defect;
  j["min_clearance"] = min_clearance;
  j["iterate_normalization"] = iterate_normalization;
  j["cone_certificate"] = cone_cert.to_json();
  j["orbit_length"] = orbit.size();
  return j;
}

bool verify_avoidance_orbit(const TorusMap& map, int side,
                            const std::vector<Vec>& orbit,
                            const std::vector<SupportBall>& avoid,
                            double defect_tol, double* max_defect,
                            double* min_clearance) {
  double md = 0.0, mc = 1e300;
  for (std::size_t j = 0; j < orbit.size(); ++j) {
    mc = std::min(mc, min_ball_clearance(orbit[j], avoid));
    if (j + 1 < orbit.size()) {
      Vec img = (side > 0) ? map.eval(orbit[j])
                           : newton_inverse_torus(map, orbit[j]);
      md = std::max(md, torus_distance(img, orbit[j + 1]));
    }
  }
  if (max_defect) *max_defect = md;
  if (min_clearance) *min_clearance = mc;
  return md <= defect_tol && mc > 0.0;
}

AvoidanceResult avoidance_search(const TorusMap& map, const Vec& x, int side,
                                 double L,
                                 const std::vector<SupportBall>& avoid,
                                 int horizon, const AvoidanceOptions& opt) {
  for (const auto& b : avoid)
    if (b.radius >= 0.25)
      throw BadGeometry("avoidance needs ball radii below 1/4");
  const ToralAutomorphism* lat = map.lattice();
  if (!lat) throw StrongConesUncertified("avoidance needs a torus lattice map");

  SideFrames sf = side_frames(*lat, side);
  if (sf.rate <= 1.02)
    throw StrongConesUncertified("strong rate too close to 1");
  int k_it = 1;
  while (std::pow(sf.rate, k_it) <= 4.0) ++k_it;

  StrongSegment leaf = grow_strong_leaf(map, x, side, std::max(L, 0.3),
                                        1e-10, opt.leaf);
  const double h = opt.leaf.spacing > 0.0 ? opt.leaf.spacing : L / 200.0;

  auto select_window = [&](const std::vector<Vec>& cur, int step)
      -> std::vector<Vec> {
    auto s = cumulative_arclength(cur);
    std::vector<double> clear(cur.size());
    for (std::size_t i = 0; i < cur.size(); ++i)
      clear[i] = min_ball_clearance(project_point(cur[i]), avoid);
    int best_a = -1, best_b = -1;
    double best_score = -1e300;
    std::size_t b = 0;
    for (std::size_t a = 0; a < cur.size(); ++a) {
      if (b < a) b = a;
      while (b + 1 < cur.size() && s[b] - s[a] < opt.window_length) ++b;
      if (s[b] - s[a] < opt.window_length) break;
      double worst = 1e300;
      for (std::size_t i = a; i <= b; ++i) worst = std::min(worst, clear[i]);
      if (worst <= opt.clearance_margin) continue;
      double score = clear[(a + b) / 2];
      if (score > best_score) {
        best_score = score;
        best_a = static_cast<int>(a);
        best_b = static_cast<int>(b);
      }
    }
    if (best_a < 0)
      throw SearchFailed("no admissible sub-segment clear of the balls", step);
    std::vector<Vec> w(cur.begin() + best_a, cur.begin() + best_b + 1);
    return w;
  };

  std::vector<std::vector<Vec>> windows;
  windows.reserve(horizon + 1);
  std::vector<Vec> cur = leaf.polyline;
  for (int step = 0; step <= horizon; ++step) {
    windows.push_back(select_window(cur, step));
    if (step == horizon) break;
    std::vector<Vec> mapped(windows.back().size());
    for (std::size_t i = 0; i < mapped.size(); ++i)
      mapped[i] = (side > 0)
                      ? map.eval_lift(windows.back()[i])
                      : newton_inverse_lift(map, windows.back()[i], 1e-12);
    rechart(mapped);
    resample_uniform(mapped, h);
    cur = std::move(mapped);
  }

  // Backward assembly with projection onto the stage windows: transverse
  // error is re-anchored at every step, tangential error contracts.
  std::vector<Vec> orbit(horizon + 1);
  Vec z = windows[horizon][windows[horizon].size() / 2];
  orbit[horizon] = project_point(z);
  for (int j = horizon - 1; j >= 0; --j) {
    Vec back = (side > 0) ? newton_inverse_lift(map, z, 1e-12)
                          : map.eval_lift(z);
    Vec rep = lift_near(project_point(back), windows[j][windows[j].size() / 2]);
    z = project_onto_polyline(windows[j], rep);
    orbit[j] = project_point(z);
  }

  AvoidanceResult res;
  res.point = orbit[0];
  res.orbit = orbit;
  res.iterate_normalization = k_it;
  verify_avoidance_orbit(map, side, orbit, avoid, 1e300, &res.max_defect,
                         &res.min_clearance);

  // d-center cone certificate along the stored pseudo-orbit; the orbit clears
  // every support ball, so jacobians along it equal the linear part.
  Mat coneF = (side > 0) ? Mat(lat->frame_wu) : Mat(lat->frame_ws);
  Mat coneE = (side > 0) ? Mat(lat->frame_ws) : Mat(lat->frame_wu);
  double weak_rate;
  {
    int n = lat->n();
    if (side > 0)
      weak_rate = lat->moduli[lat->dims[0] + lat->dims[1]];
    else
      weak_rate = 1.0 / lat->moduli[lat->dims[0] + lat->dims[1] - 1];
    (void)n;
  }
  double lambda0 = opt.lambda0 > 0.0 ? opt.lambda0 : weak_rate * 0.98;
  ConeCertifyOptions copt;
  copt.samples_per_step = opt.cone_samples;
  copt.seed = opt.seed;
  res.cone_cert = certify_along(map, orbit, side > 0,
                                constant_cone_field(ConeSpec(coneE, coneF, 1.0)),
                                lambda0, opt.C, copt);
  return res;
}

// ---------------------------------------------------------------------------
// SH-Saddle aggregation

nlohmann::json SaddleReport::to_json() const {
  nlohmann::json j;
  j["pass"] = pass;
  j["d1"] = d1;
  j["d2"] = d2;
  j["L"] = L;
  j["lambda0"] = lambda0;
  j["C"] = C;
  j["theta"] = theta;
  j["horizon"] = horizon;
  j["grid_per_axis"] = grid_per_axis;
  j["min_clearance"] = min_clearance;
  j["min_margin"] = min_margin;
  int fails = 0;
  nlohmann::json failures = nlohmann::json::array();
  for (std::size_t i = 0; i < forward.size(); ++i) {
    for (const auto* o : {&forward[i], &backward[i]}) {
      if (!o->ok) {
        ++fails;
        if (failures.size() < 32) {
          nlohmann::json f;
          f["grid_index"] = i;
          f["side"] = (o == &forward[i]) ? "uu" : "ss";
          f["error"] = o->error;
          failures.push_back(f);
        }
      }
    }
  }
  j["failures"] = fails;
  j["failure_witnesses"] = failures;
  return j;
}

std::string SaddleReport::margins_csv() const {
  std::ostringstream os;
  os << "grid_index,fwd_ok,fwd_clearance,fwd_margin,bwd_ok,bwd_clearance,bwd_margin\n";
  for (std::size_t i = 0; i < forward.size(); ++i) {
    os << i << ',' << forward[i].ok << ',' << forward[i].clearance << ','
       << forward[i].cone_margin << ',' << backward[i].ok << ','
       << backward[i].clearance << ',' << backward[i].cone_margin << '\n';
  }
  return os.str();
}

SaddleReport sh_saddle_certify(const TorusMap& map, int grid_per_axis,
                               double L, double lambda0, double C, int horizon,
                               int jobs, const AvoidanceOptions& opt_in) {
  const ToralAutomorphism* lat = map.lattice();
  if (!lat) throw StrongConesUncertified("certification needs a lattice map");
  const int n = map.n();
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(grid_per_axis);

  SaddleReport rep;
  rep.d1 = lat->dims[1];
  rep.d2 = lat->dims[2];
  rep.L = L;
  rep.lambda0 = lambda0;
  rep.C = C;
  rep.horizon = horizon;
  rep.grid_per_axis = grid_per_axis;
  rep.forward.resize(total);
  rep.backward.resize(total);

  AvoidanceOptions opt = opt_in;
  opt.lambda0 = lambda0;
  opt.C = C;

  parallel_for(jobs, total, [&](std::size_t idx) {
    Vec x(n);
    std::size_t t = idx;
    for (int i = 0; i < n; ++i) {
      x[i] = static_cast<double>(t % grid_per_axis) / grid_per_axis;
      t /= grid_per_axis;
    }
    for (int side : {+1, -1}) {
      SaddlePointOutcome& out =
          (side > 0) ? rep.forward[idx] : rep.backward[idx];
      try {
        AvoidanceOptions aopt = opt;
        aopt.seed = opt.seed + idx;
        AvoidanceResult r =
            avoidance_search(map, x, side, L, map.supports(), horizon, aopt);
        out.clearance = r.min_clearance;
        out.cone_margin = std::min(r.cone_cert.invariance_margin,
                                   r.cone_cert.expansion_margin);
        out.defect = r.max_defect;
        out.ok = r.cone_cert.pass && r.min_clearance > 0.0 &&
                 r.max_defect <= 1e-8;
        if (!out.ok) out.error = "certificate margins not met";
      } catch (const Error& e) {
        out.ok = false;
        out.error = e.what();
      }
    }
  });

  rep.min_clearance = 1e300;
  rep.min_margin = 1e300;
  rep.pass = true;
  for (std::size_t i = 0; i < total; ++i) {
    for (const auto* o : {&rep.forward[i], &rep.backward[i]}) {
      rep.pass = rep.pass && o->ok;
      if (o->ok) {
        rep.min_clearance = std::min(rep.min_clearance, o->clearance);
        rep.min_margin = std::min(rep.min_margin, o->cone_margin);
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Disk growth

DiskGrowthReport disk_growth_check(const TorusMap& map, const Vec& x,
                                   const Mat& tangent_frame, double diam0,
                                   double delta1, int max_steps,
                                   double lambda_rate) {
  const int d = static_cast<int>(tangent_frame.cols());
  if (d < 1 || d > 2) throw UnsupportedDimension("disk dimension must be 1 or 2");
  DiskGrowthReport rep;
  rep.geometric_bound =
      diam0 >= 2.0 * delta1
          ? 0
          : static_cast<int>(
                std::ceil(std::log(2.0 * delta1 / diam0) /
                          std::log(lambda_rate))) +
                2;
  if (diam0 >= 2.0 * delta1) {
    rep.steps = 0;
    rep.final_diameter = diam0;
    rep.measured_rate = 1.0;
    return rep;
  }

  // sampled disk as offsets from the base point
  std::vector<Vec> offs;
  if (d == 1) {
    for (int i = -8; i <= 8; ++i)
      offs.push_back((diam0 / 2.0) * (i / 8.0) * Vec(tangent_frame.col(0)));
  } else {
    for (int i = -4; i <= 4; ++i)
      for (int j = -4; j <= 4; ++j) {
        Vec t(2);
        t << i / 4.0, j / 4.0;
        if (t.norm() > 1.0) continue;
        offs.push_back((diam0 / 2.0) * (tangent_frame * t));
      }
  }

  auto diameter = [&](const std::vector<Vec>& o) {
    double dm = 0.0;
    for (std::size_t i = 0; i < o.size(); ++i)
      for (std::size_t j = i + 1; j < o.size(); ++j)
        dm = std::max(dm, (o[i] - o[j]).norm());
    return dm;
  };

  Vec base = project_point(x);
  double prev = diam0;
  for (int step = 1; step <= max_steps; ++step) {
    Vec base_img = map.eval_lift(base);
    std::vector<Vec> next(offs.size());
    for (std::size_t i = 0; i < offs.size(); ++i)
      next[i] = map.eval_lift(Vec(base + offs[i])) - base_img;
    offs = std::move(next);
    base = project_point(base_img);
    double dm = diameter(offs);
    rep.measured_rate = dm / prev;
    prev = dm;
    if (dm >= 2.0 * delta1) {
      rep.steps = step;
      rep.final_diameter = dm;
      return rep;
    }
    if (dm < diam0 * std::pow(lambda_rate, step) / 2.0)
      throw GrowthStalled("disk diameter fell 2x behind the geometric bound");
  }
  throw GrowthStalled("diameter target not reached within max steps");
}

}  // namespace saddlelab
