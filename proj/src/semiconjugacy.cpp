#include "saddlelab/semiconjugacy.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace saddlelab {

namespace {

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

// Real spectral projector onto the span of eigendirections selected by pred.
Eigen::MatrixXd spectral_projector(const Eigen::MatrixXd& A,
                                   bool unstable_side) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::VectorXcd d(A.rows());
  for (int i = 0; i < A.rows(); ++i)
    d[i] = (std::abs(es.eigenvalues()[i]) > 1.0) == unstable_side ? 1.0 : 0.0;
  Eigen::MatrixXcd P = V * d.asDiagonal() * V.inverse();
  return P.real();
}

double phi_sup_measure(const TorusMap& map) {
  const int n = map.n();
  Mat A = map.linear_matrix();
  double sup = 0.0;
  // coarse grid plus dedicated samples inside each support ball
  int per_axis = 24;
  while (std::pow(per_axis, n) > 400000.0 && per_axis > 4) per_axis /= 2;
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(per_axis);
  Vec x(n);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t t = idx;
    for (int i = 0; i < n; ++i) {
      x[i] = static_cast<double>(t % per_axis) / per_axis;
      t /= per_axis;
    }
    sup = std::max(sup, (map.eval_lift(x) - A * x).norm());
  }
  Rng rng = Rng::stream(0xF00DULL, 3);
  for (const auto& ball : map.supports()) {
    for (int s = 0; s < 256; ++s) {
      Vec y = project_point(Vec(ball.center + rng.in_ball(n, ball.radius)));
      sup = std::max(sup, (map.eval_lift(y) - A * y).norm());
    }
  }
  return sup;
}

bool clear_of_supports(const Vec& x, const std::vector<SupportBall>& balls,
                       double safety) {
  for (const auto& b : balls)
    if (torus_distance(x, b.center) <= b.radius + safety) return false;
  return true;
}

}  // namespace

std::size_t ConjugacyField::node_count() const {
  std::size_t c = 1;
  for (int i = 0; i < n(); ++i) c *= static_cast<std::size_t>(G);
  return c;
}

std::size_t ConjugacyField::node_index(const std::vector<int>& coords) const {
  std::size_t idx = 0;
  for (int i = 0; i < n(); ++i)
    idx = idx * G + static_cast<std::size_t>(coords[i]);
  return idx;
}

Vec ConjugacyField::node_point(std::size_t idx) const {
  Vec x(n());
  for (int i = n() - 1; i >= 0; --i) {
    x[i] = static_cast<double>(idx % G) / G;
    idx /= G;
  }
  return x;
}

Vec ConjugacyField::node_value(std::size_t idx) const {
  Vec out(n());
  for (int i = 0; i < n(); ++i) out[i] = v[idx * n() + i];
  return out;
}

Vec ConjugacyField::v_at(const Vec& torus_point) const {
  const int dim = n();
  Vec out = Vec::Zero(dim);
  int base[8];
  double frac[8];
  for (int i = 0; i < dim; ++i) {
    double s = wrap01(torus_point[i]) * G;
    base[i] = static_cast<int>(std::floor(s));
    frac[i] = s - base[i];
    if (base[i] >= G) {
      base[i] = 0;
      frac[i] = 0.0;
    }
  }
  const int corners = 1 << dim;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::size_t idx = 0;
    for (int i = 0; i < dim; ++i) {
      int bit = (c >> i) & 1;
      w *= bit ? frac[i] : (1.0 - frac[i]);
      int coord = base[i] + bit;
      if (coord >= G) coord -= G;
      idx = idx * G + static_cast<std::size_t>(coord);
    }
    if (w == 0.0) continue;
    for (int i = 0; i < dim; ++i) out[i] += w * v[idx * dim + i];
  }
  return out;
}

Vec ConjugacyField::H(const Vec& lift_point) const {
  return lift_point + v_at(project_point(lift_point));
}

ConjugacyField compute_H(const TorusMap& map, int G, double tol,
                         const ComputeHOptions& opt) {
  const ToralAutomorphism* lat = map.lattice();
  if (!lat) throw Error("semiconjugacy needs an integer linear part");
  const int n = map.n();

  ConjugacyField field;
  field.aut = *lat;
  field.G = G;
  field.tol = tol;
  field.lift_offset = Eigen::VectorXd::Zero(n);
  field.phi_sup = phi_sup_measure(map);

  Eigen::MatrixXd Ad = lat->Ad();
  Eigen::MatrixXd Ainv = Ad.inverse();
  Eigen::MatrixXd Pu = spectral_projector(Ad, true);
  Eigen::MatrixXd Ps = spectral_projector(Ad, false);

  // truncation: || A^{-(j+1)} P_u || phi_sup / (1 - sigma) below tol/2, with
  // sigma the contraction of the smallest unstable / largest stable modulus
  double sigma_u = 1.0 / lat->moduli[lat->dims[0] + lat->dims[1]];
  double sigma_s = lat->moduli[lat->dims[0] + lat->dims[1] - 1];

  // A commutes with its spectral projectors, so re-projecting after each
  // multiplication keeps rounding noise from re-growing along the
  // complementary eigendirections.
  std::vector<Mat> Tu, Ts;
  if (field.phi_sup > 0.0) {
    Eigen::MatrixXd M = Pu * (Ainv * Pu);
    for (int j = 0;; ++j) {
      Tu.push_back(Mat(M));
      if (M.norm() * field.phi_sup / (1.0 - sigma_u) <= tol / 2.0) break;
      if (j >= opt.max_order)
        throw ToleranceUnreachable("unstable series exceeds the order cap");
      M = Pu * (Ainv * M);
    }
    M = Ps;  // A^{j-1} P_s at j = 1
    for (int j = 1;; ++j) {
      Ts.push_back(Mat(M));
      if (M.norm() * field.phi_sup * sigma_s / (1.0 - sigma_s) <= tol / 2.0)
        break;
      if (j >= opt.max_order)
        throw ToleranceUnreachable("stable series exceeds the order cap");
      M = Ps * (Ad * M);
    }
  }
  field.N_u = static_cast<int>(Tu.size());
  field.N_s = static_cast<int>(Ts.size());

  const std::size_t total = [&] {
    std::size_t c = 1;
    for (int i = 0; i < n; ++i) c *= static_cast<std::size_t>(G);
    return c;
  }();
  field.v.assign(total * n, 0.0);

  if (field.phi_sup == 0.0) {
    field.residual_series = 0.0;
    field.residual_interp = 0.0;
    field.sup_norm = 0.0;
    return field;
  }

  Mat A = map.linear_matrix();
  const double safety = Ainv.operatorNorm() * field.phi_sup;
  const auto& balls = map.supports();

  // Lipschitz scale of phi and conditioning constants for the orbit error
  // bound: orbit points are computed in floating point and their error is
  // amplified by the local Lipschitz constants of f (forward) and f^{-1}
  // (backward); the reported residual includes this bound so ill-conditioned
  // inversions cannot silently corrupt the field.
  double lip_phi = 0.0;
  {
    Rng rng = Rng::stream(0xBEEF, 9);
    for (const auto& ball : map.supports())
      for (int s = 0; s < 64; ++s) {
        Vec y = project_point(Vec(ball.center + rng.in_ball(n, ball.radius)));
        lip_phi = std::max(lip_phi, (map.jacobian(y) - A).norm());
      }
  }
  const double lin_fwd = Eigen::JacobiSVD<Eigen::MatrixXd>(Ad).singularValues()(0);
  const double lin_bwd =
      Eigen::JacobiSVD<Eigen::MatrixXd>(Ainv).singularValues()(0);
  auto local_lip = [&](const Vec& y, bool backward) -> double {
    if (clear_of_supports(y, balls, 0.0)) return backward ? lin_bwd : lin_fwd;
    Eigen::MatrixXd J = map.jacobian(y);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    double smax = svd.singularValues()(0);
    double smin = svd.singularValues()(svd.singularValues().size() - 1);
    return backward ? 1.0 / std::max(smin, 1e-300) : smax;
  };

  const double newton_tol = 1e-14;
  auto phi = [&](const Vec& y) -> Vec { return map.eval_lift(y) - A * y; };
  auto backward_step = [&](const Vec& y) -> Vec {
    Vec x = project_point(Vec(Ainv * y));
    if (clear_of_supports(x, balls, safety)) return x;
    return newton_inverse_torus(map, y, newton_tol, 200);
  };

  const int chunks = std::max(1, opt.jobs);
  std::vector<double> chunk_residual(chunks, 0.0), chunk_sup(chunks, 0.0);

  parallel_chunks(opt.jobs, total, [&](int chunk, std::size_t lo,
                                       std::size_t hi) {
    std::vector<Vec> fwd(field.N_u + 2), bwd(field.N_s + 1);
    double res_max = 0.0, sup_max = 0.0;
    for (std::size_t idx = lo; idx < hi; ++idx) {
      Vec x(n);
      {
        std::size_t t = idx;
        for (int i = n - 1; i >= 0; --i) {
          x[i] = static_cast<double>(t % G) / G;
          t /= G;
        }
      }
      // forward orbit x, f x, ..., up to N_u + 1 points past x
      fwd[0] = x;
      for (int j = 1; j <= field.N_u + 1; ++j) fwd[j] = map.eval(fwd[j - 1]);
      // backward orbit z_0 = x, z_1 = f^-1 x, ...
      bwd[0] = x;
      for (int j = 1; j <= field.N_s; ++j) bwd[j] = backward_step(bwd[j - 1]);

      Vec vu = Vec::Zero(n), vs = Vec::Zero(n);
      Vec vu_shift = Vec::Zero(n), vs_shift = Vec::Zero(n);
      double err_bound = 0.0, e_orbit = 0.0;
      for (int j = 0; j < field.N_u; ++j) {
        if (!clear_of_supports(fwd[j], balls, 0.0)) vu += Tu[j] * phi(fwd[j]);
        if (!clear_of_supports(fwd[j + 1], balls, 0.0))
          vu_shift += Tu[j] * phi(fwd[j + 1]);
        e_orbit = local_lip(fwd[j], false) * e_orbit + 4e-16;
        err_bound += Tu[j].norm() * lip_phi * e_orbit;
      }
      e_orbit = 0.0;
      for (int j = 1; j <= field.N_s; ++j) {
        if (!clear_of_supports(bwd[j], balls, 0.0))
          vs -= Ts[j - 1] * phi(bwd[j]);
        if (!clear_of_supports(bwd[j - 1], balls, 0.0))
          vs_shift -= Ts[j - 1] * phi(bwd[j - 1]);
        e_orbit = local_lip(bwd[j - 1], true) * (e_orbit + newton_tol);
        err_bound += Ts[j - 1].norm() * lip_phi * e_orbit;
      }
      err_bound *= 2.0;  // covers the shifted sums too
      Vec val = vu + vs;
      for (int i = 0; i < n; ++i) field.v[idx * n + i] = val[i];
      sup_max = std::max(sup_max, val.norm());

      // series-evaluator defect plus the orbit conditioning bound
      Vec defect = A * val - phi(x) - (vu_shift + vs_shift);
      res_max = std::max(res_max, defect.norm() + err_bound);
    }
    chunk_residual[chunk] = res_max;
    chunk_sup[chunk] = sup_max;
  });

  field.residual_series =
      *std::max_element(chunk_residual.begin(), chunk_residual.end());
  field.sup_norm = *std::max_element(chunk_sup.begin(), chunk_sup.end());

  // interpolation-in-the-loop residual on off-grid samples
  Rng rng = Rng::stream(opt.seed, 11);
  double ri = 0.0;
  for (int s = 0; s < opt.interp_check_samples; ++s) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.next_double();
    Vec Hx = x + field.v_at(x);
    Vec fx = map.eval_lift(x);
    Vec Hfx = fx + field.v_at(fx);
    ri = std::max(ri, (A * Hx - Hfx).norm());
  }
  field.residual_interp = ri;
  return field;
}

ConjugacyField normalize_lift(const ConjugacyField& field,
                              const Eigen::VectorXd& m) {
  ConjugacyField out = field;
  Eigen::MatrixXd AmI =
      field.aut.Ad() - Eigen::MatrixXd::Identity(field.n(), field.n());
  Eigen::VectorXd w = AmI.partialPivLu().solve(Eigen::VectorXd(-m));
  const int n = field.n();
  double sup = 0.0;
  for (std::size_t idx = 0; idx < out.node_count(); ++idx) {
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      out.v[idx * n + i] += w[i];
      s2 += out.v[idx * n + i] * out.v[idx * n + i];
    }
    sup = std::max(sup, std::sqrt(s2));
  }
  out.sup_norm = sup;
  out.lift_offset = field.lift_offset + m;
  return out;
}

// ---------------------------------------------------------------------------
// Fibers

namespace {

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0u);
  }
  std::uint32_t find(std::uint32_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

double wrap_abs(double d) {
  d = std::abs(d);
  d -= std::floor(d);
  return std::min(d, 1.0 - d);
}

}  // namespace

nlohmann::json FiberReport::to_json() const {
  nlohmann::json j;
  j["lambda_lower"] = lambda_lower;
  j["lambda_upper"] = lambda_upper;
  j["grid_cell"] = grid_cell;
  j["bucket_cell"] = bucket_cell;
  j["rho"] = rho;
  j["rho_light"] = rho_light;
  j["nodes"] = nodes;
  j["singleton_nodes"] = singleton_nodes;
  j["nontrivial_components"] = nontrivial_components;
  nlohmann::json w = nlohmann::json::array();
  for (const auto& x : witnesses) {
    nlohmann::json e;
    e["a"] = vec_json(x.a);
    e["b"] = vec_json(x.b);
    e["distance"] = x.distance;
    e["image_distance"] = x.image_distance;
    w.push_back(e);
  }
  j["witnesses"] = w;
  return j;
}

FiberReport fiber_analysis(const ConjugacyField& field, double rho, int jobs,
                           double cell_override) {
  const int n = field.n();
  const int G = field.G;
  FiberReport rep;
  rep.rho = rho;
  rep.grid_cell = 1.0 / G;
  if (rep.grid_cell > rho / 4.0)
    throw ResolutionTooCoarse("fiber analysis needs grid cell <= rho / 4");
  if (field.residual_series > rho / 10.0)
    throw ResolutionTooCoarse("field residual exceeds rho / 10");
  const double cell = cell_override > 0.0
                          ? cell_override
                          : std::max(4.0 * field.residual_series, 1e-12);
  rep.bucket_cell = cell;
  const std::size_t total = field.node_count();
  rep.nodes = total;
  if (total > 0xFFFFFFFFull)
    throw DimensionTooLarge("fiber grid exceeds 2^32 nodes");

  // H images mod 1, flattened
  std::vector<double> img(total * n);
  parallel_chunks(jobs, total, [&](int, std::size_t lo, std::size_t hi) {
    for (std::size_t idx = lo; idx < hi; ++idx) {
      Vec x = field.node_point(idx);
      Vec Hx = x + field.node_value(idx);
      for (int i = 0; i < n; ++i) img[idx * n + i] = wrap01(Hx[i]);
    }
  });

  auto images_close = [&](std::size_t a, std::size_t b, double scale) {
    for (int i = 0; i < n; ++i)
      if (wrap_abs(img[a * n + i] - img[b * n + i]) > scale) return false;
    return true;
  };

  // lexicographically positive neighbour offsets (half of 3^n - 1)
  std::vector<std::array<int, 8>> offsets;
  {
    int three_n = 1;
    for (int i = 0; i < n; ++i) three_n *= 3;
    for (int code = 0; code < three_n; ++code) {
      std::array<int, 8> ds{};
      int t = code;
      int first = 0;
      for (int i = 0; i < n; ++i) {
        ds[i] = t % 3 - 1;
        t /= 3;
        if (ds[i] != 0 && first == 0) first = ds[i];
      }
      if (first > 0) offsets.push_back(ds);
    }
  }

  // components: same-image grid neighbours (3^n - 1 adjacency). Edge scan is
  // parallel and read-only; unions merge per chunk in index order.
  UnionFind uf(total);
  {
    const int chunks = std::max(1, jobs);
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> edges(
        chunks);
    parallel_chunks(jobs, total, [&](int chunk, std::size_t lo,
                                     std::size_t hi) {
      int coords[8];
      for (std::size_t idx = lo; idx < hi; ++idx) {
        std::size_t t = idx;
        for (int i = n - 1; i >= 0; --i) {
          coords[i] = static_cast<int>(t % G);
          t /= G;
        }
        for (const auto& ds : offsets) {
          std::size_t nb = 0;
          for (int i = 0; i < n; ++i) {
            int coord = coords[i] + ds[i];
            if (coord < 0) coord += G;
            if (coord >= G) coord -= G;
            nb = nb * G + static_cast<std::size_t>(coord);
          }
          if (images_close(idx, nb, cell))
            edges[chunk].push_back({static_cast<std::uint32_t>(idx),
                                    static_cast<std::uint32_t>(nb)});
        }
      }
    });
    for (const auto& chunk_edges : edges)
      for (const auto& [a, b] : chunk_edges) uf.unite(a, b);
  }

  // Verified same-image pairs across the whole grid (threshold cell/2 per
  // axis). For n <= 2 the 2^n half-cell offset keyings make the discovery
  // complete, so the lower bound is monotone under grid refinement; higher
  // dimensions use a single keying and stay a (possibly loose) lower bound.
  {
    const double t_pair = cell / 2.0;
    const int keyings = (n <= 2) ? (1 << n) : 1;
    std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(total);
    for (int pass = 0; pass < keyings; ++pass) {
      parallel_chunks(jobs, total, [&](int, std::size_t lo, std::size_t hi) {
        for (std::size_t idx = lo; idx < hi; ++idx) {
          std::uint64_t h = 1469598103934665603ull;
          for (int i = 0; i < n; ++i) {
            double shifted =
                img[idx * n + i] + (((pass >> i) & 1) ? t_pair : 0.0);
            auto ci = static_cast<std::uint64_t>(shifted / cell);
            h = (h ^ ci) * 1099511628211ull;
          }
          keyed[idx] = {h, static_cast<std::uint32_t>(idx)};
        }
      });
      std::sort(keyed.begin(), keyed.end());
      for (std::size_t i = 0; i + 1 < total;) {
        std::size_t j = i + 1;
        while (j < total && keyed[j].first == keyed[i].first) ++j;
        if (j - i >= 2) {
          std::size_t checked = 0;
          for (std::size_t a = i; a < j && checked < 1024; ++a)
            for (std::size_t b = a + 1; b < j && checked < 1024;
                 ++b, ++checked) {
              std::size_t ia = keyed[a].second, ib = keyed[b].second;
              if (!images_close(ia, ib, t_pair)) continue;
              Vec pa = field.node_point(ia), pb = field.node_point(ib);
              double d = torus_distance(pa, pb);
              if (d > rep.lambda_lower) {
                rep.lambda_lower = d;
                double imd = 0.0;
                for (int k = 0; k < n; ++k)
                  imd += wrap_abs(img[ia * n + k] - img[ib * n + k]) *
                         wrap_abs(img[ia * n + k] - img[ib * n + k]);
                if (rep.witnesses.size() >= 8)
                  rep.witnesses.erase(rep.witnesses.begin());
                rep.witnesses.push_back({pa, pb, d, std::sqrt(imd)});
              }
            }
        }
        i = j;
      }
    }
  }

  // component statistics
  std::vector<std::uint32_t> size(total, 0);
  for (std::size_t idx = 0; idx < total; ++idx)
    ++size[uf.find(static_cast<std::uint32_t>(idx))];
  rep.singleton_nodes = 0;
  std::vector<std::pair<std::uint32_t, std::vector<std::uint32_t>>> comps;
  {
    std::vector<std::int64_t> slot;
    bool have_nontrivial = false;
    for (std::size_t idx = 0; idx < total; ++idx)
      if (size[idx] >= 2) have_nontrivial = true;
    if (have_nontrivial) slot.assign(total, -1);
    for (std::size_t idx = 0; idx < total; ++idx) {
      auto root = uf.find(static_cast<std::uint32_t>(idx));
      if (size[root] < 2) {
        ++rep.singleton_nodes;
        continue;
      }
      if (slot[root] < 0) {
        slot[root] = static_cast<std::int64_t>(comps.size());
        comps.push_back({root, {}});
      }
      comps[static_cast<std::size_t>(slot[root])].second.push_back(
          static_cast<std::uint32_t>(idx));
    }
  }
  rep.nontrivial_components = comps.size();
  rep.lambda_upper = 0.0;
  for (const auto& [root, members] : comps) {
    Vec first = field.node_point(members.front());
    double diam = 0.0;
    if (members.size() <= 256) {
      for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b)
          diam = std::max(diam,
                          torus_distance(field.node_point(members[a]),
                                         field.node_point(members[b])));
    } else {
      Vec lo = Vec::Zero(n), hi = Vec::Zero(n);
      for (auto m : members) {
        Vec off = torus_offset(field.node_point(m), first);
        lo = lo.cwiseMin(off);
        hi = hi.cwiseMax(off);
      }
      diam = (hi - lo).norm();
    }
    rep.lambda_upper = std::max(rep.lambda_upper, diam);
  }
  rep.rho_light = rep.lambda_upper < rho;
  return rep;
}

// ---------------------------------------------------------------------------
// Semicontinuity probe

nlohmann::json SemicontinuityReport::to_json() const {
  nlohmann::json j;
  j["lambda_f"] = lambda_f;
  j["eps"] = eps;
  j["fitted_delta"] = fitted_delta;
  j["any_violation_inside"] = any_violation_inside;
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json e;
    e["c0_distance"] = r.c0_distance;
    e["lambda_g"] = r.lambda_g;
    e["delta_lambda"] = r.delta_lambda;
    e["violated"] = r.violated;
    e["informational"] = r.informational;
    rs.push_back(e);
  }
  j["rows"] = rs;
  return j;
}

SemicontinuityReport semicontinuity_probe(const TorusMap& f,
                                          const std::vector<MapPtr>& perturbations,
                                          double eps, int G, double tol,
                                          double rho, int jobs) {
  ComputeHOptions opt;
  opt.jobs = jobs;
  auto field_f = compute_H(f, G, tol, opt);
  auto fib_f = fiber_analysis(field_f, rho, jobs);

  SemicontinuityReport rep;
  rep.lambda_f = fib_f.lambda_upper;
  rep.eps = eps;

  const int n = f.n();
  int per_axis = 16;
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(per_axis);

  for (const auto& g : perturbations) {
    ProbeRow row;
    double d = 0.0;
    Vec x(n);
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t t = idx;
      for (int i = 0; i < n; ++i) {
        x[i] = static_cast<double>(t % per_axis) / per_axis;
        t /= per_axis;
      }
      d = std::max(d, (f.eval_lift(x) - g->eval_lift(x)).norm());
    }
    row.c0_distance = d;
    auto field_g = compute_H(*g, G, tol, opt);
    auto fib_g = fiber_analysis(field_g, rho, jobs);
    row.lambda_g = fib_g.lambda_upper;
    row.delta_lambda = row.lambda_g - rep.lambda_f;
    row.violated = row.delta_lambda >= eps;
    rep.rows.push_back(row);
  }

  // largest distance below which every probe satisfies the bound
  std::vector<std::size_t> order(rep.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rep.rows[a].c0_distance < rep.rows[b].c0_distance;
  });
  rep.fitted_delta = 0.0;
  for (std::size_t k : order) {
    if (rep.rows[k].violated) break;
    rep.fitted_delta = rep.rows[k].c0_distance;
  }
  for (auto& r : rep.rows) {
    r.informational = r.c0_distance > rep.fitted_delta;
    if (r.violated && !r.informational) rep.any_violation_inside = true;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Degree

DegreeResult degree_open_image(const ConjugacyField& field, ProjectorSide side,
                               const std::vector<Vec>& disk, int d,
                               const Eigen::VectorXd& y) {
  if (d < 1 || d > 2)
    throw UnsupportedDimension("degree implemented for d <= 2 only");
  if (disk.size() < 2) throw BadGeometry("disk needs at least two points");
  Eigen::MatrixXd Fr = (side == ProjectorSide::stable)
                           ? field.aut.stable_frame()
                           : field.aut.unstable_frame();
  if (static_cast<int>(Fr.cols()) != d)
    throw FrameMismatch("projector range dimension does not match d");

  auto val = [&](const Vec& x) -> Eigen::VectorXd {
    return Fr.transpose() * Eigen::VectorXd(field.H(x));
  };

  const double guard = 2.0 * std::max(field.residual_interp, 1e-14);

  if (d == 1) {
    double va = val(disk.front())[0] - y[0];
    double vb = val(disk.back())[0] - y[0];
    if (std::abs(va) <= guard || std::abs(vb) <= guard)
      throw BoundaryTooClose("disk boundary maps too close to the target");
    DegreeResult r;
    r.min_boundary_distance = std::min(std::abs(va), std::abs(vb));
    r.degree = ((vb > 0.0) - (va > 0.0)) / 1;
    if (r.degree != 0) r.degree = r.degree > 0 ? 1 : -1;
    r.attained = r.degree != 0;
    return r;
  }

  // winding number of val(loop) - y
  double total_angle = 0.0;
  double min_dist = 1e300;
  Eigen::VectorXd prev = val(disk.front()) - y;
  min_dist = std::min(min_dist, prev.norm());
  for (std::size_t i = 1; i <= disk.size(); ++i) {
    Eigen::VectorXd cur = val(disk[i % disk.size()]) - y;
    min_dist = std::min(min_dist, cur.norm());
    double cross = prev[0] * cur[1] - prev[1] * cur[0];
    double dot = prev[0] * cur[0] + prev[1] * cur[1];
    total_angle += std::atan2(cross, dot);
    prev = cur;
  }
  if (min_dist <= guard)
    throw BoundaryTooClose("disk boundary maps too close to the target");
  DegreeResult r;
  r.min_boundary_distance = min_dist;
  r.degree = static_cast<int>(std::lround(total_angle / (2.0 * M_PI)));
  r.attained = r.degree != 0;
  return r;
}

// ---------------------------------------------------------------------------
// Binary IO

namespace {
void write_raw(std::FILE* fp, const void* p, std::size_t bytes) {
  if (std::fwrite(p, 1, bytes, fp) != bytes)
    throw Error("short write on conjugacy field file");
}
void read_raw(std::FILE* fp, void* p, std::size_t bytes) {
  if (std::fread(p, 1, bytes, fp) != bytes)
    throw Error("short read on conjugacy field file");
}
}  // namespace

void ConjugacyField::write_binary(const std::string& path) const {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw Error("cannot open " + path + " for writing");
  const char magic[8] = {'S', 'D', 'L', 'C', 'O', 'N', 'J', '1'};
  write_raw(fp, magic, 8);
  std::uint32_t un = static_cast<std::uint32_t>(n()), uG = G;
  write_raw(fp, &un, 4);
  write_raw(fp, &uG, 4);
  for (int i = 0; i < n(); ++i)
    for (int j = 0; j < n(); ++j) {
      std::int64_t e = aut.M(i, j);
      write_raw(fp, &e, 8);
    }
  double band[2] = {aut.weak_low, aut.weak_high};
  write_raw(fp, band, 16);
  std::int32_t orders[2] = {N_u, N_s};
  write_raw(fp, orders, 8);
  double scalars[5] = {residual_series, residual_interp, sup_norm, phi_sup,
                       tol};
  write_raw(fp, scalars, 40);
  for (int i = 0; i < n(); ++i) {
    double o = lift_offset[i];
    write_raw(fp, &o, 8);
  }
  write_raw(fp, v.data(), v.size() * 8);
  std::fclose(fp);
}

ConjugacyField ConjugacyField::read_binary(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw Error("cannot open " + path);
  char magic[8];
  read_raw(fp, magic, 8);
  if (std::memcmp(magic, "SDLCONJ1", 8) != 0)
    throw Error("bad conjugacy field magic");
  std::uint32_t un, uG;
  read_raw(fp, &un, 4);
  read_raw(fp, &uG, 4);
  IMat M(un, un);
  for (std::uint32_t i = 0; i < un; ++i)
    for (std::uint32_t j = 0; j < un; ++j) {
      std::int64_t e;
      read_raw(fp, &e, 8);
      M(i, j) = e;
    }
  double band[2];
  read_raw(fp, band, 16);
  ConjugacyField field;
  field.aut = compute_splitting(M, band[0], band[1]);
  field.G = static_cast<int>(uG);
  std::int32_t orders[2];
  read_raw(fp, orders, 8);
  field.N_u = orders[0];
  field.N_s = orders[1];
  double scalars[5];
  read_raw(fp, scalars, 40);
  field.residual_series = scalars[0];
  field.residual_interp = scalars[1];
  field.sup_norm = scalars[2];
  field.phi_sup = scalars[3];
  field.tol = scalars[4];
  field.lift_offset = Eigen::VectorXd::Zero(un);
  for (std::uint32_t i = 0; i < un; ++i) {
    double o;
    read_raw(fp, &o, 8);
    field.lift_offset[i] = o;
  }
  field.v.resize(field.node_count() * un);
  read_raw(fp, field.v.data(), field.v.size() * 8);
  std::fclose(fp);
  return field;
}

nlohmann::json ConjugacyField::meta_json() const {
  nlohmann::json j;
  j["n"] = n();
  j["G"] = G;
  j["N_u"] = N_u;
  j["N_s"] = N_s;
  j["residual_series"] = residual_series;
  j["residual_interp"] = residual_interp;
  j["sup_norm"] = sup_norm;
  j["phi_sup"] = phi_sup;
  j["tol"] = tol;
  return j;
}

}  // namespace saddlelab
