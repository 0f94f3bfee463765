#include "saddlelab/torus_linear.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace saddlelab {

namespace {

Eigen::MatrixXd hcat(const std::vector<Eigen::MatrixXd>& blocks, int rows) {
  int cols = 0;
  for (const auto& b : blocks) cols += static_cast<int>(b.cols());
  Eigen::MatrixXd out(rows, cols);
  int at = 0;
  for (const auto& b : blocks) {
    out.middleCols(at, b.cols()) = b;
    at += static_cast<int>(b.cols());
  }
  return out;
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& basis) {
  if (basis.cols() == 0) return basis;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(basis.rows(), basis.cols());
  return q;
}

double frame_residual(const Eigen::MatrixXd& M, const Eigen::MatrixXd& F) {
  if (F.cols() == 0) return 0.0;
  Eigen::MatrixXd MF = M * F;
  Eigen::MatrixXd rep = F.transpose() * MF;
  return (MF - F * rep).norm();
}

}  // namespace

Eigen::MatrixXd ToralAutomorphism::stable_frame() const {
  return hcat({frame_ss, frame_ws}, n());
}

Eigen::MatrixXd ToralAutomorphism::unstable_frame() const {
  return hcat({frame_wu, frame_uu}, n());
}

Eigen::MatrixXd ToralAutomorphism::center_frame() const {
  return hcat({frame_ws, frame_wu}, n());
}

Eigen::MatrixXd ToralAutomorphism::full_frame() const {
  return hcat({frame_ss, frame_ws, frame_wu, frame_uu}, n());
}

double ToralAutomorphism::invariance_residual() const {
  Eigen::MatrixXd A = Ad();
  double r = 0.0;
  for (const auto* F : {&frame_ss, &frame_ws, &frame_wu, &frame_uu})
    r = std::max(r, frame_residual(A, *F));
  return r;
}

long long det_integer(const IMat& M) {
  // Bareiss fraction-free elimination on int128 intermediates.
  const int n = static_cast<int>(M.rows());
  if (n == 0) return 1;
  std::vector<std::vector<__int128>> a(n, std::vector<__int128>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a[i][j] = M(i, j);
  __int128 prev = 1;
  int sign = 1;
  for (int k = 0; k < n - 1; ++k) {
    if (a[k][k] == 0) {
      int p = -1;
      for (int i = k + 1; i < n; ++i)
        if (a[i][k] != 0) {
          p = i;
          break;
        }
      if (p < 0) return 0;
      std::swap(a[k], a[p]);
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j < n; ++j)
        a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
    prev = a[k][k];
  }
  __int128 d = sign * a[n - 1][n - 1];
  long long out = static_cast<long long>(d);
  if (static_cast<__int128>(out) != d)
    throw DimensionTooLarge("determinant overflows 64 bits");
  return out;
}

ToralAutomorphism compute_splitting(const IMat& M, double weak_low,
                                    double weak_high, double tol_hyp,
                                    double tol_inv) {
  if (M.rows() != M.cols() || M.rows() == 0)
    throw BadGeometry("matrix must be square and non-empty");
  if (M.rows() > 32) throw DimensionTooLarge("n > 32 not supported");
  if (!(0.0 < weak_low && weak_low < 1.0 && weak_high > 1.0))
    throw BadGeometry("weak band must satisfy 0 < low < 1 < high");

  ToralAutomorphism A;
  A.M = M;
  A.det = det_integer(M);
  if (std::abs(A.det) != 1)
    throw NotUnimodular("matrix determinant is not +-1");
  A.weak_low = weak_low;
  A.weak_high = weak_high;

  const int n = static_cast<int>(M.rows());
  Eigen::MatrixXd Md = M.cast<double>();
  Eigen::EigenSolver<Eigen::MatrixXd> es(Md);
  if (es.info() != Eigen::Success)
    throw Error("eigen decomposition failed");

  Eigen::VectorXcd vals = es.eigenvalues();
  Eigen::MatrixXcd vecs = es.eigenvectors();

  // Diagonalizability gate: the paper-style constructions need genuine
  // eigendirections, so Jordan blocks are rejected.
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(vecs);
  double smin = svd.singularValues()(svd.singularValues().size() - 1);
  double smax = svd.singularValues()(0);
  if (smin < 1e-8 * smax)
    throw NotDiagonalizable("eigenvector matrix numerically singular");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(vals[a]) < std::abs(vals[b]);
  });

  A.eigenvalues.resize(n);
  A.moduli.resize(n);
  for (int i = 0; i < n; ++i) {
    A.eigenvalues[i] = vals[order[i]];
    A.moduli[i] = std::abs(vals[order[i]]);
    if (std::abs(A.moduli[i] - 1.0) <= tol_hyp)
      throw NotHyperbolic("eigenvalue modulus within tol_hyp of 1");
  }

  // Real basis vectors per band; complex pairs contribute Re/Im once.
  std::vector<Eigen::MatrixXd> bands(4);
  for (auto& b : bands) b.resize(n, 0);
  std::vector<bool> used(n, false);
  auto band_of = [&](double m) {
    if (m <= weak_low) return 0;
    if (m < 1.0) return 1;
    if (m < weak_high) return 2;
    return 3;
  };
  for (int oi = 0; oi < n; ++oi) {
    int i = order[oi];
    if (used[i]) continue;
    used[i] = true;
    int band = band_of(std::abs(vals[i]));
    Eigen::VectorXcd v = vecs.col(i);
    if (std::abs(vals[i].imag()) > 1e-12 * std::abs(vals[i])) {
      // locate and consume the conjugate partner
      for (int j = 0; j < n; ++j) {
        if (!used[j] && std::abs(vals[j] - std::conj(vals[i])) <
                            1e-9 * (1.0 + std::abs(vals[i]))) {
          used[j] = true;
          break;
        }
      }
      Eigen::MatrixXd blk(n, 2);
      blk.col(0) = v.real();
      blk.col(1) = v.imag();
      Eigen::MatrixXd& B = bands[band];
      Eigen::MatrixXd nb(n, B.cols() + 2);
      nb << B, blk;
      B = nb;
    } else {
      Eigen::VectorXd rv = v.real();
      if (rv.norm() < 1e-12) rv = v.imag();
      Eigen::MatrixXd& B = bands[band];
      Eigen::MatrixXd nb(n, B.cols() + 1);
      nb << B, rv;
      B = nb;
    }
  }

  A.frame_ss = orthonormalize(bands[0]);
  A.frame_ws = orthonormalize(bands[1]);
  A.frame_wu = orthonormalize(bands[2]);
  A.frame_uu = orthonormalize(bands[3]);
  A.dims = {static_cast<int>(A.frame_ss.cols()),
            static_cast<int>(A.frame_ws.cols()),
            static_cast<int>(A.frame_wu.cols()),
            static_cast<int>(A.frame_uu.cols())};

  if (A.invariance_residual() > tol_inv)
    throw Error("computed frame fails invariance tolerance");
  return A;
}

SmithForm smith_normal_form(const IMat& M) {
  const int n = static_cast<int>(M.rows());
  std::vector<std::vector<long long>> a(n, std::vector<long long>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a[i][j] = M(i, j);
  IMat V = IMat::Identity(n, n);

  auto col_op = [&](int dst, int src, long long q) {
    // column dst -= q * column src, mirrored on V
    for (int i = 0; i < n; ++i) a[i][dst] -= q * a[i][src];
    for (int i = 0; i < n; ++i) V(i, dst) -= q * V(i, src);
  };
  auto col_swap = [&](int c1, int c2) {
    for (int i = 0; i < n; ++i) std::swap(a[i][c1], a[i][c2]);
    for (int i = 0; i < n; ++i) std::swap(V(i, c1), V(i, c2));
  };
  auto row_op = [&](int dst, int src, long long q) {
    for (int j = 0; j < n; ++j) a[dst][j] -= q * a[src][j];
  };

  for (int k = 0; k < n; ++k) {
    while (true) {
      // pivot: smallest nonzero |entry| in the trailing block
      int pi = -1, pj = -1;
      long long best = 0;
      for (int i = k; i < n; ++i)
        for (int j = k; j < n; ++j)
          if (a[i][j] != 0 &&
              (pi < 0 || std::llabs(a[i][j]) < best)) {
            pi = i;
            pj = j;
            best = std::llabs(a[i][j]);
          }
      if (pi < 0) break;  // trailing block zero
      if (pi != k) {
        std::swap(a[pi], a[k]);
      }
      if (pj != k) col_swap(pj, k);
      bool clean = true;
      for (int i = k + 1; i < n; ++i)
        if (a[i][k] != 0) {
          row_op(i, k, a[i][k] / a[k][k]);
          if (a[i][k] != 0) clean = false;
        }
      for (int j = k + 1; j < n; ++j)
        if (a[k][j] != 0) {
          col_op(j, k, a[k][j] / a[k][k]);
          if (a[k][j] != 0) clean = false;
        }
      if (clean) {
        bool zeroed = true;
        for (int i = k + 1; i < n && zeroed; ++i) zeroed = (a[i][k] == 0);
        for (int j = k + 1; j < n && zeroed; ++j) zeroed = (a[k][j] == 0);
        if (zeroed) break;
      }
    }
  }

  SmithForm out;
  out.V = V;
  out.diag.resize(n);
  for (int i = 0; i < n; ++i) out.diag[i] = std::llabs(a[i][i]);
  return out;
}

IMat integer_power(const IMat& M, int k) {
  IMat R = IMat::Identity(M.rows(), M.cols());
  for (int i = 0; i < k; ++i) R = (R * M).eval();
  return R;
}

std::vector<Vec> fixed_points(const IMat& M, int period) {
  if (period < 1) throw BadGeometry("period must be positive");
  const int n = static_cast<int>(M.rows());
  IMat K = integer_power(M, period) - IMat::Identity(n, n);
  long long dk = det_integer(K);
  if (dk == 0) throw DegeneratePeriod("det(M^m - Id) = 0");

  SmithForm snf = smith_normal_form(K);
  long long count = 1;
  for (long long d : snf.diag) count *= d;
  count = std::llabs(count);

  // Solutions x = V y with y_i = k_i / d_i.
  std::vector<Vec> pts;
  pts.reserve(static_cast<std::size_t>(count));
  std::vector<long long> idx(n, 0);
  Eigen::MatrixXd Vd = snf.V.cast<double>();
  while (true) {
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i)
      y[i] = static_cast<double>(idx[i]) / static_cast<double>(snf.diag[i]);
    Eigen::VectorXd x = Vd * y;
    Vec p(n);
    for (int i = 0; i < n; ++i) p[i] = wrap01(x[i]);
    pts.push_back(p);

    int c = n - 1;
    while (c >= 0) {
      if (++idx[c] < snf.diag[c]) break;
      idx[c] = 0;
      --c;
    }
    if (c < 0) break;
  }

  if (static_cast<long long>(pts.size()) != count)
    throw Error("fixed point enumeration count mismatch");
  std::sort(pts.begin(), pts.end(), [](const Vec& a, const Vec& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (std::abs(a[i] - b[i]) > 1e-12) return a[i] < b[i];
    }
    return false;
  });
  return pts;
}

nlohmann::json splitting_to_json(const ToralAutomorphism& A) {
  nlohmann::json j;
  j["n"] = A.n();
  j["det"] = A.det;
  j["weak_band"] = {A.weak_low, A.weak_high};
  j["dims"] = {A.dims[0], A.dims[1], A.dims[2], A.dims[3]};
  nlohmann::json mat = nlohmann::json::array();
  for (int i = 0; i < A.n(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < A.n(); ++k) row.push_back(A.M(i, k));
    mat.push_back(row);
  }
  j["matrix"] = mat;
  nlohmann::json mods = nlohmann::json::array();
  for (int i = 0; i < A.moduli.size(); ++i)
    mods.push_back(format_double17(A.moduli[i]));
  j["moduli"] = mods;
  auto frame_json = [&](const Eigen::MatrixXd& F) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < F.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int k = 0; k < F.cols(); ++k) row.push_back(format_double17(F(i, k)));
      rows.push_back(row);
    }
    return rows;
  };
  j["frame_ss"] = frame_json(A.frame_ss);
  j["frame_ws"] = frame_json(A.frame_ws);
  j["frame_wu"] = frame_json(A.frame_wu);
  j["frame_uu"] = frame_json(A.frame_uu);
  return j;
}

}  // namespace saddlelab
