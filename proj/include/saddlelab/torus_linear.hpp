#ifndef SADDLELAB_TORUS_LINEAR_HPP
#define SADDLELAB_TORUS_LINEAR_HPP

#include <array>
#include <vector>

#include "saddlelab/common.hpp"
#include "saddlelab/errors.hpp"

#include "json.hpp"

namespace saddlelab {

// Partial hyperbolicity rates: lambda_s < 1 < lambda_u and
// lambda_s < lambda_c_minus <= lambda_c_plus < lambda_u.
struct PHBounds {
  double lambda_s = 0.0;
  double lambda_c_minus = 0.0;
  double lambda_c_plus = 0.0;
  double lambda_u = 0.0;

  bool valid() const {
    return lambda_s > 0 && lambda_s < 1.0 && lambda_u > 1.0 &&
           lambda_s < lambda_c_minus && lambda_c_minus <= lambda_c_plus &&
           lambda_c_plus < lambda_u;
  }
};

// Integer hyperbolic matrix together with its invariant splitting
// E^ss + E^ws + E^wu + E^uu. Frames are orthonormal column blocks spanning
// M-invariant subspaces; moduli are sorted ascending. Immutable after
// construction.
struct ToralAutomorphism {
  IMat M;
  long long det = 0;
  Eigen::VectorXcd eigenvalues;  // sorted by modulus ascending
  Eigen::VectorXd moduli;        // |eigenvalues|, ascending
  Eigen::MatrixXd frame_ss, frame_ws, frame_wu, frame_uu;
  std::array<int, 4> dims{0, 0, 0, 0};  // (ss, ws, wu, uu)
  double weak_low = 0.0, weak_high = 0.0;

  int n() const { return static_cast<int>(M.rows()); }
  Eigen::MatrixXd Ad() const { return M.cast<double>(); }

  Eigen::MatrixXd stable_frame() const;    // [ss ws]
  Eigen::MatrixXd unstable_frame() const;  // [wu uu]
  Eigen::MatrixXd center_frame() const;    // [ws wu]
  // Full frame [ss ws wu uu]; for symmetric M this is orthogonal.
  Eigen::MatrixXd full_frame() const;

  // max over columns F of ||M F - F (F^T M F)||.
  double invariance_residual() const;
};

// Eigen-split M into the four bands. Weak bands are (low, 1) and (1, high);
// moduli <= low go to E^ss and >= high to E^uu. Rejects non-unimodular input,
// moduli within tol_hyp of 1, and matrices that are not diagonalizable over C.
ToralAutomorphism compute_splitting(const IMat& M, double weak_low,
                                    double weak_high, double tol_hyp = 1e-8,
                                    double tol_inv = 1e-9);

// Exact determinant of an integer matrix (fraction-free Gaussian elimination).
long long det_integer(const IMat& M);

// Smith normal form D = U M V with U, V unimodular and D diagonal with
// d_1 | d_2 | ... Returns diagonal and the right transform V.
struct SmithForm {
  std::vector<long long> diag;
  IMat V;
};
SmithForm smith_normal_form(const IMat& M);

// All torus solutions of (M^m - Id) x in Z^n, enumerated exactly through the
// Smith form. Count equals |det(M^m - Id)|; throws DegeneratePeriod when that
// determinant vanishes. Output sorted lexicographically.
std::vector<Vec> fixed_points(const IMat& M, int period);

IMat integer_power(const IMat& M, int k);

nlohmann::json splitting_to_json(const ToralAutomorphism& A);

}  // namespace saddlelab

#endif
