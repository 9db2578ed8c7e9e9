#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "dichospec/errors.hpp"

namespace dichospec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

inline double spectral_norm(const Matrix& m) {
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  return m.jacobiSvd().singularValues()(0);
}

// Smallest singular value; 0 for a non-square or empty matrix only if truly rank-deficient.
inline double smallest_singular_value(const Matrix& m) {
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  auto sv = m.jacobiSvd().singularValues();
  return sv(sv.size() - 1);
}

// A matrix held as value = exp(log_scale) * mat with ||mat||_2 == 1.
// The zero matrix is represented by mat == 0, log_scale == -inf.
// Keeping the magnitude in a separate log factor lets transition products
// cover windows where the dense value would overflow (|log| well beyond 709).
struct ScaledMatrix {
  Matrix mat;
  double log_scale = 0.0;

  static ScaledMatrix identity(Eigen::Index d) {
    return {Matrix::Identity(d, d), 0.0};
  }

  static ScaledMatrix zero(Eigen::Index rows, Eigen::Index cols) {
    return {Matrix::Zero(rows, cols), kNegInf};
  }

  // Normalizes an arbitrary dense matrix into scaled form.
  static ScaledMatrix from_dense(const Matrix& a) {
    double nrm = spectral_norm(a);
    if (nrm == 0.0 || !std::isfinite(nrm)) {
      if (!std::isfinite(nrm))
        throw NumericError("matrix with non-finite entries cannot be normalized");
      return zero(a.rows(), a.cols());
    }
    return {a / nrm, std::log(nrm)};
  }

  bool is_zero() const { return log_scale == kNegInf; }

  // log ||value||_2; exact because ||mat|| == 1 by construction.
  double log_norm() const { return log_scale; }

  // Dense value; only safe when |log_scale| is small enough not to overflow.
  Matrix dense() const {
    if (is_zero()) return Matrix::Zero(mat.rows(), mat.cols());
    return std::exp(log_scale) * mat;
  }
};

inline ScaledMatrix operator*(const ScaledMatrix& a, const ScaledMatrix& b) {
  if (a.is_zero() || b.is_zero()) return ScaledMatrix::zero(a.mat.rows(), b.mat.cols());
  ScaledMatrix r = ScaledMatrix::from_dense(a.mat * b.mat);
  if (!r.is_zero()) r.log_scale += a.log_scale + b.log_scale;
  return r;
}

// Right-multiplication by an unscaled matrix (projectors, kernel bases).
inline ScaledMatrix operator*(const ScaledMatrix& a, const Matrix& p) {
  if (a.is_zero()) return ScaledMatrix::zero(a.mat.rows(), p.cols());
  ScaledMatrix r = ScaledMatrix::from_dense(a.mat * p);
  if (!r.is_zero()) r.log_scale += a.log_scale;
  return r;
}

inline ScaledMatrix operator*(const Matrix& p, const ScaledMatrix& a) {
  if (a.is_zero()) return ScaledMatrix::zero(p.rows(), a.mat.cols());
  ScaledMatrix r = ScaledMatrix::from_dense(p * a.mat);
  if (!r.is_zero()) r.log_scale += a.log_scale;
  return r;
}

// Inverse of a square scaled matrix. sigma_min guards the conditioning of the
// unit-norm factor: since ||mat|| == 1, its smallest singular value equals
// 1/cond, so the threshold is a relative one.
inline ScaledMatrix inverse(const ScaledMatrix& a, double sigma_min,
                            const std::string& what = "matrix") {
  if (a.is_zero() || a.mat.rows() != a.mat.cols())
    throw NumericError(what + " is not invertible");
  if (a.mat.rows() == 1) {
    double v = a.mat(0, 0);
    if (std::abs(v) < sigma_min) throw NumericError(what + " is numerically singular");
    return {Matrix::Constant(1, 1, v > 0 ? 1.0 : -1.0), -a.log_scale - std::log(std::abs(v))};
  }
  Eigen::JacobiSVD<Matrix> svd(a.mat, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) < sigma_min)
    throw NumericError(what + " is numerically singular (sigma_min " +
                       std::to_string(sv(sv.size() - 1)) + ")");
  Matrix inv = svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
  ScaledMatrix r = ScaledMatrix::from_dense(inv);
  r.log_scale -= a.log_scale;
  return r;
}

// Relative difference between two scaled matrices, computed without leaving
// log space for the magnitudes: ||A - B|| / max(||A||, ||B||).
inline double scaled_rel_diff(const ScaledMatrix& a, const ScaledMatrix& b) {
  if (a.is_zero() && b.is_zero()) return 0.0;
  if (a.is_zero() || b.is_zero()) return 1.0;
  double d = b.log_scale - a.log_scale;
  // Align on the larger scale so the exp factor is <= 1.
  if (d > 0) return scaled_rel_diff(b, a);
  if (d < -40) return 1.0;  // b is negligible against a but nonzero
  return spectral_norm(a.mat - std::exp(d) * b.mat);
}

// Rank with a relative singular-value threshold (matrix need not be scaled).
inline int numeric_rank(const Matrix& m, double rel_tol = 1e-9) {
  auto sv = m.jacobiSvd().singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * sv(0)) ++r;
  return r;
}

// Orthonormal basis of the kernel of a square matrix (columns), with a
// relative threshold on what counts as a zero singular value.
inline Matrix kernel_basis(const Matrix& m, double rel_tol = 1e-9) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double top = sv.size() ? sv(0) : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (top > 0 && sv(i) > rel_tol * top) ++rank;
  return svd.matrixV().rightCols(m.cols() - rank);
}

}  // namespace dichospec
