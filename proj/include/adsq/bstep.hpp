#pragma once

#include <functional>
#include <string>

#include "adsq/data_model.hpp"
#include "adsq/errors.hpp"

namespace adsq {

// Discrete codes in {-1,+1}^{n x k_half} owned by one image network.
struct CodeMatrix {
  Matrix b;
  char owner = 'x';

  Index rows() const { return b.rows(); }
  Index cols() const { return b.cols(); }

  void check() const {
    if (!((b.array() == 1.0) || (b.array() == -1.0)).all()) throw DomainError("code entries must be exactly +-1");
  }

  bool operator==(const CodeMatrix& o) const { return owner == o.owner && b == o.b; }
};

// sign with sign(0) = +1.
inline Matrix sign_matrix(const Matrix& m) {
  return m.unaryExpr([](double x) { return x >= 0.0 ? 1.0 : -1.0; });
}

inline CodeMatrix codes_from(const Matrix& u, char owner) { return {sign_matrix(u), owner}; }

// Full-set state for the column updates. P is refreshed whenever U changes.
struct BStepWorkspace {
  Matrix u;         // n x k_half
  Matrix s_signed;  // n x n
  Matrix p;         // -2 k S^T U - 2 eta U
  double eta = 0.0;

  Index k_half() const { return u.cols(); }
};

inline Matrix compute_P(const Matrix& u, const Matrix& s_signed, double eta) {
  if (s_signed.rows() != u.rows() || s_signed.cols() != u.rows()) throw ShapeError("compute_P: shape mismatch");
  const double k = static_cast<double>(u.cols());
  return -2.0 * k * s_signed.transpose() * u - 2.0 * eta * u;
}

inline Matrix compute_P(const Matrix& u, const SimilarityMatrix& s, double eta) {
  const double k = static_cast<double>(u.cols());
  return -2.0 * k * s.signed_transpose_times(u) - 2.0 * eta * u;
}

inline BStepWorkspace make_workspace(Matrix u, Matrix s_signed, double eta) {
  BStepWorkspace ws{std::move(u), std::move(s_signed), Matrix(), eta};
  ws.p = compute_P(ws.u, ws.s_signed, eta);
  return ws;
}

// ||U B^T - k S||_F^2 + eta ||U - B||_F^2, evaluated directly.
inline double bstep_objective(const Matrix& b, const Matrix& u, const Matrix& s_signed, double eta) {
  const double k = static_cast<double>(u.cols());
  return (u * b.transpose() - k * s_signed).squaredNorm() + eta * (u - b).squaredNorm();
}

inline double bstep_objective(const CodeMatrix& b, const BStepWorkspace& ws) {
  return bstep_objective(b.b, ws.u, ws.s_signed, ws.eta);
}

// Exact minimiser over column c with the others fixed:
// B_c = -sign(2 B~ U~^T U_c + P_c). Returns the number of flipped entries.
inline Index update_column(CodeMatrix& b, Index c, const BStepWorkspace& ws) {
  const Index k = ws.k_half();
  if (c < 0 || c >= k) throw ArgumentError("update_column: column " + std::to_string(c) + " out of range");
  if (b.rows() != ws.u.rows() || b.cols() != k) throw ShapeError("update_column: code shape mismatch");
  // U~^T U_c as a k-vector with the c-th entry zeroed stands in for dropping column c.
  Vector cross = ws.u.transpose() * ws.u.col(c);
  cross(c) = 0.0;
  const Vector q = 2.0 * b.b * cross + ws.p.col(c);
  Index flips = 0;
  for (Index i = 0; i < b.rows(); ++i) {
    const double next = q(i) >= 0.0 ? -1.0 : 1.0;
    flips += next != b.b(i, c);
    b.b(i, c) = next;
  }
  return flips;
}

// Observer invoked after every column update with (column, objective).
using ColumnObserver = std::function<void(Index, double)>;

// Cycles the columns in ascending order up to `sweeps` times, stopping after a
// sweep that changes nothing.
inline int bstep_sweep(CodeMatrix& b, const BStepWorkspace& ws, int sweeps, const ColumnObserver& observe = {}) {
  b.check();
  int done = 0;
  for (; done < sweeps; ++done) {
    Index changed = 0;
    for (Index c = 0; c < ws.k_half(); ++c) {
      changed += update_column(b, c, ws);
      if (observe) observe(c, bstep_objective(b, ws));
    }
    if (changed == 0) {
      ++done;
      break;
    }
  }
  return done;
}

inline int bstep_sweep(CodeMatrix& b, const Matrix& u, const Matrix& s_signed, double eta, int sweeps,
                       const ColumnObserver& observe = {}) {
  return bstep_sweep(b, make_workspace(u, s_signed, eta), sweeps, observe);
}

}  // namespace adsq
