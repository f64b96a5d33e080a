#pragma once

#include <Eigen/Core>

namespace unp {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Which implementation of the dense kernels to run. `parallel` splits work
/// into fixed-size chunks under OpenMP, so its results do not depend on the
/// thread count; `reference` is the plain serial loop nest kept as a test
/// oracle.
enum class Execution { parallel, reference };

namespace kernels {

/// Rows per OpenMP work item. Fixed so results are bitwise independent of
/// OMP_NUM_THREADS.
inline constexpr Eigen::Index kChunkRows = 64;

/// Y = X * W^T + 1 * b^T.   X: batch x in, W: out x in, Y: batch x out.
void dense_forward(const Matrix& x, const Matrix& w, const Vector& b, Matrix& y,
                   Execution exec = Execution::parallel);

/// dW = dZ^T * X, db = column sums of dZ.
void dense_weight_grad(const Matrix& dz, const Matrix& x, Matrix& dw, Vector& db,
                       Execution exec = Execution::parallel);

/// dX = dZ * W.
void dense_input_grad(const Matrix& dz, const Matrix& w, Matrix& dx,
                      Execution exec = Execution::parallel);

}  // namespace kernels
}  // namespace unp
