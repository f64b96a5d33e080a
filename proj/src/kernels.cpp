#include "unp/kernels.hpp"

#include <algorithm>
#include <stdexcept>

namespace unp::kernels {

namespace {

Eigen::Index chunk_count(Eigen::Index rows) { return (rows + kChunkRows - 1) / kChunkRows; }

void reference_forward(const Matrix& x, const Matrix& w, const Vector& b, Matrix& y) {
  const Eigen::Index batch = x.rows(), in = x.cols(), out = w.rows();
  for (Eigen::Index r = 0; r < batch; ++r)
    for (Eigen::Index o = 0; o < out; ++o) {
      double acc = b(o);
      for (Eigen::Index i = 0; i < in; ++i) acc += x(r, i) * w(o, i);
      y(r, o) = acc;
    }
}

void reference_weight_grad(const Matrix& dz, const Matrix& x, Matrix& dw, Vector& db) {
  const Eigen::Index batch = x.rows(), in = x.cols(), out = dz.cols();
  for (Eigen::Index o = 0; o < out; ++o) {
    double bias_acc = 0.0;
    for (Eigen::Index r = 0; r < batch; ++r) bias_acc += dz(r, o);
    db(o) = bias_acc;
    for (Eigen::Index i = 0; i < in; ++i) {
      double acc = 0.0;
      for (Eigen::Index r = 0; r < batch; ++r) acc += dz(r, o) * x(r, i);
      dw(o, i) = acc;
    }
  }
}

void reference_input_grad(const Matrix& dz, const Matrix& w, Matrix& dx) {
  const Eigen::Index batch = dz.rows(), in = w.cols(), out = w.rows();
  for (Eigen::Index r = 0; r < batch; ++r)
    for (Eigen::Index i = 0; i < in; ++i) {
      double acc = 0.0;
      for (Eigen::Index o = 0; o < out; ++o) acc += dz(r, o) * w(o, i);
      dx(r, i) = acc;
    }
}

}  // namespace

void dense_forward(const Matrix& x, const Matrix& w, const Vector& b, Matrix& y, Execution exec) {
  if (x.cols() != w.cols() || b.size() != w.rows())
    throw std::invalid_argument("dense_forward: shape mismatch");
  y.resize(x.rows(), w.rows());
  if (exec == Execution::reference) return reference_forward(x, w, b, y);

  const Eigen::Index chunks = chunk_count(x.rows());
#pragma omp parallel for schedule(static) if (chunks > 1)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index r0 = c * kChunkRows;
    const Eigen::Index n = std::min(kChunkRows, x.rows() - r0);
    y.middleRows(r0, n).noalias() = x.middleRows(r0, n) * w.transpose();
    y.middleRows(r0, n).rowwise() += b.transpose();
  }
}

void dense_weight_grad(const Matrix& dz, const Matrix& x, Matrix& dw, Vector& db, Execution exec) {
  if (dz.rows() != x.rows()) throw std::invalid_argument("dense_weight_grad: batch mismatch");
  dw.resize(dz.cols(), x.cols());
  db.resize(dz.cols());
  if (exec == Execution::reference) return reference_weight_grad(dz, x, dw, db);

  const Eigen::Index chunks = chunk_count(dz.cols());
#pragma omp parallel for schedule(static) if (chunks > 1)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index o0 = c * kChunkRows;
    const Eigen::Index n = std::min(kChunkRows, dz.cols() - o0);
    dw.middleRows(o0, n).noalias() = dz.middleCols(o0, n).transpose() * x;
    db.segment(o0, n) = dz.middleCols(o0, n).colwise().sum().transpose();
  }
}

void dense_input_grad(const Matrix& dz, const Matrix& w, Matrix& dx, Execution exec) {
  if (dz.cols() != w.rows()) throw std::invalid_argument("dense_input_grad: shape mismatch");
  dx.resize(dz.rows(), w.cols());
  if (exec == Execution::reference) return reference_input_grad(dz, w, dx);

  const Eigen::Index chunks = chunk_count(dz.rows());
#pragma omp parallel for schedule(static) if (chunks > 1)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index r0 = c * kChunkRows;
    const Eigen::Index n = std::min(kChunkRows, dz.rows() - r0);
    dx.middleRows(r0, n).noalias() = dz.middleRows(r0, n) * w;
  }
}

}  // namespace unp::kernels
