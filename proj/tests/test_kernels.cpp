#include <gtest/gtest.h>
#include <omp.h>

#include "unp/kernels.hpp"
#include "unp/rng.hpp"

using namespace unp;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Naive triple loops, independent of both library paths.
Matrix naive_forward(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix y(x.rows(), w.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index o = 0; o < w.rows(); ++o) {
      double acc = b(o);
      for (Eigen::Index k = 0; k < x.cols(); ++k) acc += x(i, k) * w(o, k);
      y(i, o) = acc;
    }
  return y;
}

}  // namespace

class KernelShapes : public ::testing::TestWithParam<std::tuple<int, int, int>> {};

TEST_P(KernelShapes, ParallelMatchesReference) {
  const auto [batch, in, out] = GetParam();
  Rng rng(batch * 1000 + in * 10 + out);
  const Matrix x = random_matrix(batch, in, rng);
  const Matrix w = random_matrix(out, in, rng);
  const Vector b = random_matrix(out, 1, rng).col(0);
  const Matrix dz = random_matrix(batch, out, rng);

  Matrix yp, yr;
  kernels::dense_forward(x, w, b, yp, Execution::parallel);
  kernels::dense_forward(x, w, b, yr, Execution::reference);
  const Matrix yn = naive_forward(x, w, b);
  EXPECT_LT((yp - yr).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((yr - yn).cwiseAbs().maxCoeff(), 1e-12);

  Matrix dwp, dwr;
  Vector dbp, dbr;
  kernels::dense_weight_grad(dz, x, dwp, dbp, Execution::parallel);
  kernels::dense_weight_grad(dz, x, dwr, dbr, Execution::reference);
  ASSERT_EQ(dwp.rows(), out);
  ASSERT_EQ(dwp.cols(), in);
  EXPECT_LT((dwp - dwr).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LT((dbp - dbr).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LT((dwr - Matrix(dz.transpose() * x)).cwiseAbs().maxCoeff(), 1e-11);

  Matrix dxp, dxr;
  kernels::dense_input_grad(dz, w, dxp, Execution::parallel);
  kernels::dense_input_grad(dz, w, dxr, Execution::reference);
  EXPECT_LT((dxp - dxr).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((dxr - Matrix(dz * w)).cwiseAbs().maxCoeff(), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Shapes, KernelShapes,
                         ::testing::Values(std::make_tuple(1, 1, 1), std::make_tuple(1, 4, 16),
                                           std::make_tuple(63, 5, 7), std::make_tuple(64, 16, 32),
                                           std::make_tuple(65, 32, 2), std::make_tuple(128, 4, 128),
                                           std::make_tuple(300, 256, 1)));

TEST(Kernels, ThreadCountDoesNotChangeBits) {
  Rng rng(7);
  const Matrix x = random_matrix(257, 33, rng);
  const Matrix w = random_matrix(19, 33, rng);
  const Vector b = random_matrix(19, 1, rng).col(0);
  const Matrix dz = random_matrix(257, 19, rng);
  const int saved = omp_get_max_threads();

  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    Matrix y, dw, dx;
    Vector db;
    kernels::dense_forward(x, w, b, y);
    kernels::dense_weight_grad(dz, x, dw, db);
    kernels::dense_input_grad(dz, w, dx);
    return std::make_tuple(y, dw, db, dx);
  };
  const auto one = run(1);
  const auto four = run(4);
  omp_set_num_threads(saved);
  EXPECT_EQ(std::get<0>(one), std::get<0>(four));
  EXPECT_EQ(std::get<1>(one), std::get<1>(four));
  EXPECT_EQ(std::get<2>(one), std::get<2>(four));
  EXPECT_EQ(std::get<3>(one), std::get<3>(four));
}

TEST(Kernels, RejectsMismatchedShapes) {
  Matrix x(4, 3), w(2, 5), y;
  Vector b(2);
  x.setZero();
  w.setZero();
  b.setZero();
  EXPECT_THROW(kernels::dense_forward(x, w, b, y), std::invalid_argument);
}
