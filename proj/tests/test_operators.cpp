#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lflow/operators.hpp"

using namespace lflow;

namespace {

RealField random_mask(SeededRng& rng, Shape shape, double keep) {
  RealField m(shape);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform() < keep ? 1.0 : 0.0;
  return m;
}

Kernel random_kernel(SeededRng& rng, std::size_t size) {
  return Kernel(gaussian_vector(rng, Shape{size, size}));
}

RealField brute_conv(const RealField& x, const Kernel& k) {
  RealField out(x.shape());
  const long h = static_cast<long>(x.height()), w = static_cast<long>(x.width());
  const long ch = static_cast<long>(k.height() / 2), cw = static_cast<long>(k.width() / 2);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      double acc = 0.0;
      for (long i = 0; i < static_cast<long>(k.height()); ++i)
        for (long j = 0; j < static_cast<long>(k.width()); ++j) {
          const long rr = ((r - (i - ch)) % h + h) % h, cc = ((c - (j - cw)) % w + w) % w;
          acc += k.taps().at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) *
                 x.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        }
      out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
    }
  return out;
}

std::vector<LinearOperator> sample_ops(SeededRng& rng) {
  Eigen::MatrixXd M(5, 9);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = rng.normal();
  return {LinearOperator::mask(random_mask(rng, Shape{12, 10}, 0.6)),
          LinearOperator::circ_conv(random_kernel(rng, 3), Shape{8, 8}),
          LinearOperator::circ_conv(random_kernel(rng, 5), Shape{16, 12}),
          LinearOperator::conv_downsample(random_kernel(rng, 3), Shape{16, 16}, 2),
          LinearOperator::conv_downsample(random_kernel(rng, 5), Shape{12, 12}, 3),
          LinearOperator::conv_downsample(random_kernel(rng, 1), Shape{1, 12}, 4),
          LinearOperator::dense(M)};
}

}  // namespace

TEST_CASE("apply examples") {
  SeededRng rng(1);
  const RealField x = gaussian_vector(rng, Shape{6, 7});
  CHECK(max_abs_diff(LinearOperator::circ_conv(Kernel::delta(), x.shape()).apply(x), x) < 1e-14);
  CHECK(max_abs_diff(LinearOperator::mask(RealField(x.shape(), 1.0)).apply(x), RealField::vector(x.data())) == 0.0);
  const auto down = LinearOperator::conv_downsample(Kernel::delta(), Shape{1, 4}, 2);
  CHECK(max_abs_diff(down.apply(RealField::vector({1, 2, 3, 4})), RealField::vector({1, 3})) < 1e-14);
  CHECK(down.output_shape() == Shape{1, 2});
}

TEST_CASE("circular convolution matches brute force and the Fourier form") {
  SeededRng rng(2);
  for (std::size_t ks : {1u, 3u, 5u}) {
    const Kernel k = random_kernel(rng, ks);
    const RealField x = gaussian_vector(rng, Shape{9, 11});
    const auto op = LinearOperator::circ_conv(k, x.shape());
    CHECK(max_abs_diff(op.apply(x), brute_conv(x, k)) < 1e-12);
    const ComplexSpectrum kh = k.spectrum(x.shape());
    ComplexSpectrum xh = dft2_forward(x);
    for (std::size_t i = 0; i < xh.size(); ++i) xh[i] *= kh[i];
    CHECK(max_abs_diff(op.apply(x), dft2_inverse(xh)) < 1e-12);
  }
}

TEST_CASE("adjoint identities") {
  SeededRng rng(3);
  for (const auto& op : sample_ops(rng)) {
    const RealField x = gaussian_vector(rng, op.input_shape());
    const RealField y = gaussian_vector(rng, op.output_shape());
    const double lhs = dot(op.apply(x), y), rhs = dot(x, op.adjoint(y));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));

    const Eigen::MatrixXd A = dense_materialize(op);
    const Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data().data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data().data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::VectorXd ax = A * xv, aty = A.transpose() * yv;
    const RealField ap = op.apply(x), at = op.adjoint(y);
    for (Eigen::Index i = 0; i < ax.size(); ++i) CHECK(std::abs(ax[i] - ap[static_cast<std::size_t>(i)]) < 1e-10);
    for (Eigen::Index i = 0; i < aty.size(); ++i) CHECK(std::abs(aty[i] - at[static_cast<std::size_t>(i)]) < 1e-10);
  }
}

TEST_CASE("circular convolution adjoint is the reversed kernel") {
  SeededRng rng(4);
  const Kernel k = random_kernel(rng, 3);
  const auto op = LinearOperator::circ_conv(k, Shape{8, 8});
  const auto rev = LinearOperator::circ_conv(k.reversed(), Shape{8, 8});
  const Eigen::MatrixXd A = dense_materialize(op), R = dense_materialize(rev);
  CHECK((A.transpose() - R).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("mask operator") {
  SeededRng rng(5);
  const RealField m = random_mask(rng, Shape{6, 6}, 0.5);
  const auto op = LinearOperator::mask(m);
  const RealField y = gaussian_vector(rng, op.output_shape());
  CHECK(max_abs_diff(op.apply(op.adjoint(y)), y) == 0.0);
  const Eigen::MatrixXd A = dense_materialize(op);
  CHECK(A.rows() == static_cast<Eigen::Index>(op.support().size()));
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    CHECK(A.row(r).sum() == 1.0);
    CHECK(A.row(r).maxCoeff() == 1.0);
  }
  RealField bad(Shape{2, 2}, 1.0);
  bad[1] = 0.5;
  CHECK_THROWS_AS(LinearOperator::mask(bad), Error);
}

TEST_CASE("dense materialisation") {
  const auto id = LinearOperator::circ_conv(Kernel::delta(), Shape{4, 4});
  CHECK((dense_materialize(id) - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-14);
  SeededRng rng(6);
  const auto op = LinearOperator::circ_conv(random_kernel(rng, 3), Shape{4, 4});
  const RealField x = gaussian_vector(rng, op.input_shape());
  const Eigen::VectorXd ax =
      dense_materialize(op) * Eigen::Map<const Eigen::VectorXd>(x.data().data(), static_cast<Eigen::Index>(x.size()));
  const RealField ap = op.apply(x);
  for (Eigen::Index i = 0; i < ax.size(); ++i) CHECK(std::abs(ax[i] - ap[static_cast<std::size_t>(i)]) < 1e-12);
  CHECK_THROWS_AS(dense_materialize(LinearOperator::circ_conv(Kernel::delta(), Shape{65, 64})), Error);
}

TEST_CASE("shape mismatches are rejected") {
  const auto op = LinearOperator::circ_conv(Kernel::delta(), Shape{4, 4});
  CHECK_THROWS_AS(op.apply(RealField(Shape{4, 5})), Error);
  CHECK_THROWS_AS(op.adjoint(RealField(Shape{3, 4})), Error);
  CHECK_THROWS_AS(LinearOperator::conv_downsample(Kernel::delta(), Shape{5, 4}, 2), Error);
  CHECK_THROWS_AS(LinearOperator::conv_downsample(Kernel::delta(), Shape{1, 5}, 2), Error);
  CHECK_THROWS_AS(Kernel(RealField(Shape{2, 3}, 1.0)), Error);
}

TEST_CASE("block downsampling equivalence") {
  CHECK(block_downsample_check(16, 1) == 0.0);
  for (std::size_t n = 2; n <= 64; ++n)
    for (std::size_t s = 2; s <= n; ++s)
      if (n % s == 0) CHECK(block_downsample_check(n, s, n + s) < 1e-10);
  CHECK_THROWS_AS(block_downsample_check(10, 3), Error);
}

TEST_CASE("Gaussian kernel") {
  for (std::size_t size : {1u, 3u, 9u, 61u}) CHECK(std::abs(build_gaussian_kernel(size, 1.5).sum() - 1.0) < 1e-12);
  const Kernel d = build_gaussian_kernel(1, 2.0);
  CHECK(d.taps()[0] == 1.0);
  const Kernel k = build_gaussian_kernel(3, 1.0);
  CHECK(std::abs(k.taps().at(1, 1) / k.taps().at(1, 0) - std::exp(0.5)) < 1e-6);
  CHECK_THROWS_AS(build_gaussian_kernel(4, 1.0), Error);
  CHECK_THROWS_AS(build_gaussian_kernel(3, 0.0), Error);
}

TEST_CASE("motion kernel") {
  const Kernel d = build_motion_kernel(5, 0.3, 1);
  CHECK(d.taps().at(2, 2) == doctest::Approx(1.0));
  CHECK(d.sum() == doctest::Approx(1.0));
  const Kernel h = build_motion_kernel(5, 0.0, 3);
  for (std::size_t c = 0; c < 5; ++c)
    for (std::size_t r = 0; r < 5; ++r) {
      const double want = (r == 2 && c >= 1 && c <= 3) ? 1.0 / 3.0 : 0.0;
      CHECK(std::abs(h.taps().at(r, c) - want) < 1e-15);
    }
  for (double angle : {0.0, 0.4, 0.785, 1.3, 2.9})
    for (std::size_t len : {1u, 3u, 5u, 9u}) CHECK(std::abs(build_motion_kernel(9, angle, len).sum() - 1.0) < 1e-12);
  CHECK_THROWS_AS(build_motion_kernel(5, 0.0, 7), Error);
}

TEST_CASE("bicubic kernel") {
  const Kernel k = build_bicubic_kernel(2);
  CHECK(k.height() == 7);
  CHECK(k.is_normalized());
  CHECK(std::abs(k.taps().at(3, 2) - k.taps().at(3, 4)) < 1e-15);
}

TEST_CASE("box mask") {
  CHECK(build_box_mask(Shape{8, 8}, Box{0, 0, 0, 0}).values().size() == 64);
  const RealField none = build_box_mask(Shape{8, 8}, Box{2, 2, 0, 0});
  for (double v : none.values()) CHECK(v == 1.0);
  const RealField all = build_box_mask(Shape{8, 8}, Box{0, 0, 8, 8});
  for (double v : all.values()) CHECK(v == 0.0);
  const RealField centred = build_box_mask(Shape{64, 64}, Box{16, 16, 32, 32});
  std::size_t zeros = 0, ones = 0;
  for (double v : centred.values()) (v == 0.0 ? zeros : ones) += 1;
  CHECK(zeros == 32 * 32);
  CHECK(ones == 64 * 64 - 32 * 32);
  CHECK_THROWS_AS(build_box_mask(Shape{8, 8}, Box{4, 4, 5, 2}), Error);
}

TEST_CASE("grid text format round trips exactly") {
  SeededRng rng(8);
  const RealField g = gaussian_vector(rng, Shape{3, 4});
  CHECK(parse_grid(format_grid(g)).data() == g.data());
  const auto path = std::filesystem::temp_directory_path() / "lflow_grid_test.txt";
  write_grid(path, g);
  CHECK(read_grid(path).data() == g.data());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(parse_grid("2 2\n1 2\n3\n"), Error);
}
