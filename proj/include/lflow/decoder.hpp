#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <memory>

#include "lflow/field.hpp"

namespace lflow {

/// Latent-to-data map with exact Jacobian products. The linear family
/// (Identity, DiagonalScale, LinearMatrix) makes the first-order expansion
/// around the posterior mean exact; External wraps user callbacks for a
/// nonlinear decoder.
class DecoderSpec {
 public:
  enum class Kind { Identity, DiagonalScale, LinearMatrix, External };

  struct Callbacks {
    std::function<RealField(const RealField&)> decode;
    std::function<RealField(const RealField&)> encode;
    std::function<RealField(const RealField& at, const RealField& u)> jvp;
    std::function<RealField(const RealField& at, const RealField& w)> vjp;
  };

  static DecoderSpec identity();
  static DecoderSpec diagonal_scale(RealField scale);
  /// `matrix` is d_x x d_z; data is reshaped to `data_shape`, latents to `latent_shape`.
  static DecoderSpec linear_matrix(Eigen::MatrixXd matrix, Shape data_shape = {}, Shape latent_shape = {});
  static DecoderSpec linear_from_grid(const std::filesystem::path& path);
  static DecoderSpec external(Callbacks callbacks, bool isometric = false);

  Kind kind() const { return kind_; }
  /// True when J J^T = I on the decoder's range.
  bool isometric() const { return isometric_; }
  const RealField& scale() const { return scale_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

  RealField decode(const RealField& z) const;
  /// Left inverse on the decoder's range (ridge 1e-10 least squares for LinearMatrix).
  RealField encode(const RealField& x) const;
  RealField jvp(const RealField& at, const RealField& u) const;
  RealField vjp(const RealField& at, const RealField& w) const;

 private:
  DecoderSpec() = default;

  Kind kind_ = Kind::Identity;
  bool isometric_ = true;
  RealField scale_;
  Eigen::MatrixXd matrix_;
  Shape data_shape_;
  Shape latent_shape_;
  std::shared_ptr<const Eigen::LDLT<Eigen::MatrixXd>> normal_factor_;
  std::shared_ptr<const Callbacks> callbacks_;
};

inline RealField decode(const DecoderSpec& d, const RealField& z) { return d.decode(z); }
inline RealField encode(const DecoderSpec& d, const RealField& x) { return d.encode(x); }
inline RealField jvp(const DecoderSpec& d, const RealField& at, const RealField& u) { return d.jvp(at, u); }
inline RealField vjp(const DecoderSpec& d, const RealField& at, const RealField& w) { return d.vjp(at, w); }

}  // namespace lflow
