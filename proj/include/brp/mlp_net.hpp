#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace brp {

// Feed-forward scorer: an optional linear projection of the behavior block,
// concatenated with the remaining inputs, two ReLU layers and a logit output.
// Inputs are row-major with the direct block first and the behavior block last.
struct MlpShape {
  std::size_t other_inputs = 0;
  std::size_t rb_inputs = 0;
  std::size_t embed_width = 16;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;

  bool has_projection() const noexcept { return rb_inputs > 0 && embed_width > 0; }
  std::size_t input_width() const noexcept { return other_inputs + rb_inputs; }
  std::size_t concat_width() const noexcept { return other_inputs + (has_projection() ? embed_width : 0); }
  std::size_t param_count() const noexcept;
};

class MlpNet {
 public:
  explicit MlpNet(MlpShape shape);

  const MlpShape& shape() const noexcept { return shape_; }

  // He-uniform weights, zero biases.
  std::vector<double> initial_params(std::uint64_t seed) const;

  void logits(std::span<const double> params, std::span<const double> x, std::size_t n, std::span<double> out) const;

  // Mean binary cross-entropy on logits; gradient written into `grad`.
  double loss_and_gradient(std::span<const double> params, std::span<const double> x,
                           std::span<const std::uint8_t> y, std::span<double> grad) const;
  double loss(std::span<const double> params, std::span<const double> x, std::span<const std::uint8_t> y) const;

 private:
  struct Offsets {
    std::size_t P, bp, W1, b1, W2, b2, w3, b3;
  };
  MlpShape shape_;
  Offsets off_{};
};

}  // namespace brp
