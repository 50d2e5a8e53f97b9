#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "floodlab/numkit.hpp"

namespace floodlab {

/// Multilayer perceptron R^d -> R^K: ReLU on hidden layers, identity output.
/// Layer l maps layer_sizes[l] inputs to layer_sizes[l+1] outputs through
/// weights[l] (in x out) and biases[l] (1 x out).
///
/// Gradients use the same type, so "gradient shaped like the parameters" is
/// literal.
struct MlpParams {
  std::vector<std::size_t> layer_sizes;
  std::vector<Matrix> weights;
  std::vector<RowVector> biases;

  std::size_t num_layers() const { return weights.size(); }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t parameter_count() const;

  bool operator==(const MlpParams&) const = default;
};

/// Per-layer pre-activations and the activations that fed each layer;
/// inputs[0] is the batch itself.
struct ForwardTrace {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
};

struct ForwardResult {
  Matrix logits;
  ForwardTrace trace;
};

/// He-normal weights (std = sqrt(2 / fan_in)) and zero biases.
MlpParams init_mlp(Rng& rng, const std::vector<std::size_t>& layer_sizes);

/// Same shapes, all entries zero.
MlpParams zeros_like(const MlpParams& params);

ForwardResult forward(const MlpParams& params, const Matrix& x);

/// Logits only, without retaining the trace.
Matrix predict_logits(const MlpParams& params, const Matrix& x);

/// Reverse-mode gradient of sum(grad_logits .* logits) with respect to every
/// parameter. ReLU'(0) is taken as 0.
MlpParams backward(const MlpParams& params, const ForwardTrace& trace, const Matrix& grad_logits);

/// Row-major weights then bias, layer by layer.
std::vector<double> flatten(const MlpParams& params);
void unflatten(std::span<const double> values, MlpParams& params);

bool all_finite(const MlpParams& params);

// Checkpoint format (little-endian throughout):
//   8 bytes  magic "FLDMLP01"
//   u32      number of layer sizes (L + 1)
//   u64 x (L + 1) layer sizes
//   per layer: weights (in x out) row-major f64, then biases (out) f64
void save_checkpoint(std::ostream& out, const MlpParams& params);
MlpParams load_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const MlpParams& params);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace floodlab
