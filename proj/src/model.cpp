#include "floodlab/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace floodlab {

namespace {

constexpr char kMagic[8] = {'F', 'L', 'D', 'M', 'L', 'P', '0', '1'};

void check_shapes(const MlpParams& params) {
  if (params.layer_sizes.size() < 2) throw ParameterError("mlp: need at least 2 layer sizes");
  if (params.weights.size() + 1 != params.layer_sizes.size() ||
      params.biases.size() != params.weights.size()) {
    throw DimensionError("mlp: parameter list does not match layer_sizes");
  }
}

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw FormatError("checkpoint: unexpected end of data");
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

void put_real(std::ostream& out, double x) { put_le(out, std::bit_cast<std::uint64_t>(x)); }
double get_real(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

}  // namespace

std::size_t MlpParams::parameter_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    total += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return total;
}

MlpParams init_mlp(Rng& rng, const std::vector<std::size_t>& layer_sizes) {
  if (layer_sizes.size() < 2) throw ParameterError("init_mlp: need at least 2 layer sizes");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw ParameterError("init_mlp: layer sizes must be >= 1");
  }
  MlpParams params;
  params.layer_sizes = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const std::size_t fan_out = layer_sizes[l + 1];
    const auto draws =
        rng_gauss(rng, fan_in * fan_out, 0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    params.weights.push_back(Eigen::Map<const Matrix>(draws.data(),
                                                      static_cast<Eigen::Index>(fan_in),
                                                      static_cast<Eigen::Index>(fan_out)));
    params.biases.push_back(RowVector::Zero(static_cast<Eigen::Index>(fan_out)));
  }
  return params;
}

MlpParams zeros_like(const MlpParams& params) {
  MlpParams out;
  out.layer_sizes = params.layer_sizes;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    out.weights.push_back(Matrix::Zero(params.weights[l].rows(), params.weights[l].cols()));
    out.biases.push_back(RowVector::Zero(params.biases[l].size()));
  }
  return out;
}

ForwardResult forward(const MlpParams& params, const Matrix& x) {
  check_shapes(params);
  if (static_cast<std::size_t>(x.cols()) != params.input_dim()) {
    throw DimensionError("forward: input " + shape_string(x) + " but model expects " +
                         std::to_string(params.input_dim()) + " features");
  }
  ForwardResult result;
  result.trace.inputs.reserve(params.num_layers());
  result.trace.pre_activations.reserve(params.num_layers());
  Matrix activation = x;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    Matrix z = activation * params.weights[l];
    z.rowwise() += params.biases[l];
    result.trace.inputs.push_back(std::move(activation));
    const bool hidden = l + 1 < params.num_layers();
    activation = hidden ? Matrix(z.cwiseMax(0.0)) : z;
    result.trace.pre_activations.push_back(std::move(z));
  }
  result.logits = std::move(activation);
  return result;
}

Matrix predict_logits(const MlpParams& params, const Matrix& x) {
  return forward(params, x).logits;
}

MlpParams backward(const MlpParams& params, const ForwardTrace& trace,
                   const Matrix& grad_logits) {
  check_shapes(params);
  const std::size_t layers = params.num_layers();
  if (trace.inputs.size() != layers || trace.pre_activations.size() != layers) {
    throw DimensionError("backward: trace does not match the model depth");
  }
  const Matrix& logits_pre = trace.pre_activations.back();
  if (grad_logits.rows() != logits_pre.rows() || grad_logits.cols() != logits_pre.cols()) {
    throw DimensionError("backward: grad_logits " + shape_string(grad_logits) +
                         " does not match logits " + shape_string(logits_pre));
  }
  MlpParams grads;
  grads.layer_sizes = params.layer_sizes;
  grads.weights.resize(layers);
  grads.biases.resize(layers);
  Matrix delta = grad_logits;
  for (std::size_t l = layers; l-- > 0;) {
    grads.weights[l] = trace.inputs[l].transpose() * delta;
    grads.biases[l] = delta.colwise().sum();
    if (l > 0) {
      Matrix upstream = delta * params.weights[l].transpose();
      delta = (trace.pre_activations[l - 1].array() > 0.0).select(upstream.array(), 0.0).matrix();
    }
  }
  return grads;
}

std::vector<double> flatten(const MlpParams& params) {
  std::vector<double> out;
  out.reserve(params.parameter_count());
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    out.insert(out.end(), params.weights[l].data(),
               params.weights[l].data() + params.weights[l].size());
    out.insert(out.end(), params.biases[l].data(),
               params.biases[l].data() + params.biases[l].size());
  }
  return out;
}

void unflatten(std::span<const double> values, MlpParams& params) {
  if (values.size() != params.parameter_count()) {
    throw DimensionError("unflatten: " + std::to_string(values.size()) + " values for " +
                         std::to_string(params.parameter_count()) + " parameters");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    auto& w = params.weights[l];
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), w.size(), w.data());
    offset += static_cast<std::size_t>(w.size());
    auto& b = params.biases[l];
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), b.size(), b.data());
    offset += static_cast<std::size_t>(b.size());
  }
}

bool all_finite(const MlpParams& params) {
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    if (!params.weights[l].allFinite() || !params.biases[l].allFinite()) return false;
  }
  return true;
}

void save_checkpoint(std::ostream& out, const MlpParams& params) {
  check_shapes(params);
  out.write(kMagic, sizeof(kMagic));
  put_le(out, static_cast<std::uint32_t>(params.layer_sizes.size()));
  for (std::size_t s : params.layer_sizes) put_le(out, static_cast<std::uint64_t>(s));
  for (double x : flatten(params)) put_real(out, x);
  if (!out) throw FormatError("checkpoint: write failed");
}

MlpParams load_checkpoint(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("checkpoint: bad magic (expected FLDMLP01)");
  }
  const auto count = get_le<std::uint32_t>(in);
  if (count < 2 || count > 1024) {
    throw FormatError("checkpoint: implausible layer count " + std::to_string(count));
  }
  std::vector<std::size_t> sizes(count);
  for (auto& s : sizes) {
    s = static_cast<std::size_t>(get_le<std::uint64_t>(in));
    if (s == 0) throw FormatError("checkpoint: zero layer size");
  }
  MlpParams params;
  params.layer_sizes = sizes;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    params.weights.emplace_back(static_cast<Eigen::Index>(sizes[l]),
                                static_cast<Eigen::Index>(sizes[l + 1]));
    params.biases.emplace_back(static_cast<Eigen::Index>(sizes[l + 1]));
  }
  std::vector<double> values(params.parameter_count());
  for (auto& v : values) v = get_real(in);
  unflatten(values, params);
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  save_checkpoint(out, params);
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace floodlab
