#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"

namespace gcrl::nn {

using Vec = std::vector<double>;
using Rng = std::mt19937_64;

// Dense row-major matrix of doubles. Rows are batch entries throughout the
// training code.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_bt(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_at(const Matrix& a, const Matrix& b);

void assert_finite(const Matrix& m, const char* context);
void assert_finite(const Vec& v, const char* context);

enum class OutputHead {
    Identity,
    // Output vector is [mean..., log_std...]; sampling handled by
    // gaussian_tanh_sample.
    TanhGaussian,
};

// Per-input activations kept for the backward pass.
struct ForwardCache {
    Matrix input;
    std::vector<Matrix> pre;   // pre-activation per layer
    std::vector<Matrix> post;  // post-activation per layer (last == pre.back())
};

// Fully connected network, ReLU hidden layers. Parameters live in one flat
// vector: for each layer, the weight matrix (out x in, row-major) followed by
// the bias. Gradients, Adam buffers and checkpoints all share this ordering.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<std::size_t> layer_sizes, OutputHead head);

    void init_params(Rng& rng);

    std::size_t input_dim() const { return layer_sizes_.front(); }
    std::size_t output_dim() const { return layer_sizes_.back(); }
    std::size_t param_count() const { return params_.size(); }
    const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
    OutputHead head() const { return head_; }

    Vec& params() { return params_; }
    const Vec& params() const { return params_; }

    // Batched forward. Each row of `input` is one sample.
    Matrix forward(const Matrix& input, ForwardCache* cache = nullptr) const;
    Vec forward(const Vec& input) const;

    // Backprop from output gradients to a flat parameter gradient. If
    // `input_grad` is non-null it also receives dLoss/dInput. The cache must
    // come from a forward() call on this network.
    Vec backward(const ForwardCache& cache, const Matrix& output_grad,
                 Matrix* input_grad = nullptr) const;

    std::size_t weight_offset(std::size_t layer) const { return w_offsets_[layer]; }
    std::size_t bias_offset(std::size_t layer) const { return b_offsets_[layer]; }

private:
    std::vector<std::size_t> layer_sizes_;
    OutputHead head_ = OutputHead::Identity;
    Vec params_;
    std::vector<std::size_t> w_offsets_;
    std::vector<std::size_t> b_offsets_;
};

// Bias-corrected Adam over a flat parameter vector.
struct AdamState {
    std::uint64_t step = 0;
    Vec m;
    Vec v;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n = 0, double learning_rate = 1e-3)
        : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}

    void apply(Vec& params, const Vec& grads);
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

// Squashed-Gaussian policy head. `head_output` is [mean..., log_std...]
// (log_std clamped to [kLogStdMin, kLogStdMax]); `noise` is a standard-normal
// draw per action dimension. Returns the tanh-squashed action and its log
// density including the change-of-variables correction.
struct SampleResult {
    Vec action;
    double log_prob = 0.0;
};
SampleResult gaussian_tanh_sample(const Vec& head_output, const Vec& noise);

// Checkpoint format (text): line 1 "gcrl-mlp <head> <n> <size0> ... <sizeN-1>",
// then one parameter per line printed with round-trip precision.
void save_mlp(std::ostream& out, const Mlp& net);
Mlp load_mlp(std::istream& in);
void save_adam(std::ostream& out, const AdamState& st);
AdamState load_adam(std::istream& in);

}  // namespace gcrl::nn
