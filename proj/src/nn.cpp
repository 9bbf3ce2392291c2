#include "nn.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace gcrl::nn {

namespace {

void check_mul(std::size_t an, std::size_t bn, const char* what) {
    if (an != bn) {
        throw InputError(std::string("matmul shape mismatch in ") + what);
    }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_mul(a.cols, b.rows, "matmul");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    check_mul(a.cols, b.cols, "matmul_bt");
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) {
                acc += arow[k] * brow[k];
            }
            crow[j] = acc;
        }
    }
    return c;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
    check_mul(a.rows, b.rows, "matmul_at");
    Matrix c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            double* crow = c.row(i);
            for (std::size_t j = 0; j < b.cols; ++j) {
                crow[j] += aki * brow[j];
            }
        }
    }
    return c;
}

void assert_finite(const Matrix& m, const char* context) {
    for (double x : m.data) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string("non-finite value in ") + context);
        }
    }
}

void assert_finite(const Vec& v, const char* context) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string("non-finite value in ") + context);
        }
    }
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes, OutputHead head)
    : layer_sizes_(std::move(layer_sizes)), head_(head) {
    if (layer_sizes_.size() < 2) {
        throw InputError("Mlp needs at least input and output layer sizes");
    }
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        w_offsets_.push_back(total);
        total += layer_sizes_[l + 1] * layer_sizes_[l];
        b_offsets_.push_back(total);
        total += layer_sizes_[l + 1];
    }
    params_.assign(total, 0.0);
}

void Mlp::init_params(Rng& rng) {
    // He-style uniform fan-in init; biases zero.
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        const double bound = std::sqrt(2.0 / static_cast<double>(layer_sizes_[l]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        const std::size_t n = layer_sizes_[l + 1] * layer_sizes_[l];
        for (std::size_t i = 0; i < n; ++i) {
            params_[w_offsets_[l] + i] = dist(rng);
        }
        for (std::size_t i = 0; i < layer_sizes_[l + 1]; ++i) {
            params_[b_offsets_[l] + i] = 0.0;
        }
    }
}

Matrix Mlp::forward(const Matrix& input, ForwardCache* cache) const {
    if (input.cols != input_dim()) {
        throw InputError("forward: input has " + std::to_string(input.cols) +
                         " columns, network expects " + std::to_string(input_dim()));
    }
    if (cache) {
        cache->input = input;
        cache->pre.clear();
        cache->post.clear();
    }
    Matrix act = input;
    const std::size_t n_layers = layer_sizes_.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::size_t in = layer_sizes_[l];
        const std::size_t out = layer_sizes_[l + 1];
        Matrix w;
        w.rows = out;
        w.cols = in;
        w.data.assign(params_.begin() + static_cast<std::ptrdiff_t>(w_offsets_[l]),
                      params_.begin() + static_cast<std::ptrdiff_t>(w_offsets_[l] + out * in));
        Matrix z = matmul_bt(act, w);
        const double* bias = params_.data() + b_offsets_[l];
        for (std::size_t r = 0; r < z.rows; ++r) {
            double* zr = z.row(r);
            for (std::size_t c = 0; c < out; ++c) {
                zr[c] += bias[c];
            }
        }
        if (cache) cache->pre.push_back(z);
        if (l + 1 < n_layers) {
            for (double& x : z.data) {
                if (x < 0.0) x = 0.0;
            }
        }
        if (cache) cache->post.push_back(z);
        act = std::move(z);
    }
    assert_finite(act, "Mlp::forward output");
    return act;
}

Vec Mlp::forward(const Vec& input) const {
    Matrix m(1, input.size());
    m.data = input;
    Matrix out = forward(m);
    return out.data;
}

Vec Mlp::backward(const ForwardCache& cache, const Matrix& output_grad,
                  Matrix* input_grad) const {
    const std::size_t n_layers = layer_sizes_.size() - 1;
    if (cache.pre.size() != n_layers) {
        throw StateError("backward called without a matching forward cache");
    }
    if (output_grad.rows != cache.input.rows || output_grad.cols != output_dim()) {
        throw InputError("backward: output_grad shape mismatch");
    }
    Vec grad(params_.size(), 0.0);
    Matrix delta = output_grad;
    for (std::size_t l = n_layers; l-- > 0;) {
        const std::size_t in = layer_sizes_[l];
        const std::size_t out = layer_sizes_[l + 1];
        if (l + 1 < n_layers) {
            // ReLU mask from this layer's pre-activation.
            const Matrix& z = cache.pre[l];
            for (std::size_t i = 0; i < delta.data.size(); ++i) {
                if (z.data[i] <= 0.0) delta.data[i] = 0.0;
            }
        }
        const Matrix& below = (l == 0) ? cache.input : cache.post[l - 1];
        // dW = delta^T * below
        Matrix dw = matmul_at(delta, below);
        for (std::size_t i = 0; i < out * in; ++i) {
            grad[w_offsets_[l] + i] = dw.data[i];
        }
        double* db = grad.data() + b_offsets_[l];
        for (std::size_t r = 0; r < delta.rows; ++r) {
            const double* dr = delta.row(r);
            for (std::size_t c = 0; c < out; ++c) {
                db[c] += dr[c];
            }
        }
        if (l > 0 || input_grad) {
            Matrix w;
            w.rows = out;
            w.cols = in;
            w.data.assign(params_.begin() + static_cast<std::ptrdiff_t>(w_offsets_[l]),
                          params_.begin() + static_cast<std::ptrdiff_t>(w_offsets_[l] + out * in));
            Matrix next = matmul(delta, w);
            if (l == 0) {
                *input_grad = std::move(next);
            } else {
                delta = std::move(next);
            }
        }
    }
    return grad;
}

void AdamState::apply(Vec& params, const Vec& grads) {
    if (params.size() != m.size() || grads.size() != m.size()) {
        throw InputError("adam_step: shape mismatch");
    }
    step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

SampleResult gaussian_tanh_sample(const Vec& head_output, const Vec& noise) {
    if (head_output.size() % 2 != 0 || head_output.size() / 2 != noise.size()) {
        throw InputError("gaussian_tanh_sample: head/noise size mismatch");
    }
    assert_finite(head_output, "gaussian_tanh_sample head");
    const std::size_t dim = noise.size();
    SampleResult res;
    res.action.resize(dim);
    constexpr double kLogTwoPi = 1.8378770664093454836;  // log(2*pi)
    for (std::size_t i = 0; i < dim; ++i) {
        const double mean = head_output[i];
        double log_std = head_output[dim + i];
        if (log_std < kLogStdMin) log_std = kLogStdMin;
        if (log_std > kLogStdMax) log_std = kLogStdMax;
        const double std = std::exp(log_std);
        const double u = mean + std * noise[i];
        const double a = std::tanh(u);
        res.action[i] = a;
        // Gaussian log-density of u plus the tanh change-of-variables term.
        // log(1 - tanh(u)^2) = 2*(log 2 - u - softplus(-2u)) is stable for
        // large |u|.
        const double gauss = -0.5 * noise[i] * noise[i] - 0.5 * kLogTwoPi - log_std;
        const double log1m_a2 =
            2.0 * (std::log(2.0) - u - std::log1p(std::exp(-2.0 * u)));
        res.log_prob += gauss - log1m_a2;
    }
    return res;
}

void save_mlp(std::ostream& out, const Mlp& net) {
    out << "gcrl-mlp " << (net.head() == OutputHead::Identity ? "identity" : "tanh_gaussian")
        << ' ' << net.layer_sizes().size();
    for (std::size_t s : net.layer_sizes()) out << ' ' << s;
    out << '\n';
    char buf[32];
    for (double p : net.params()) {
        std::snprintf(buf, sizeof(buf), "%.17g", p);
        out << buf << '\n';
    }
}

Mlp load_mlp(std::istream& in) {
    std::string magic, head_name;
    std::size_t n = 0;
    in >> magic >> head_name >> n;
    if (!in || magic != "gcrl-mlp" || n < 2) {
        throw IoError("invalid mlp checkpoint header");
    }
    std::vector<std::size_t> sizes(n);
    for (auto& s : sizes) in >> s;
    OutputHead head = head_name == "identity" ? OutputHead::Identity : OutputHead::TanhGaussian;
    Mlp net(sizes, head);
    for (double& p : net.params()) {
        if (!(in >> p)) throw IoError("truncated mlp checkpoint");
    }
    return net;
}

void save_adam(std::ostream& out, const AdamState& st) {
    out << "gcrl-adam " << st.step << ' ' << st.m.size() << ' ';
    char buf[32];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        out << buf;
    };
    put(st.lr); out << ' ';
    put(st.beta1); out << ' ';
    put(st.beta2); out << ' ';
    put(st.eps); out << '\n';
    for (std::size_t i = 0; i < st.m.size(); ++i) {
        put(st.m[i]); out << ' ';
        put(st.v[i]); out << '\n';
    }
}

AdamState load_adam(std::istream& in) {
    std::string magic;
    std::uint64_t step = 0;
    std::size_t n = 0;
    in >> magic >> step >> n;
    if (!in || magic != "gcrl-adam") throw IoError("invalid adam checkpoint header");
    AdamState st(n);
    st.step = step;
    in >> st.lr >> st.beta1 >> st.beta2 >> st.eps;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(in >> st.m[i] >> st.v[i])) throw IoError("truncated adam checkpoint");
    }
    return st;
}

}  // namespace gcrl::nn
