#include "ifs/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace ifs {

namespace {

// value + tangent pair; pushing duals through the gradient computation
// yields the Hessian-vector product in the tangent slots.
struct Dual {
    double v = 0.0;
    double d = 0.0;

    Dual() = default;
    Dual(double value) : v(value) {}
    Dual(double value, double tangent) : v(value), d(tangent) {}
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(Dual a, Dual b) {
    double inv = 1.0 / b.v;
    return {a.v * inv, (a.d - a.v * inv * b.d) * inv};
}
inline Dual& operator+=(Dual& a, Dual b) { a = a + b; return a; }

inline Dual tanh(Dual a) {
    double t = std::tanh(a.v);
    return {t, a.d * (1.0 - t * t)};
}
inline Dual exp(Dual a) {
    double e = std::exp(a.v);
    return {e, a.d * e};
}
inline Dual log(Dual a) { return {std::log(a.v), a.d / a.v}; }

// make the double overloads visible alongside the Dual ones
using std::exp;
using std::log;
using std::tanh;

inline double value_of(double x) { return x; }
inline double value_of(Dual x) { return x.v; }

template <class T>
inline T activate(Activation act, T z) {
    if (act == Activation::kTanh) return tanh(z);
    return value_of(z) > 0.0 ? z : T(0.0);
}

// derivative of the activation expressed from (pre-activation z, activation a)
template <class T>
inline T activate_deriv(Activation act, T z, T a) {
    if (act == Activation::kTanh) return T(1.0) - a * a;
    return value_of(z) > 0.0 ? T(1.0) : T(0.0);
}

// Shared forward pass. Fills per-layer pre-activations and activations;
// activations[0] is the input, activations.back() the logits.
template <class T>
void forward_pass(const ModelSpec& spec, const std::vector<T>& params,
                  const std::vector<double>& x,
                  std::vector<std::vector<T>>& pre, std::vector<std::vector<T>>& act) {
    const int layers = spec.num_layers();
    pre.assign(layers, {});
    act.assign(layers + 1, {});
    act[0].assign(x.begin(), x.end());

    std::size_t off = 0;
    for (int l = 0; l < layers; ++l) {
        const int in = spec.layer_sizes[l];
        const int out = spec.layer_sizes[l + 1];
        const T* w = params.data() + off;
        const T* b = params.data() + off + static_cast<std::size_t>(in) * out;
        pre[l].assign(out, T(0.0));
        act[l + 1].assign(out, T(0.0));
        for (int j = 0; j < out; ++j) {
            T s = b[j];
            const T* wrow = w + static_cast<std::size_t>(j) * in;
            for (int i = 0; i < in; ++i) s += wrow[i] * act[l][i];
            pre[l][j] = s;
            act[l + 1][j] = (l + 1 < layers) ? activate(spec.activation, s) : s;
        }
        off += static_cast<std::size_t>(in + 1) * out;
    }
}

// Softmax cross-entropy with optional L2 term; optionally accumulates the
// full parameter gradient by reverse sweep.
template <class T>
T loss_and_grad(const ModelSpec& spec, const std::vector<T>& params,
                const std::vector<double>& x, int label, std::vector<T>* grad_out) {
    const int layers = spec.num_layers();
    std::vector<std::vector<T>> pre, act;
    forward_pass(spec, params, x, pre, act);

    const std::vector<T>& logits = act[layers];
    const int y_count = spec.num_classes();

    double m = value_of(logits[0]);
    for (int j = 1; j < y_count; ++j) m = std::max(m, value_of(logits[j]));
    T sum_exp(0.0);
    std::vector<T> probs(y_count);
    for (int j = 0; j < y_count; ++j) {
        probs[j] = exp(logits[j] - T(m));
        sum_exp += probs[j];
    }
    T total = log(sum_exp) + T(m) - logits[label];

    if (spec.l2_penalty > 0.0) {
        T sq(0.0);
        for (const T& p : params) sq += p * p;
        total += T(0.5 * spec.l2_penalty) * sq;
    }

    if (!grad_out) return total;

    grad_out->assign(params.size(), T(0.0));
    for (int j = 0; j < y_count; ++j) probs[j] = probs[j] / sum_exp;

    // delta at the logits: softmax - onehot
    std::vector<T> delta(y_count);
    for (int j = 0; j < y_count; ++j)
        delta[j] = probs[j] - T(j == label ? 1.0 : 0.0);

    // layer parameter offsets
    std::vector<std::size_t> offsets(layers);
    std::size_t off = 0;
    for (int l = 0; l < layers; ++l) {
        offsets[l] = off;
        off += static_cast<std::size_t>(spec.layer_sizes[l] + 1) * spec.layer_sizes[l + 1];
    }

    for (int l = layers - 1; l >= 0; --l) {
        const int in = spec.layer_sizes[l];
        const int out = spec.layer_sizes[l + 1];
        T* gw = grad_out->data() + offsets[l];
        T* gb = gw + static_cast<std::size_t>(in) * out;
        const T* w = params.data() + offsets[l];
        for (int j = 0; j < out; ++j) {
            T* gwrow = gw + static_cast<std::size_t>(j) * in;
            for (int i = 0; i < in; ++i) gwrow[i] += delta[j] * act[l][i];
            gb[j] += delta[j];
        }
        if (l > 0) {
            std::vector<T> prev(in, T(0.0));
            for (int i = 0; i < in; ++i) {
                T s(0.0);
                for (int j = 0; j < out; ++j)
                    s += w[static_cast<std::size_t>(j) * in + i] * delta[j];
                prev[i] = s * activate_deriv(spec.activation, pre[l - 1][i], act[l][i]);
            }
            delta = std::move(prev);
        }
    }

    if (spec.l2_penalty > 0.0) {
        for (std::size_t i = 0; i < params.size(); ++i)
            (*grad_out)[i] += T(spec.l2_penalty) * params[i];
    }
    return total;
}

void check_input(const ModelSpec& spec, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != spec.input_dim())
        throw std::invalid_argument("model: input length " + std::to_string(x.size()) +
                                    " does not match input dim " +
                                    std::to_string(spec.input_dim()));
}

void check_theta(const ModelSpec& spec, const ParameterVector& theta) {
    if (static_cast<int>(theta.size()) != spec.param_count())
        throw std::invalid_argument("model: parameter vector length " +
                                    std::to_string(theta.size()) + " does not match p = " +
                                    std::to_string(spec.param_count()));
}

void check_label(const ModelSpec& spec, int label) {
    if (label < 0 || label >= spec.num_classes())
        throw std::invalid_argument("model: label " + std::to_string(label) + " out of range");
}

} // namespace

std::string activation_name(Activation a) {
    return a == Activation::kTanh ? "tanh" : "relu";
}

Activation activation_from_name(const std::string& name) {
    if (name == "tanh") return Activation::kTanh;
    if (name == "relu") return Activation::kRelu;
    throw std::invalid_argument("unknown activation: " + name);
}

int ModelSpec::param_count() const {
    int p = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
        p += (layer_sizes[l] + 1) * layer_sizes[l + 1];
    return p;
}

void ModelSpec::validate() const {
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("ModelSpec: need at least input and output layers");
    for (int s : layer_sizes)
        if (s < 1) throw std::invalid_argument("ModelSpec: layer sizes must be positive");
    if (num_classes() < 2)
        throw std::invalid_argument("ModelSpec: output size must be >= 2");
    if (l2_penalty < 0.0)
        throw std::invalid_argument("ModelSpec: l2_penalty must be >= 0");
}

void Dataset::validate(int num_classes) const {
    if (inputs.empty()) throw std::invalid_argument("Dataset: empty");
    if (inputs.size() != labels.size())
        throw std::invalid_argument("Dataset: inputs/labels size mismatch");
    const std::size_t d = inputs.front().size();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].size() != d)
            throw std::invalid_argument("Dataset: ragged row " + std::to_string(i));
        for (double v : inputs[i])
            if (!std::isfinite(v))
                throw std::invalid_argument("Dataset: non-finite input at row " + std::to_string(i));
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw std::invalid_argument("Dataset: label out of range at row " + std::to_string(i));
    }
}

ParameterVector init_model(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    ParameterVector theta(spec.param_count(), 0.0);
    std::size_t off = 0;
    for (int l = 0; l < spec.num_layers(); ++l) {
        const int in = spec.layer_sizes[l];
        const int out = spec.layer_sizes[l + 1];
        RngStream rng(seed, static_cast<std::uint64_t>(l));
        const double scale = std::sqrt(6.0 / (in + out));
        for (int i = 0; i < in * out; ++i)
            theta[off + i] = (2.0 * rng.uniform() - 1.0) * scale;
        // biases stay zero
        off += static_cast<std::size_t>(in + 1) * out;
    }
    return theta;
}

Vector forward(const ModelSpec& spec, const ParameterVector& theta,
               const std::vector<double>& x) {
    check_theta(spec, theta);
    check_input(spec, x);
    std::vector<std::vector<double>> pre, act;
    forward_pass(spec, theta, x, pre, act);
    return act.back();
}

double loss(const ModelSpec& spec, const ParameterVector& theta,
            const std::vector<double>& x, int label) {
    check_theta(spec, theta);
    check_input(spec, x);
    check_label(spec, label);
    return loss_and_grad<double>(spec, theta, x, label, nullptr);
}

double mean_loss(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds) {
    if (ds.size() == 0) throw std::invalid_argument("mean_loss: empty dataset");
    double total = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        total += loss(spec, theta, ds.inputs[i], ds.labels[i]);
    return total / static_cast<double>(ds.size());
}

Vector grad(const ModelSpec& spec, const ParameterVector& theta,
            const std::vector<double>& x, int label) {
    check_theta(spec, theta);
    check_input(spec, x);
    check_label(spec, label);
    Vector g;
    loss_and_grad<double>(spec, theta, x, label, &g);
    return g;
}

Vector mean_grad(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                 const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("mean_grad: empty batch");
    Vector acc(theta.size(), 0.0);
    Vector g;
    for (std::size_t idx : indices) {
        loss_and_grad<double>(spec, theta, ds.inputs[idx], ds.labels[idx], &g);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
    }
    const double inv = 1.0 / static_cast<double>(indices.size());
    for (double& v : acc) v *= inv;
    return acc;
}

Vector hvp(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
           const std::vector<std::size_t>& batch, const Vector& v) {
    check_theta(spec, theta);
    if (batch.empty()) throw std::invalid_argument("hvp: empty batch");
    if (v.size() != theta.size()) throw std::invalid_argument("hvp: v length mismatch");

    std::vector<Dual> params(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) params[i] = Dual(theta[i], v[i]);

    Vector out(theta.size(), 0.0);
    std::vector<Dual> g;
    for (std::size_t idx : batch) {
        loss_and_grad<Dual>(spec, params, ds.inputs[idx], ds.labels[idx], &g);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i].d;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& x : out) x *= inv;
    return out;
}

Matrix dense_hessian(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                     const std::vector<std::size_t>& batch) {
    const int p = spec.param_count();
    if (p > 2000)
        throw std::invalid_argument("dense_hessian: p = " + std::to_string(p) +
                                    " exceeds the 2000-parameter oracle guard");
    Matrix h(p, p);
    Vector e(p, 0.0);
    for (int j = 0; j < p; ++j) {
        e[j] = 1.0;
        Vector col = hvp(spec, theta, ds, batch, e);
        for (int i = 0; i < p; ++i) h.at(i, j) = col[i];
        e[j] = 0.0;
    }
    // exact HVP columns are symmetric up to roundoff; make it exact
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j) {
            double s = 0.5 * (h.at(i, j) + h.at(j, i));
            h.at(i, j) = s;
            h.at(j, i) = s;
        }
    return h;
}

Vector penultimate_features(const ModelSpec& spec, const ParameterVector& theta,
                            const std::vector<double>& x) {
    if (spec.num_layers() < 2)
        throw std::invalid_argument("penultimate_features: model has no hidden layer; "
                                    "use raw inputs as features instead");
    check_theta(spec, theta);
    check_input(spec, x);
    std::vector<std::vector<double>> pre, act;
    forward_pass(spec, theta, x, pre, act);
    return act[act.size() - 2];
}

Vector softmax_scores(const ModelSpec& spec, const ParameterVector& theta,
                      const std::vector<double>& x) {
    Vector logits = forward(spec, theta, x);
    double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    Vector out(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out[j] = std::exp(logits[j] - m);
        sum += out[j];
    }
    for (double& v : out) v /= sum;
    return out;
}

TrainResult train(const ModelSpec& spec, const Dataset& ds, const TrainConfig& cfg) {
    spec.validate();
    ds.validate(spec.num_classes());
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate must be > 0");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (cfg.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");

    ParameterVector theta = init_model(spec, cfg.seed);
    const std::size_t n = ds.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    double last_finite_loss = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        RngStream shuffle_rng(cfg.seed, 0x5u + static_cast<std::uint64_t>(epoch));
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = shuffle_rng.uniform_int(i);
            std::swap(order[i - 1], order[j]);
        }
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t end = std::min(n, start + cfg.batch_size);
            std::vector<std::size_t> batch(order.begin() + start, order.begin() + end);
            Vector g = mean_grad(spec, theta, ds, batch);
            for (std::size_t i = 0; i < theta.size(); ++i)
                theta[i] -= cfg.learning_rate * g[i];
        }
        double l = mean_loss(spec, theta, ds);
        if (!std::isfinite(l))
            throw std::runtime_error("train: diverged (loss non-finite); last finite epoch " +
                                     std::to_string(epoch) + " loss " +
                                     std::to_string(last_finite_loss));
        last_finite_loss = l;
    }

    TrainResult result;
    result.params = std::move(theta);
    result.final_loss = cfg.epochs > 0 ? last_finite_loss : mean_loss(spec, result.params, ds);
    result.train_accuracy = dataset_accuracy(spec, result.params, ds);
    return result;
}

double dataset_accuracy(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds) {
    if (ds.size() == 0) throw std::invalid_argument("dataset_accuracy: empty dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        Vector logits = forward(spec, theta, ds.inputs[i]);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < logits.size(); ++j)
            if (logits[j] > logits[arg]) arg = j; // ties break to lowest class id
        if (static_cast<int>(arg) == ds.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

namespace {

constexpr std::uint8_t kCheckpointVersion = 1;

template <class T>
void write_le(std::ofstream& out, T value) {
    // host is little-endian on every supported target
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_le(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return value;
}

} // namespace

void save_checkpoint(const std::string& path, const ModelSpec& spec,
                     const ParameterVector& theta) {
    spec.validate();
    if (static_cast<int>(theta.size()) != spec.param_count())
        throw std::invalid_argument("save_checkpoint: parameter length mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    write_le<std::uint8_t>(out, kCheckpointVersion);
    write_le<std::uint8_t>(out, spec.activation == Activation::kTanh ? 0 : 1);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec.layer_sizes.size()));
    for (int s : spec.layer_sizes) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s));
    write_le<double>(out, spec.l2_penalty);
    for (double v : theta) write_le<double>(out, v);
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

std::pair<ModelSpec, ParameterVector> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    const auto version = read_le<std::uint8_t>(in);
    if (version != kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: unsupported format version " +
                                 std::to_string(version));
    ModelSpec spec;
    spec.activation = read_le<std::uint8_t>(in) == 0 ? Activation::kTanh : Activation::kRelu;
    const auto n_layers = read_le<std::uint32_t>(in);
    spec.layer_sizes.resize(n_layers);
    for (auto& s : spec.layer_sizes) s = static_cast<int>(read_le<std::uint32_t>(in));
    spec.l2_penalty = read_le<double>(in);
    spec.validate();
    ParameterVector theta(spec.param_count());
    for (double& v : theta) v = read_le<double>(in);
    return {spec, theta};
}

std::uint64_t activation_workspace_bytes(const ModelSpec& spec) {
    // dual-mode pass holds activations, pre-activations, and the backward
    // delta per unit: 2 doubles each in dual mode
    std::uint64_t units = 0;
    for (int s : spec.layer_sizes) units += static_cast<std::uint64_t>(s);
    return units * 3 * 2 * sizeof(double);
}

} // namespace ifs
