#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "divide/matrix.hpp"
#include "divide/rng.hpp"

namespace divide {

enum class LayerKind : std::uint8_t { linear, batchnorm, relu };

struct LayerSpec {
    LayerKind kind = LayerKind::linear;
    std::size_t in_dim = 0;   // linear only
    std::size_t out_dim = 0;  // linear only

    static LayerSpec linear(std::size_t in, std::size_t out) { return {LayerKind::linear, in, out}; }
    static LayerSpec batchnorm() { return {LayerKind::batchnorm, 0, 0}; }
    static LayerSpec relu() { return {LayerKind::relu, 0, 0}; }
};

struct Layer {
    LayerKind kind = LayerKind::relu;
    // linear
    Matrix w;                // in_dim x out_dim
    std::vector<double> b;   // out_dim
    // batchnorm
    std::vector<double> gamma, beta, running_mean, running_var;
};

/// Fully connected stack with manual forward/backward. Holds batchnorm
/// running statistics; train-mode forwards update them in place.
struct Mlp {
    std::vector<Layer> layers;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t param_count() const;
    std::vector<LayerSpec> spec() const;
};

enum class Mode { train, eval };

struct LayerCache {
    Matrix input;               // activations entering the layer
    Matrix xhat;                // batchnorm normalized values
    std::vector<double> inv_std;  // batchnorm 1/sqrt(var + eps), batch stats
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    std::size_t batch = 0;
};

struct LayerGrads {
    Matrix dw;
    std::vector<double> db, dgamma, dbeta;
};
using MlpGrads = std::vector<LayerGrads>;

/// Adam accumulators mirroring the parameter layout, plus the step counter.
struct AdamState {
    MlpGrads m, v;
    std::int64_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

/// Weights uniform in +-sqrt(6/fan_in), biases zero, batchnorm at identity
/// with running stats (0, 1).
Mlp build_mlp(const std::vector<LayerSpec>& spec, Rng& rng);

/// Train mode uses batch statistics (batch >= 2 required when a batchnorm
/// layer is present) and fills `cache` when given; eval mode uses running
/// statistics and leaves `cache` untouched.
Matrix mlp_forward(Mlp& net, const Matrix& x, Mode mode, ForwardCache* cache = nullptr);
Matrix mlp_forward_const(const Mlp& net, const Matrix& x);  // eval, no stat updates

/// Exact gradients for the cached train-mode forward. Returns parameter
/// grads and the gradient with respect to the input batch.
std::pair<MlpGrads, Matrix> mlp_backward(const Mlp& net, const ForwardCache& cache, const Matrix& dy);

MlpGrads zero_grads(const Mlp& net);
void accumulate(MlpGrads& into, const MlpGrads& from);

AdamState make_adam_state(const Mlp& net);

/// Bias-corrected Adam without weight decay.
void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state, double lr);

/// theta_k <- m * theta_k + (1 - m) * theta_q for all learned parameters;
/// batchnorm running statistics are copied from the online net.
void ema_update(Mlp& target, const Mlp& online, double m);

// Stream (de)serialization used by the checkpoint format.
void write_mlp(std::ostream& os, const Mlp& net);
Mlp read_mlp(std::istream& is);
void write_adam(std::ostream& os, const AdamState& st);
AdamState read_adam(std::istream& is, const Mlp& net);

/// Encoder shape used throughout: (in -> hidden)*(layers-1) -> embed, each
/// linear followed by batchnorm (+ ReLU except after the final one).
std::vector<LayerSpec> encoder_spec(std::size_t in_dim, std::size_t hidden, std::size_t embed,
                                    std::size_t linear_layers = 4);

/// Two-layer decoder: Linear(in, hidden), ReLU, Linear(hidden, out).
std::vector<LayerSpec> decoder_spec(std::size_t in_dim, std::size_t hidden, std::size_t out_dim);

}  // namespace divide
