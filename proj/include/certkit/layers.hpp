#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "certkit/numerics.hpp"
#include "certkit/rng.hpp"
#include "certkit/tensor.hpp"

namespace certkit {

enum class NormKind : std::uint8_t { L2 = 0, LINF = 1 };

inline const char* norm_name(NormKind n) { return n == NormKind::L2 ? "l2" : "linf"; }

enum class LayerKind : std::uint8_t {
    SpectralDense = 0,   // dense layer run with weights scaled by an estimated spectral norm
    OrthogonalDense = 1, // square dense layer, weight = Cayley transform of a skew parameter
    LinfDistUnit = 2,    // z_u = max_i |x_i - w_u,i| + b_u
    MinMaxSort = 3,      // per-pair (min, max) sort, parameter-free
    Dropout = 4,
    LinearHead = 5,
};

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Tensor weight;             // SpectralDense/LinearHead: out x in; OrthogonalDense: skew
                               // parameter n x n; LinfDistUnit: prototypes units x in
    Tensor bias;               // out
    double dropout_rate = 0.0; // Dropout only
    double sigma_hat = 1.0;    // SpectralDense only; refreshed outside forward

    // derived, rebuilt by Network::prepare(); never persisted
    Tensor cayley_w;    // OrthogonalDense: (I-S)(I+S)^-1
    Tensor cayley_minv; // OrthogonalDense: (I+S)^-1

    bool has_params() const {
        return kind == LayerKind::SpectralDense || kind == LayerKind::OrthogonalDense ||
               kind == LayerKind::LinfDistUnit || kind == LayerKind::LinearHead;
    }
};

struct Network {
    NormKind norm = NormKind::L2;
    std::size_t num_classes = 0;
    std::vector<LayerSpec> layers;

    std::size_t in_dim() const { return layers.front().in_dim; }

    // checks dim chaining, the single trailing LinearHead rule, and
    // layer/norm compatibility
    void validate() const;

    // rebuilds the Cayley caches; call after any parameter change
    void prepare();

    // re-estimates sigma_hat on every SpectralDense layer via power iteration
    void refresh_spectral(std::uint64_t seed, double tol = 1e-9, std::size_t max_iter = 200);
};

enum class RunMode : std::uint8_t { train = 0, eval = 1 };

// activations and dropout masks captured during forward, replayed by backward
struct ForwardTrace {
    std::vector<Tensor> inputs;              // input fed to each layer
    Tensor logits;                           // batch x num_classes
    std::vector<std::vector<std::uint8_t>> dropout_masks;  // per layer, batch*dim or empty
    RunMode mode = RunMode::eval;
    std::uint64_t seed = 0;
    bool valid = false;
};

struct LayerGrads {
    Tensor weight;  // empty for parameter-free layers
    Tensor bias;
};

struct Gradients {
    std::vector<LayerGrads> layers;
    Tensor input;  // gradient w.r.t. the network input, batch x in_dim
};

Tensor forward(const Network& net, const Tensor& x, RunMode mode, std::uint64_t seed,
               ForwardTrace* trace = nullptr);

Gradients backward(const Network& net, const ForwardTrace& trace, const Tensor& grad_logits);

enum class BoundMode : std::uint8_t { train_estimate = 0, certify_exact = 1 };

struct LipschitzBreakdown {
    std::vector<double> per_layer;  // one entry per pre-head layer
    double backbone = 1.0;          // product of per_layer
    Tensor head_pairwise;           // K[i][j] = backbone * dual_norm(w_i - w_j)
};

LipschitzBreakdown lipschitz_breakdown(const Network& net, BoundMode mode);

// ---- model zoo -----------------------------------------------------------

enum class ModelFamily : std::uint8_t {
    spectral = 0,   // spectral-normalized dense blocks, l2
    orthogonal = 1, // Cayley-orthogonal blocks behind a spectral stem, l2
    linf_dist = 2,  // stacked linf-distance units, linf
    sortnet = 3,    // linf-distance units interleaved with min-max sorting, linf
};

ModelFamily parse_family(const std::string& name);
const char* family_name(ModelFamily f);
NormKind family_norm(ModelFamily f);

enum class ModelSize : std::uint8_t { XS = 0, S = 1, M = 2, L = 3 };
ModelSize parse_size(const std::string& name);
const char* size_name(ModelSize s);

// Builds and initializes a network. prototype_pool (may be empty) provides
// training samples for distance-unit prototype initialization.
Network build_network(ModelFamily family, ModelSize size, std::size_t in_dim,
                      std::size_t num_classes, bool dropout_enabled, double dropout_rate,
                      const Tensor& prototype_pool, std::uint64_t seed);

}  // namespace certkit
