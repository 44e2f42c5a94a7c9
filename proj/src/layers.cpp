#include "certkit/layers.hpp"

#include <cmath>
#include <string>

#include "certkit/kernels.hpp"

namespace certkit {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::SpectralDense: return "spectral_dense";
        case LayerKind::OrthogonalDense: return "orthogonal_dense";
        case LayerKind::LinfDistUnit: return "linf_dist_unit";
        case LayerKind::MinMaxSort: return "minmax_sort";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::LinearHead: return "linear_head";
    }
    return "?";
}

namespace {

void check_layer_shapes(const LayerSpec& l) {
    const std::string who = layer_kind_name(l.kind);
    switch (l.kind) {
        case LayerKind::SpectralDense:
        case LayerKind::LinearHead:
        case LayerKind::LinfDistUnit:
            if (l.weight.rank() != 2 || l.weight.rows() != l.out_dim || l.weight.cols() != l.in_dim)
                fail_config(who + ": weight shape " + l.weight.shape_string() +
                            " does not match dims");
            if (l.bias.size() != l.out_dim) fail_config(who + ": bias length mismatch");
            break;
        case LayerKind::OrthogonalDense:
            if (l.in_dim != l.out_dim) fail_config(who + ": requires in_dim == out_dim");
            if (l.weight.rank() != 2 || l.weight.rows() != l.in_dim ||
                l.weight.cols() != l.in_dim)
                fail_config(who + ": skew parameter must be square");
            if (l.bias.size() != l.out_dim) fail_config(who + ": bias length mismatch");
            break;
        case LayerKind::MinMaxSort:
            if (l.in_dim != l.out_dim) fail_config(who + ": requires in_dim == out_dim");
            break;
        case LayerKind::Dropout:
            if (l.in_dim != l.out_dim) fail_config(who + ": requires in_dim == out_dim");
            if (!(l.dropout_rate >= 0.0 && l.dropout_rate < 1.0))
                fail_config(who + ": rate must lie in [0,1)");
            break;
    }
    if (l.kind == LayerKind::SpectralDense && !(l.sigma_hat > 0.0))
        fail_config("spectral_dense: sigma_hat must be positive");
}

}  // namespace

void Network::validate() const {
    if (layers.empty()) fail_config("network has no layers");
    std::size_t heads = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        check_layer_shapes(l);
        if (i + 1 < layers.size() && l.out_dim != layers[i + 1].in_dim)
            fail_config("network dims do not chain at layer " + std::to_string(i) + ": " +
                        std::to_string(l.out_dim) + " -> " + std::to_string(layers[i + 1].in_dim));
        if (l.kind == LayerKind::LinearHead) ++heads;
        if (l.kind == LayerKind::LinfDistUnit && norm != NormKind::LINF)
            fail_config("linf_dist_unit layers are only legal in linf networks");
        if ((l.kind == LayerKind::SpectralDense || l.kind == LayerKind::OrthogonalDense) &&
            norm != NormKind::L2)
            fail_config(std::string(layer_kind_name(l.kind)) + " layers are only legal in l2 networks");
    }
    if (heads != 1 || layers.back().kind != LayerKind::LinearHead)
        fail_config("network must end in exactly one linear_head");
    if (layers.back().out_dim != num_classes)
        fail_config("head out_dim " + std::to_string(layers.back().out_dim) +
                    " != num_classes " + std::to_string(num_classes));
}

void Network::prepare() {
    for (LayerSpec& l : layers) {
        if (l.kind != LayerKind::OrthogonalDense) continue;
        const std::size_t n = l.in_dim;
        Tensor i_plus_s({n, n});
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c)
                i_plus_s.at(r, c) =
                    (r == c ? 1.0 : 0.0) + 0.5 * (l.weight.at(r, c) - l.weight.at(c, r));
        l.cayley_w = cayley_orthogonalize(l.weight);
        l.cayley_minv = solve_linear(i_plus_s, Tensor::identity(n));
    }
}

void Network::refresh_spectral(std::uint64_t seed, double tol, std::size_t max_iter) {
    std::size_t idx = 0;
    for (LayerSpec& l : layers) {
        ++idx;
        if (l.kind != LayerKind::SpectralDense) continue;
        const double sigma = power_iteration(l.weight, tol, max_iter, substream(seed, idx)).sigma;
        l.sigma_hat = sigma > 0.0 ? sigma : 1.0;
    }
}

namespace {

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& bias, double inv_scale) {
    const std::size_t batch = x.rows(), in = x.cols(), out = w.rows();
    Tensor y({batch, out});
    kernels::matmul_bt(x.data(), w.data(), y.data(), batch, in, out);
    for (std::size_t s = 0; s < batch; ++s)
        for (std::size_t j = 0; j < out; ++j) y.at(s, j) = y.at(s, j) * inv_scale + bias[j];
    return y;
}

Tensor minmax_forward(const Tensor& x) {
    Tensor y = x;
    const std::size_t batch = x.rows(), d = x.cols();
    for (std::size_t s = 0; s < batch; ++s) {
        for (std::size_t u = 0; u + 1 < d; u += 2) {
            const double a = x.at(s, u), b = x.at(s, u + 1);
            if (a > b) {
                y.at(s, u) = b;
                y.at(s, u + 1) = a;
            }
        }
    }
    return y;
}

std::vector<std::uint8_t> dropout_mask(std::size_t count, double rate, std::uint64_t stream) {
    Rng rng(stream);
    std::vector<std::uint8_t> mask(count);
    for (auto& m : mask) m = rng.uniform01() >= rate ? 1 : 0;
    return mask;
}

}  // namespace

Tensor forward(const Network& net, const Tensor& x, RunMode mode, std::uint64_t seed,
               ForwardTrace* trace) {
    net.validate();
    if (x.rank() != 2 || x.cols() != net.in_dim())
        fail_config("forward: input shape " + x.shape_string() + " does not match in_dim " +
                    std::to_string(net.in_dim()));
    x.check_finite();

    if (trace) {
        *trace = ForwardTrace{};
        trace->mode = mode;
        trace->seed = seed;
        trace->inputs.reserve(net.layers.size());
        trace->dropout_masks.resize(net.layers.size());
    }

    Tensor cur = x;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const LayerSpec& l = net.layers[li];
        if (trace) trace->inputs.push_back(cur);
        switch (l.kind) {
            case LayerKind::SpectralDense:
                cur = dense_forward(cur, l.weight, l.bias, 1.0 / l.sigma_hat);
                break;
            case LayerKind::LinearHead:
                cur = dense_forward(cur, l.weight, l.bias, 1.0);
                break;
            case LayerKind::OrthogonalDense: {
                if (l.cayley_w.size() == 0)
                    fail_config("orthogonal_dense: network not prepared (call prepare())");
                cur = dense_forward(cur, l.cayley_w, l.bias, 1.0);
                break;
            }
            case LayerKind::LinfDistUnit: {
                Tensor y({cur.rows(), l.out_dim});
                kernels::linf_distance(cur.data(), l.weight.data(), l.bias.data(), y.data(),
                                       cur.rows(), l.in_dim, l.out_dim);
                cur = std::move(y);
                break;
            }
            case LayerKind::MinMaxSort:
                cur = minmax_forward(cur);
                break;
            case LayerKind::Dropout: {
                if (mode == RunMode::eval || l.dropout_rate == 0.0) break;
                const auto mask =
                    dropout_mask(cur.size(), l.dropout_rate, substream(seed, 0x0d0, li));
                const double scale = 1.0 / (1.0 - l.dropout_rate);
                for (std::size_t i = 0; i < cur.size(); ++i)
                    cur[i] = mask[i] ? cur[i] * scale : 0.0;
                if (trace) trace->dropout_masks[li] = mask;
                break;
            }
        }
    }
    cur.check_finite();
    if (trace) {
        trace->logits = cur;
        trace->valid = true;
    }
    return cur;
}

namespace {

// gradient of y = x W^T * inv_scale + b
void dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, double inv_scale,
                    Tensor& dx, Tensor& gw, Tensor& gb) {
    const std::size_t batch = x.rows(), in = x.cols(), out = w.rows();
    dx = Tensor({batch, in});
    kernels::matmul(dy.data(), w.data(), dx.data(), batch, out, in);
    gw = Tensor({out, in});
    kernels::matmul_at(dy.data(), x.data(), gw.data(), out, batch, in);
    if (inv_scale != 1.0) {
        for (auto& v : dx.values()) v *= inv_scale;
        for (auto& v : gw.values()) v *= inv_scale;
    }
    gb = Tensor({out});
    for (std::size_t s = 0; s < batch; ++s)
        for (std::size_t j = 0; j < out; ++j) gb[j] += dy.at(s, j);
}

}  // namespace

Gradients backward(const Network& net, const ForwardTrace& trace, const Tensor& grad_logits) {
    if (!trace.valid || trace.inputs.size() != net.layers.size())
        fail_config("backward: missing or mismatched forward trace");
    if (grad_logits.rank() != 2 || grad_logits.rows() != trace.logits.rows() ||
        grad_logits.cols() != net.num_classes)
        fail_config("backward: grad_logits shape mismatch");

    Gradients out;
    out.layers.resize(net.layers.size());

    Tensor grad = grad_logits;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const LayerSpec& l = net.layers[li];
        const Tensor& x = trace.inputs[li];
        Tensor dx;
        switch (l.kind) {
            case LayerKind::SpectralDense:
                dense_backward(x, l.weight, grad, 1.0 / l.sigma_hat, dx, out.layers[li].weight,
                               out.layers[li].bias);
                break;
            case LayerKind::LinearHead:
                dense_backward(x, l.weight, grad, 1.0, dx, out.layers[li].weight,
                               out.layers[li].bias);
                break;
            case LayerKind::OrthogonalDense: {
                if (l.cayley_minv.size() == 0)
                    fail_config("orthogonal_dense: network not prepared (call prepare())");
                Tensor g_eff;  // gradient w.r.t. the orthogonal weight itself
                dense_backward(x, l.cayley_w, grad, 1.0, dx, g_eff, out.layers[li].bias);
                const std::size_t n = l.in_dim;
                // dL/dS = -(I+W)^T G Minv^T, then project onto the skew part
                Tensor i_plus_w = l.cayley_w;
                for (std::size_t r = 0; r < n; ++r) i_plus_w.at(r, r) += 1.0;
                Tensor t1({n, n}), t2({n, n});
                kernels::matmul_at(i_plus_w.data(), g_eff.data(), t1.data(), n, n, n);
                kernels::matmul_bt(t1.data(), l.cayley_minv.data(), t2.data(), n, n, n);
                Tensor ga({n, n});
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < n; ++c)
                        ga.at(r, c) = -0.5 * (t2.at(r, c) - t2.at(c, r));
                out.layers[li].weight = std::move(ga);
                break;
            }
            case LayerKind::LinfDistUnit: {
                dx = Tensor({x.rows(), l.in_dim});
                out.layers[li].weight = Tensor({l.out_dim, l.in_dim});
                out.layers[li].bias = Tensor({l.out_dim});
                kernels::linf_distance_backward_input(x.data(), l.weight.data(), grad.data(),
                                                      dx.data(), x.rows(), l.in_dim, l.out_dim);
                kernels::linf_distance_backward_params(
                    x.data(), l.weight.data(), grad.data(), out.layers[li].weight.data(),
                    out.layers[li].bias.data(), x.rows(), l.in_dim, l.out_dim);
                break;
            }
            case LayerKind::MinMaxSort: {
                dx = Tensor({x.rows(), l.in_dim});
                const std::size_t d = l.in_dim;
                for (std::size_t s = 0; s < x.rows(); ++s) {
                    for (std::size_t u = 0; u + 1 < d; u += 2) {
                        const bool swap = x.at(s, u) > x.at(s, u + 1);
                        dx.at(s, u) = swap ? grad.at(s, u + 1) : grad.at(s, u);
                        dx.at(s, u + 1) = swap ? grad.at(s, u) : grad.at(s, u + 1);
                    }
                    if (d % 2) dx.at(s, d - 1) = grad.at(s, d - 1);
                }
                break;
            }
            case LayerKind::Dropout: {
                if (trace.mode == RunMode::eval || l.dropout_rate == 0.0) {
                    dx = grad;
                    break;
                }
                const auto& mask = trace.dropout_masks[li];
                if (mask.size() != grad.size())
                    fail_config("backward: dropout mask missing from trace");
                dx = Tensor(grad.shape());
                const double scale = 1.0 / (1.0 - l.dropout_rate);
                for (std::size_t i = 0; i < grad.size(); ++i)
                    dx[i] = mask[i] ? grad[i] * scale : 0.0;
                break;
            }
        }
        grad = std::move(dx);
    }
    out.input = std::move(grad);
    return out;
}

LipschitzBreakdown lipschitz_breakdown(const Network& net, BoundMode mode) {
    net.validate();
    LipschitzBreakdown bd;
    for (const LayerSpec& l : net.layers) {
        if (l.kind == LayerKind::LinearHead) break;
        double c = 1.0;
        if (l.kind == LayerKind::SpectralDense) {
            // bound of the effective weight W / sigma_hat
            if (mode == BoundMode::certify_exact)
                c = exact_spectral_norm(l.weight) / l.sigma_hat;
            else
                c = power_iteration(l.weight, 1e-9, 200, 0x5eedULL).sigma / l.sigma_hat;
        }
        bd.per_layer.push_back(c);
    }
    bd.backbone = 1.0;
    for (double c : bd.per_layer) bd.backbone *= c;

    const LayerSpec& head = net.layers.back();
    const std::size_t classes = head.out_dim;
    bd.head_pairwise = Tensor({classes, classes});
    for (std::size_t i = 0; i < classes; ++i) {
        for (std::size_t j = i + 1; j < classes; ++j) {
            double acc = 0.0;
            if (net.norm == NormKind::L2) {
                for (std::size_t k = 0; k < head.in_dim; ++k) {
                    const double d = head.weight.at(i, k) - head.weight.at(j, k);
                    acc += d * d;
                }
                acc = std::sqrt(acc);
            } else {
                for (std::size_t k = 0; k < head.in_dim; ++k)
                    acc += std::abs(head.weight.at(i, k) - head.weight.at(j, k));
            }
            const double kij = bd.backbone * acc;
            bd.head_pairwise.at(i, j) = kij;
            bd.head_pairwise.at(j, i) = kij;
        }
    }
    return bd;
}

// ---- model zoo -------------------------------------------------------------

ModelFamily parse_family(const std::string& name) {
    if (name == "spectral") return ModelFamily::spectral;
    if (name == "orthogonal") return ModelFamily::orthogonal;
    if (name == "linf_dist") return ModelFamily::linf_dist;
    if (name == "sortnet") return ModelFamily::sortnet;
    fail_config("unknown model family '" + name +
                "' (expected spectral|orthogonal|linf_dist|sortnet)");
}

const char* family_name(ModelFamily f) {
    switch (f) {
        case ModelFamily::spectral: return "spectral";
        case ModelFamily::orthogonal: return "orthogonal";
        case ModelFamily::linf_dist: return "linf_dist";
        case ModelFamily::sortnet: return "sortnet";
    }
    return "?";
}

NormKind family_norm(ModelFamily f) {
    return (f == ModelFamily::spectral || f == ModelFamily::orthogonal) ? NormKind::L2
                                                                        : NormKind::LINF;
}

ModelSize parse_size(const std::string& name) {
    if (name == "XS" || name == "xs") return ModelSize::XS;
    if (name == "S" || name == "s") return ModelSize::S;
    if (name == "M" || name == "m") return ModelSize::M;
    if (name == "L" || name == "l") return ModelSize::L;
    fail_config("unknown model size '" + name + "' (expected XS|S|M|L)");
}

const char* size_name(ModelSize s) {
    switch (s) {
        case ModelSize::XS: return "XS";
        case ModelSize::S: return "S";
        case ModelSize::M: return "M";
        case ModelSize::L: return "L";
    }
    return "?";
}

namespace {

struct SizePreset {
    std::size_t blocks;
    std::size_t width;
};

SizePreset size_preset(ModelSize s) {
    switch (s) {
        case ModelSize::XS: return {1, 32};
        case ModelSize::S: return {2, 48};
        case ModelSize::M: return {3, 64};
        case ModelSize::L: return {4, 96};
    }
    return {1, 32};
}

Tensor uniform_weight(std::size_t out, std::size_t in, Rng& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w({out, in});
    for (auto& v : w.values()) v = rng.uniform(-s, s);
    return w;
}

LayerSpec make_spectral(std::size_t in, std::size_t out, Rng& rng) {
    LayerSpec l;
    l.kind = LayerKind::SpectralDense;
    l.in_dim = in;
    l.out_dim = out;
    l.weight = uniform_weight(out, in, rng);
    l.bias = Tensor({out});
    return l;
}

LayerSpec make_orthogonal(std::size_t n, Rng& rng) {
    LayerSpec l;
    l.kind = LayerKind::OrthogonalDense;
    l.in_dim = n;
    l.out_dim = n;
    l.weight = Tensor({n, n});
    for (auto& v : l.weight.values()) v = 0.1 * rng.normal();
    l.bias = Tensor({n});
    return l;
}

// distance-unit prototypes start from real training samples; unstructured
// noise converges poorly
LayerSpec make_linf_dist(std::size_t in, std::size_t out, const Tensor& pool, Rng& rng) {
    LayerSpec l;
    l.kind = LayerKind::LinfDistUnit;
    l.in_dim = in;
    l.out_dim = out;
    l.weight = Tensor({out, in});
    const bool from_pool = pool.rank() == 2 && pool.rows() > 0 && pool.cols() == in;
    for (std::size_t u = 0; u < out; ++u) {
        if (from_pool) {
            const auto src = pool.row(rng.below(pool.rows()));
            for (std::size_t i = 0; i < in; ++i)
                l.weight.at(u, i) = src[i] + 0.01 * rng.normal();
        } else {
            for (std::size_t i = 0; i < in; ++i) l.weight.at(u, i) = rng.uniform01();
        }
    }
    l.bias = Tensor({out});
    return l;
}

LayerSpec make_minmax(std::size_t n) {
    LayerSpec l;
    l.kind = LayerKind::MinMaxSort;
    l.in_dim = n;
    l.out_dim = n;
    return l;
}

LayerSpec make_dropout(std::size_t n, double rate) {
    LayerSpec l;
    l.kind = LayerKind::Dropout;
    l.in_dim = n;
    l.out_dim = n;
    l.dropout_rate = rate;
    return l;
}

LayerSpec make_head(std::size_t in, std::size_t classes, Rng& rng) {
    LayerSpec l;
    l.kind = LayerKind::LinearHead;
    l.in_dim = in;
    l.out_dim = classes;
    l.weight = uniform_weight(classes, in, rng);
    l.bias = Tensor({classes});
    return l;
}

}  // namespace

Network build_network(ModelFamily family, ModelSize size, std::size_t in_dim,
                      std::size_t num_classes, bool dropout_enabled, double dropout_rate,
                      const Tensor& prototype_pool, std::uint64_t seed) {
    Rng rng(substream(seed, 0xb11d));
    const SizePreset p = size_preset(size);
    const std::size_t w = p.width;

    Network net;
    net.norm = family_norm(family);
    net.num_classes = num_classes;

    switch (family) {
        case ModelFamily::spectral:
            net.layers.push_back(make_spectral(in_dim, w, rng));
            net.layers.push_back(make_minmax(w));
            for (std::size_t b = 1; b < p.blocks; ++b) {
                net.layers.push_back(make_spectral(w, w, rng));
                net.layers.push_back(make_minmax(w));
            }
            break;
        case ModelFamily::orthogonal:
            net.layers.push_back(make_spectral(in_dim, w, rng));
            net.layers.push_back(make_minmax(w));
            for (std::size_t b = 0; b < p.blocks; ++b) {
                net.layers.push_back(make_orthogonal(w, rng));
                net.layers.push_back(make_minmax(w));
            }
            break;
        case ModelFamily::linf_dist:
            net.layers.push_back(make_linf_dist(in_dim, w, prototype_pool, rng));
            for (std::size_t b = 1; b < p.blocks; ++b)
                net.layers.push_back(make_linf_dist(w, w, Tensor{}, rng));
            break;
        case ModelFamily::sortnet:
            net.layers.push_back(make_linf_dist(in_dim, w, prototype_pool, rng));
            net.layers.push_back(make_minmax(w));
            for (std::size_t b = 1; b < p.blocks; ++b) {
                net.layers.push_back(make_linf_dist(w, w, Tensor{}, rng));
                net.layers.push_back(make_minmax(w));
            }
            break;
    }
    if (dropout_enabled) net.layers.push_back(make_dropout(w, dropout_rate));
    net.layers.push_back(make_head(w, num_classes, rng));

    net.prepare();
    net.refresh_spectral(substream(seed, 0x51e));
    net.validate();
    return net;
}

}  // namespace certkit
