#include "certkit/checkpoint.hpp"

#include "certkit/binio.hpp"

namespace certkit {

namespace {

constexpr char kMagic[4] = {'L', 'I', 'P', 'N'};
constexpr std::uint32_t kVersion = 1;

bool kind_has_bias(LayerKind k) {
    return k == LayerKind::SpectralDense || k == LayerKind::OrthogonalDense ||
           k == LayerKind::LinfDistUnit || k == LayerKind::LinearHead;
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
    net.validate();
    BinWriter w(path);
    w.magic(kMagic);
    w.u32(kVersion);
    w.u8(static_cast<std::uint8_t>(net.norm));
    w.u32(static_cast<std::uint32_t>(net.layers.size()));
    for (const LayerSpec& l : net.layers) {
        w.u8(static_cast<std::uint8_t>(l.kind));
        w.u32(static_cast<std::uint32_t>(l.in_dim));
        w.u32(static_cast<std::uint32_t>(l.out_dim));
        w.f64(l.dropout_rate);
        if (l.has_params()) {
            w.f64_array(l.weight.data(), l.weight.size());
            w.f64_array(l.bias.data(), l.bias.size());
        }
        if (l.kind == LayerKind::SpectralDense) w.f64(l.sigma_hat);
    }
    w.close();
}

Network load_checkpoint(const std::string& path) {
    BinReader r(path);
    r.expect_magic(kMagic);
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        fail_io("'" + path + "': unsupported checkpoint version " + std::to_string(version) +
                " (expected " + std::to_string(kVersion) + ")");
    const std::uint8_t norm_tag = r.u8();
    if (norm_tag > 1) fail_io("'" + path + "': invalid norm tag");

    Network net;
    net.norm = static_cast<NormKind>(norm_tag);
    const std::uint32_t count = r.u32();
    net.layers.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        LayerSpec l;
        const std::uint8_t kind = r.u8();
        if (kind > static_cast<std::uint8_t>(LayerKind::LinearHead))
            fail_io("'" + path + "': invalid layer kind at byte offset " +
                    std::to_string(r.offset() - 1));
        l.kind = static_cast<LayerKind>(kind);
        l.in_dim = r.u32();
        l.out_dim = r.u32();
        l.dropout_rate = r.f64();
        if (l.has_params()) {
            l.weight = Tensor({l.out_dim, l.in_dim});
            r.f64_array(l.weight.data(), l.weight.size());
            l.bias = Tensor({l.out_dim});
            r.f64_array(l.bias.data(), l.bias.size());
        }
        if (l.kind == LayerKind::SpectralDense) l.sigma_hat = r.f64();
        net.layers.push_back(std::move(l));
    }
    r.expect_eof();
    net.num_classes = net.layers.empty() ? 0 : net.layers.back().out_dim;
    net.prepare();
    net.validate();
    return net;
}

}  // namespace certkit
