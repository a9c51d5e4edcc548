#include "debias/models.hpp"

#include <cmath>
#include <string>

#include "debias/errors.hpp"

namespace debias {

int ArchConfig::bottleneck_spatial() const {
    int s = image_size;
    for (int i = 0; i < layers(); ++i) s /= 2;
    return s;
}

int ArchConfig::bottleneck_flat() const {
    const int s = bottleneck_spatial();
    return conv_channels.back() * s * s;
}

void ArchConfig::validate() const {
    if (image_size < 1 || channels < 1 || latent_dim < 1 || adv_hidden < 1) {
        throw HyperparamError("arch: image_size, channels, latent_dim, adv_hidden must be positive");
    }
    if (conv_channels.empty()) throw HyperparamError("arch: conv_channels must be non-empty");
    for (int c : conv_channels) {
        if (c < 1) throw HyperparamError("arch: conv channel counts must be positive");
    }
    int s = image_size;
    for (int i = 0; i < layers(); ++i) {
        if (s % 2 != 0) {
            throw HyperparamError("arch: image_size " + std::to_string(image_size) +
                                  " is not divisible by 2^" + std::to_string(layers()) +
                                  " (halving conv stack)");
        }
        s /= 2;
    }
    if (s < 1) throw HyperparamError("arch: conv stack collapses the image to nothing");
    // latent must be a genuine bottleneck: d << h*w*c, enforced as d <= h*w*c/4.
    const long full = static_cast<long>(image_size) * image_size * channels;
    if (static_cast<long>(latent_dim) * 4 > full) {
        throw HyperparamError("arch: latent_dim " + std::to_string(latent_dim) +
                              " is not a bottleneck for " + std::to_string(full) + " input values");
    }
}

namespace {

Tensor he_uniform(Rng& rng, std::vector<int> shape, int fan_in) {
    Tensor t(std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(-bound, bound));
    return t;
}

} // namespace

EncoderParams init_encoder(const ArchConfig& arch, Rng& rng) {
    arch.validate();
    EncoderParams p;
    int in_ch = arch.channels;
    for (int out_ch : arch.conv_channels) {
        const int k = ArchConfig::enc_kernel;
        p.conv_w.push_back(he_uniform(rng, {out_ch, in_ch, k, k}, in_ch * k * k));
        p.conv_b.push_back(Tensor({out_ch}));
        in_ch = out_ch;
    }
    const int flat = arch.bottleneck_flat();
    p.dense_w = he_uniform(rng, {arch.latent_dim, flat}, flat);
    p.dense_b = Tensor({arch.latent_dim});
    return p;
}

DecoderParams init_decoder(const ArchConfig& arch, Rng& rng) {
    arch.validate();
    DecoderParams p;
    const int flat = arch.bottleneck_flat();
    p.dense_w = he_uniform(rng, {flat, arch.latent_dim}, arch.latent_dim);
    p.dense_b = Tensor({flat});
    // mirror the channel chain back down to the image
    std::vector<int> chain;
    for (int i = arch.layers() - 1; i >= 0; --i) chain.push_back(arch.conv_channels[static_cast<size_t>(i)]);
    chain.push_back(arch.channels);
    for (size_t j = 0; j + 1 < chain.size(); ++j) {
        const int in_ch = chain[j], out_ch = chain[j + 1];
        const int k = ArchConfig::dec_kernel;
        p.tconv_w.push_back(he_uniform(rng, {in_ch, out_ch, k, k}, in_ch * k * k));
        p.tconv_b.push_back(Tensor({out_ch}));
    }
    return p;
}

AdversaryParams init_adversary(const ArchConfig& arch, AdversaryHead head, int out_units, Rng& rng) {
    arch.validate();
    if (out_units < 1) throw HyperparamError("adversary: out_units must be positive");
    if (head == AdversaryHead::Continuous && out_units != 1) {
        throw HyperparamError("adversary: continuous head has exactly 1 output unit");
    }
    AdversaryParams p;
    p.head = head;
    p.out_units = out_units;
    p.w1 = he_uniform(rng, {arch.adv_hidden, arch.latent_dim}, arch.latent_dim);
    p.b1 = Tensor({arch.adv_hidden});
    p.w2 = he_uniform(rng, {out_units, arch.adv_hidden}, arch.adv_hidden);
    p.b2 = Tensor({out_units});
    return p;
}

std::vector<ParamRef> named_params(EncoderParams& p) {
    std::vector<ParamRef> refs;
    for (size_t i = 0; i < p.conv_w.size(); ++i) {
        const std::string layer = "enc.conv" + std::to_string(i);
        refs.push_back({layer + ".w", &p.conv_w[i]});
        refs.push_back({layer + ".b", &p.conv_b[i]});
    }
    refs.push_back({"enc.dense.w", &p.dense_w});
    refs.push_back({"enc.dense.b", &p.dense_b});
    return refs;
}

std::vector<ParamRef> named_params(DecoderParams& p) {
    std::vector<ParamRef> refs;
    refs.push_back({"dec.dense.w", &p.dense_w});
    refs.push_back({"dec.dense.b", &p.dense_b});
    for (size_t i = 0; i < p.tconv_w.size(); ++i) {
        const std::string layer = "dec.tconv" + std::to_string(i);
        refs.push_back({layer + ".w", &p.tconv_w[i]});
        refs.push_back({layer + ".b", &p.tconv_b[i]});
    }
    return refs;
}

std::vector<ParamRef> named_params(AdversaryParams& p) {
    return {{"adv.fc1.w", &p.w1}, {"adv.fc1.b", &p.b1}, {"adv.fc2.w", &p.w2}, {"adv.fc2.b", &p.b2}};
}

BoundEncoder bind(Tape& t, const EncoderParams& p, bool trainable) {
    BoundEncoder b;
    for (size_t i = 0; i < p.conv_w.size(); ++i) {
        b.conv_w.push_back(t.leaf(p.conv_w[i], trainable));
        b.conv_b.push_back(t.leaf(p.conv_b[i], trainable));
    }
    b.dense_w = t.leaf(p.dense_w, trainable);
    b.dense_b = t.leaf(p.dense_b, trainable);
    return b;
}

BoundDecoder bind(Tape& t, const DecoderParams& p, bool trainable) {
    BoundDecoder b;
    b.dense_w = t.leaf(p.dense_w, trainable);
    b.dense_b = t.leaf(p.dense_b, trainable);
    for (size_t i = 0; i < p.tconv_w.size(); ++i) {
        b.tconv_w.push_back(t.leaf(p.tconv_w[i], trainable));
        b.tconv_b.push_back(t.leaf(p.tconv_b[i], trainable));
    }
    return b;
}

BoundAdversary bind(Tape& t, const AdversaryParams& p, bool trainable) {
    return {t.leaf(p.w1, trainable), t.leaf(p.b1, trainable), t.leaf(p.w2, trainable),
            t.leaf(p.b2, trainable)};
}

NodeId encode_on(Tape& t, const ArchConfig& arch, const BoundEncoder& enc, NodeId x) {
    const Tensor& xv = t.value(x);
    if (xv.rank() != 4 || xv.dim(1) != arch.channels || xv.dim(2) != arch.image_size ||
        xv.dim(3) != arch.image_size) {
        throw ShapeError("encode: expected [N, " + std::to_string(arch.channels) + ", " +
                         std::to_string(arch.image_size) + ", " + std::to_string(arch.image_size) +
                         "], got " + shape_str(xv.shape()));
    }
    const int n = xv.dim(0); // xv dangles once the tape grows below
    NodeId h = x;
    for (size_t i = 0; i < enc.conv_w.size(); ++i) {
        h = t.conv2d(h, enc.conv_w[i], enc.conv_b[i], ArchConfig::conv_stride, ArchConfig::conv_pad);
        h = t.leaky_relu(h, arch.leaky_alpha);
    }
    h = t.reshape(h, {n, arch.bottleneck_flat()});
    return t.dense(h, enc.dense_w, enc.dense_b);
}

NodeId decode_on(Tape& t, const ArchConfig& arch, const BoundDecoder& dec, NodeId z) {
    const Tensor& zv = t.value(z);
    if (zv.rank() != 2 || zv.dim(1) != arch.latent_dim) {
        throw ShapeError("decode: expected [N, " + std::to_string(arch.latent_dim) + "], got " +
                         shape_str(zv.shape()));
    }
    const int n = zv.dim(0);
    const int s = arch.bottleneck_spatial();
    NodeId h = t.dense(z, dec.dense_w, dec.dense_b);
    h = t.leaky_relu(h, arch.leaky_alpha);
    h = t.reshape(h, {n, arch.conv_channels.back(), s, s});
    for (size_t i = 0; i < dec.tconv_w.size(); ++i) {
        h = t.conv_transpose2d(h, dec.tconv_w[i], dec.tconv_b[i], ArchConfig::conv_stride,
                               ArchConfig::conv_pad);
        if (i + 1 < dec.tconv_w.size()) {
            h = t.leaky_relu(h, arch.leaky_alpha);
        } else {
            h = t.sigmoid(h);
        }
    }
    return h;
}

NodeId adversary_on(Tape& t, const ArchConfig& arch, const BoundAdversary& adv, NodeId z) {
    const Tensor& zv = t.value(z);
    if (zv.rank() != 2 || zv.dim(1) != arch.latent_dim) {
        throw ShapeError("adversary: expected [N, " + std::to_string(arch.latent_dim) + "], got " +
                         shape_str(zv.shape()));
    }
    NodeId h = t.dense(z, adv.w1, adv.b1);
    h = t.leaky_relu(h, arch.leaky_alpha);
    return t.dense(h, adv.w2, adv.b2);
}

Tensor encode(const ArchConfig& arch, const EncoderParams& enc, const Tensor& x) {
    Tape t;
    return t.value(encode_on(t, arch, bind(t, enc, false), t.constant(x)));
}

Tensor decode(const ArchConfig& arch, const DecoderParams& dec, const Tensor& z) {
    Tape t;
    return t.value(decode_on(t, arch, bind(t, dec, false), t.constant(z)));
}

Tensor reconstruct(const ArchConfig& arch, const EncoderParams& enc, const DecoderParams& dec,
                   const Tensor& x) {
    Tape t;
    NodeId z = encode_on(t, arch, bind(t, enc, false), t.constant(x));
    return t.value(decode_on(t, arch, bind(t, dec, false), z));
}

Tensor adversary_forward(const ArchConfig& arch, const AdversaryParams& adv, const Tensor& z) {
    Tape t;
    return t.value(adversary_on(t, arch, bind(t, adv, false), t.constant(z)));
}

} // namespace debias
