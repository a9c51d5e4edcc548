#pragma once

#include <string>
#include <vector>

#include "debias/rng.hpp"
#include "debias/tape.hpp"
#include "debias/tensor.hpp"

namespace debias {

enum class AdversaryHead { Categorical, Continuous };

// Geometry shared by the three networks. The encoder halves the spatial size
// per conv layer (kernel 3, stride 2, pad 1); the decoder doubles it back
// (kernel 4, stride 2, pad 1, an exact 2x upsample).
struct ArchConfig {
    int image_size = 32;
    int channels = 3;
    std::vector<int> conv_channels = {16, 32, 64};
    int latent_dim = 64;
    int adv_hidden = 64;
    float leaky_alpha = 0.01f;

    static constexpr int enc_kernel = 3, dec_kernel = 4, conv_stride = 2, conv_pad = 1;

    int layers() const { return static_cast<int>(conv_channels.size()); }
    int bottleneck_spatial() const; // image_size / 2^layers
    int bottleneck_flat() const;    // conv_channels.back() * spatial^2

    // Throws HyperparamError when the geometry cannot chain: image_size not
    // divisible by 2^layers, or latent_dim not small versus h*w*c.
    void validate() const;
};

struct EncoderParams {
    std::vector<Tensor> conv_w, conv_b;
    Tensor dense_w, dense_b; // flattened features -> latent_dim
};

struct DecoderParams {
    Tensor dense_w, dense_b; // latent_dim -> flattened bottleneck
    std::vector<Tensor> tconv_w, tconv_b;
};

struct AdversaryParams {
    AdversaryHead head = AdversaryHead::Categorical;
    int out_units = 1; // K classes, or 1 for the regressor
    Tensor w1, b1, w2, b2;
};

// He-style uniform init, bound sqrt(6/fan_in); biases zero. Draw order is
// fixed so a given rng substream reproduces parameters exactly.
EncoderParams init_encoder(const ArchConfig& arch, Rng& rng);
DecoderParams init_decoder(const ArchConfig& arch, Rng& rng);
AdversaryParams init_adversary(const ArchConfig& arch, AdversaryHead head, int out_units, Rng& rng);

// Parameter traversal in a stable order with stable names ("enc.conv0.w",
// "dec.dense.b", "adv.fc1.w", ...). Checkpoints and optimizer states key on
// these names.
struct ParamRef {
    std::string name;
    Tensor* tensor;
};
std::vector<ParamRef> named_params(EncoderParams& p);
std::vector<ParamRef> named_params(DecoderParams& p);
std::vector<ParamRef> named_params(AdversaryParams& p);

// Tape bindings: insert every parameter as a leaf (trainable => gradients).
// Binding as constants freezes the network bitwise for that pass.
struct BoundEncoder {
    std::vector<NodeId> conv_w, conv_b;
    NodeId dense_w, dense_b;
};
struct BoundDecoder {
    NodeId dense_w, dense_b;
    std::vector<NodeId> tconv_w, tconv_b;
};
struct BoundAdversary {
    NodeId w1, b1, w2, b2;
};

BoundEncoder bind(Tape& t, const EncoderParams& p, bool trainable);
BoundDecoder bind(Tape& t, const DecoderParams& p, bool trainable);
BoundAdversary bind(Tape& t, const AdversaryParams& p, bool trainable);

// Graph builders. x: [N, channels, image_size, image_size]; z: [N, latent_dim].
NodeId encode_on(Tape& t, const ArchConfig& arch, const BoundEncoder& enc, NodeId x);
NodeId decode_on(Tape& t, const ArchConfig& arch, const BoundDecoder& dec, NodeId z);
NodeId adversary_on(Tape& t, const ArchConfig& arch, const BoundAdversary& adv, NodeId z);

// Gradient-free conveniences (throwaway tape, constants only).
Tensor encode(const ArchConfig& arch, const EncoderParams& enc, const Tensor& x);
Tensor decode(const ArchConfig& arch, const DecoderParams& dec, const Tensor& z);
Tensor reconstruct(const ArchConfig& arch, const EncoderParams& enc, const DecoderParams& dec,
                   const Tensor& x);
Tensor adversary_forward(const ArchConfig& arch, const AdversaryParams& adv, const Tensor& z);

} // namespace debias
