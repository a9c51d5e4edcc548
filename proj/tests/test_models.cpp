#include <cmath>
#include <cstring>

#include "debias/errors.hpp"
#include "debias/models.hpp"
#include "debias/rng.hpp"
#include "debias/tape.hpp"
#include "doctest.h"

using namespace debias;

namespace {

ArchConfig small_arch() {
    ArchConfig a;
    a.image_size = 16;
    a.conv_channels = {8, 16};
    a.latent_dim = 32;
    a.adv_hidden = 16;
    return a;
}

void zero_params(std::vector<ParamRef> refs) {
    for (ParamRef& r : refs) r.tensor->fill(0.0f);
}

} // namespace

TEST_CASE("encode and decode shapes chain through the conv stack") {
    const ArchConfig arch = small_arch();
    Rng rng(7);
    Rng r_enc = rng.substream("enc"), r_dec = rng.substream("dec"), r_adv = rng.substream("adv");
    const EncoderParams enc = init_encoder(arch, r_enc);
    const DecoderParams dec = init_decoder(arch, r_dec);
    const AdversaryParams adv = init_adversary(arch, AdversaryHead::Categorical, 3, r_adv);

    Rng xr(11);
    Tensor x({5, 3, 16, 16});
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(xr.uniform());

    const Tensor z = encode(arch, enc, x);
    CHECK(z.shape() == std::vector<int>{5, 32});

    const Tensor back = decode(arch, dec, z);
    CHECK(back.shape() == std::vector<int>{5, 3, 16, 16});
    for (int64_t i = 0; i < back.numel(); ++i) {
        CHECK(back[i] > 0.0f); // sigmoid range
        CHECK(back[i] < 1.0f);
    }

    const Tensor logits = adversary_forward(arch, adv, z);
    CHECK(logits.shape() == std::vector<int>{5, 3});
}

TEST_CASE("zero parameters give zero codes and mid-gray reconstructions") {
    const ArchConfig arch = small_arch();
    Rng rng(3);
    Rng r_enc = rng.substream("enc"), r_dec = rng.substream("dec");
    EncoderParams enc = init_encoder(arch, r_enc);
    DecoderParams dec = init_decoder(arch, r_dec);
    zero_params(named_params(enc));
    zero_params(named_params(dec));

    Tensor x = Tensor::full({2, 3, 16, 16}, 0.5f); // mid-gray input
    const Tensor z = encode(arch, enc, x);
    for (int64_t i = 0; i < z.numel(); ++i) CHECK(z[i] == 0.0f);

    // sigmoid(0) = 0.5 exactly, so reconstruction error on mid-gray is zero
    const Tensor rec = reconstruct(arch, enc, dec, x);
    for (int64_t i = 0; i < rec.numel(); ++i) CHECK(rec[i] == 0.5f);
}

TEST_CASE("initialization is deterministic per substream and bounded by fan-in") {
    const ArchConfig arch = small_arch();
    Rng a(42), b(42);
    Rng ra = a.substream("enc"), rb = b.substream("enc");
    const EncoderParams p1 = init_encoder(arch, ra);
    const EncoderParams p2 = init_encoder(arch, rb);
    CHECK(std::memcmp(p1.dense_w.data(), p2.dense_w.data(),
                      sizeof(float) * static_cast<size_t>(p1.dense_w.numel())) == 0);
    CHECK(std::memcmp(p1.conv_w[0].data(), p2.conv_w[0].data(),
                      sizeof(float) * static_cast<size_t>(p1.conv_w[0].numel())) == 0);

    // He-uniform bound for the first conv: sqrt(6 / (3*3*3))
    const float bound = std::sqrt(6.0f / 27.0f);
    for (int64_t i = 0; i < p1.conv_w[0].numel(); ++i) {
        CHECK(p1.conv_w[0][i] < bound);
        CHECK(p1.conv_w[0][i] > -bound);
    }
    for (int64_t i = 0; i < p1.conv_b[0].numel(); ++i) CHECK(p1.conv_b[0][i] == 0.0f);

    Rng c(43);
    Rng rc = c.substream("enc");
    const EncoderParams p3 = init_encoder(arch, rc);
    CHECK(p3.dense_w[0] != p1.dense_w[0]);
}

TEST_CASE("parameter names are stable and ordered") {
    const ArchConfig arch = small_arch();
    Rng rng(1);
    Rng r_enc = rng.substream("enc"), r_dec = rng.substream("dec"), r_adv = rng.substream("adv");
    EncoderParams enc = init_encoder(arch, r_enc);
    DecoderParams dec = init_decoder(arch, r_dec);
    AdversaryParams adv = init_adversary(arch, AdversaryHead::Continuous, 1, r_adv);

    std::vector<std::string> enc_names, dec_names, adv_names;
    for (const ParamRef& r : named_params(enc)) enc_names.push_back(r.name);
    for (const ParamRef& r : named_params(dec)) dec_names.push_back(r.name);
    for (const ParamRef& r : named_params(adv)) adv_names.push_back(r.name);

    CHECK(enc_names == std::vector<std::string>{"enc.conv0.w", "enc.conv0.b", "enc.conv1.w",
                                                "enc.conv1.b", "enc.dense.w", "enc.dense.b"});
    CHECK(dec_names == std::vector<std::string>{"dec.dense.w", "dec.dense.b", "dec.tconv0.w",
                                                "dec.tconv0.b", "dec.tconv1.w", "dec.tconv1.b"});
    CHECK(adv_names == std::vector<std::string>{"adv.fc1.w", "adv.fc1.b", "adv.fc2.w", "adv.fc2.b"});
}

TEST_CASE("constant binding freezes a network for the whole pass") {
    const ArchConfig arch = small_arch();
    Rng rng(9);
    Rng r_enc = rng.substream("enc");
    const EncoderParams enc = init_encoder(arch, r_enc);

    Tape t;
    const BoundEncoder be = bind(t, enc, false); // frozen
    Tensor x = Tensor::full({1, 3, 16, 16}, 0.3f);
    const NodeId z = encode_on(t, arch, be, t.constant(x));
    const NodeId loss = t.sum_all(z);
    t.backward(loss);
    CHECK_FALSE(t.has_grad(be.dense_w));
    CHECK_FALSE(t.has_grad(be.conv_w[0]));
}

TEST_CASE("trainable binding reaches every encoder parameter") {
    const ArchConfig arch = small_arch();
    Rng rng(9);
    Rng r_enc = rng.substream("enc");
    const EncoderParams enc = init_encoder(arch, r_enc);

    Tape t;
    const BoundEncoder be = bind(t, enc, true);
    Tensor x = Tensor::full({1, 3, 16, 16}, 0.3f);
    const NodeId z = encode_on(t, arch, be, t.constant(x));
    t.backward(t.sum_all(z));
    CHECK(t.has_grad(be.dense_w));
    CHECK(t.has_grad(be.dense_b));
    CHECK(t.has_grad(be.conv_w[0]));
    CHECK(t.has_grad(be.conv_b[1]));
}

TEST_CASE("arch validation rejects broken geometry") {
    ArchConfig bad = small_arch();
    bad.image_size = 18; // 18/2=9 is odd, second halving fails
    CHECK_THROWS_AS(bad.validate(), HyperparamError);

    ArchConfig fat = small_arch();
    fat.latent_dim = 16 * 16 * 3; // no compression at all
    CHECK_THROWS_AS(fat.validate(), HyperparamError);

    ArchConfig empty = small_arch();
    empty.conv_channels.clear();
    CHECK_THROWS_AS(empty.validate(), HyperparamError);
}

TEST_CASE("encode rejects images that do not match the arch") {
    const ArchConfig arch = small_arch();
    Rng rng(5);
    Rng r_enc = rng.substream("enc");
    const EncoderParams enc = init_encoder(arch, r_enc);
    Tensor wrong({2, 3, 8, 8});
    CHECK_THROWS_AS(encode(arch, enc, wrong), ShapeError);
    Tensor wrong_ch({2, 1, 16, 16});
    CHECK_THROWS_AS(encode(arch, enc, wrong_ch), ShapeError);
}

TEST_CASE("continuous adversary head is a single unit") {
    const ArchConfig arch = small_arch();
    Rng rng(5);
    Rng r = rng.substream("adv");
    CHECK_THROWS_AS(init_adversary(arch, AdversaryHead::Continuous, 3, r), HyperparamError);
    Rng r2 = rng.substream("adv");
    const AdversaryParams adv = init_adversary(arch, AdversaryHead::Continuous, 1, r2);
    CHECK(adv.w2.shape() == std::vector<int>{1, 16});
}
