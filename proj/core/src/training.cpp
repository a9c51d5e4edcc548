#include "debias/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "debias/errors.hpp"
#include "debias/rng.hpp"
#include "debias/tape.hpp"

namespace debias {

namespace {

// Leaf ids in the same order as named_params() so optimizer state keys line up.
std::vector<NodeId> bound_ids(const BoundEncoder& b) {
    std::vector<NodeId> ids;
    for (size_t i = 0; i < b.conv_w.size(); ++i) {
        ids.push_back(b.conv_w[i]);
        ids.push_back(b.conv_b[i]);
    }
    ids.push_back(b.dense_w);
    ids.push_back(b.dense_b);
    return ids;
}

std::vector<NodeId> bound_ids(const BoundDecoder& b) {
    std::vector<NodeId> ids{b.dense_w, b.dense_b};
    for (size_t i = 0; i < b.tconv_w.size(); ++i) {
        ids.push_back(b.tconv_w[i]);
        ids.push_back(b.tconv_b[i]);
    }
    return ids;
}

std::vector<NodeId> bound_ids(const BoundAdversary& b) { return {b.w1, b.b1, b.w2, b.b2}; }

void apply_adam(Tape& t, const std::vector<ParamRef>& refs, const std::vector<NodeId>& ids,
                std::map<std::string, AdamState>& opt, double lr) {
    for (size_t i = 0; i < refs.size(); ++i) {
        AdamState& st = opt[refs[i].name];
        if (t.has_grad(ids[i]))
            adam_step(*refs[i].tensor, t.grad(ids[i]), st, lr);
        else
            adam_step_absent(*refs[i].tensor, st, lr);
    }
}

NodeId adversary_loss_on(Tape& t, NodeId pred, const TrainBatch& batch) {
    if (!batch.s_labels.empty()) return t.cross_entropy_loss(pred, batch.s_labels);
    return t.mse_loss(pred, t.constant(batch.s_std));
}

TrainBatch make_batch(const LabeledImageSet& ds, const std::vector<int>& idx,
                      const std::vector<float>* s_std_all) {
    const int b = static_cast<int>(idx.size());
    const int h = ds.images.dim(2), w = ds.images.dim(3);
    const int64_t plane = static_cast<int64_t>(3) * h * w;
    TrainBatch out;
    out.x = Tensor({b, 3, h, w});
    for (int k = 0; k < b; ++k)
        std::memcpy(out.x.data() + k * plane, ds.images.data() + idx[static_cast<size_t>(k)] * plane,
                    static_cast<size_t>(plane) * sizeof(float));
    if (ds.kind == ConfounderKind::Categorical) {
        out.s_labels.reserve(idx.size());
        for (int i : idx) out.s_labels.push_back(ds.s_labels[static_cast<size_t>(i)]);
    } else {
        out.s_std = Tensor({b, 1});
        for (int k = 0; k < b; ++k)
            out.s_std[k] = (*s_std_all)[static_cast<size_t>(idx[static_cast<size_t>(k)])];
    }
    return out;
}

// Endless shuffled cursor over sample indices for adversary steps: each pass
// is a fresh seeded permutation, so warm-up and alternation walk the whole
// set no matter how step counts divide it.
class AdvFeeder {
public:
    AdvFeeder(Rng source, int n, int batch_size)
        : source_(source), n_(n), batch_(batch_size) {}

    std::vector<int> next() {
        std::vector<int> idx;
        idx.reserve(static_cast<size_t>(std::min(batch_, n_)));
        for (int need = std::min(batch_, n_); need > 0; --need) {
            if (pos_ >= order_.size()) {
                Rng r = source_.substream("pass", pass_++);
                order_ = r.permutation(n_);
                pos_ = 0;
            }
            idx.push_back(order_[pos_++]);
        }
        return idx;
    }

private:
    Rng source_;
    int n_, batch_;
    std::vector<int> order_;
    size_t pos_ = 0;
    std::uint64_t pass_ = 0;
};

void check_dataset_fits(const LabeledImageSet& ds, const Checkpoint& ck) {
    if (ds.size() == 0) throw DataError("train: dataset is empty");
    if (ds.images.dim(1) != ck.arch.channels || ds.images.dim(2) != ck.arch.image_size ||
        ds.images.dim(3) != ck.arch.image_size)
        throw DataError("train: dataset geometry " + shape_str(ds.images.shape()) +
                        " does not fit the model (image_size " +
                        std::to_string(ck.arch.image_size) + ")");
    if (ds.kind == ConfounderKind::Categorical) {
        if (ck.adv.head != AdversaryHead::Categorical || ck.adv.out_units != ds.n_batches)
            throw DataError("train: categorical confounder with " + std::to_string(ds.n_batches) +
                            " batches does not match the adversary head");
    } else {
        if (ck.adv.head != AdversaryHead::Continuous)
            throw DataError("train: continuous confounder requires a regression adversary head");
    }
}

} // namespace

void TrainingConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ConfigError("train: lambda must be a nonnegative real");
    if (!(lr_main > 0.0)) throw ConfigError("train: lr_main must be positive");
    if (!(lr_adv > 0.0)) throw ConfigError("train: lr_adv must be positive");
    if (epochs < 1) throw ConfigError("train: epochs must be positive");
    if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
    if (adv_steps_per_main < 1) throw ConfigError("train: adv_steps_per_main must be positive");
    if (adv_pretrain_steps < 0) throw ConfigError("train: adv_pretrain_steps must be nonnegative");
    if (cae_pretrain_epochs < 0) throw ConfigError("train: cae_pretrain_epochs must be nonnegative");
}

double joint_objective(double l_cae, double l_adv, double lambda) {
    return l_cae - lambda * l_adv;
}

double continuous_adversary_loss(const Tensor& pred, const Tensor& s) {
    require_same_shape(pred, s, "continuous_adversary_loss");
    if (pred.rank() != 2 || pred.dim(1) != 1)
        throw ShapeError("continuous_adversary_loss: expected [N,1], got " +
                         shape_str(pred.shape()));
    double acc = 0.0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
        const double d = static_cast<double>(pred[i]) - static_cast<double>(s[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(pred.numel());
}

std::vector<float> standardize_confounder(const std::vector<float>& s) {
    if (s.empty()) throw DataError("standardize: empty confounder column");
    double mean = 0.0;
    for (float v : s) mean += static_cast<double>(v);
    mean /= static_cast<double>(s.size());
    double var = 0.0;
    for (float v : s) {
        const double d = static_cast<double>(v) - mean;
        var += d * d;
    }
    var /= static_cast<double>(s.size());
    if (!(var > 0.0))
        throw NumericError("standardize: confounder has zero variance");
    const double inv = 1.0 / std::sqrt(var);
    std::vector<float> out(s.size());
    for (size_t i = 0; i < s.size(); ++i)
        out[i] = static_cast<float>((static_cast<double>(s[i]) - mean) * inv);
    return out;
}

double adversary_update(const ArchConfig& arch, const EncoderParams& enc_frozen,
                        AdversaryParams& adv, std::map<std::string, AdamState>& opt_adv,
                        const TrainBatch& batch, double lr_adv) {
    Tape t;
    const BoundEncoder be = bind(t, enc_frozen, false);
    const BoundAdversary ba = bind(t, adv, true);
    const NodeId z = encode_on(t, arch, be, t.constant(batch.x));
    const NodeId pred = adversary_on(t, arch, ba, z);
    const NodeId l_adv = adversary_loss_on(t, pred, batch);
    t.backward(l_adv);
    apply_adam(t, named_params(adv), bound_ids(ba), opt_adv, lr_adv);
    return t.scalar_value(l_adv);
}

StepLosses main_update(const ArchConfig& arch, EncoderParams& enc, DecoderParams& dec,
                       const AdversaryParams& adv_frozen,
                       std::map<std::string, AdamState>& opt_main, const TrainBatch& batch,
                       double lr_main, double lambda) {
    Tape t;
    const BoundEncoder be = bind(t, enc, true);
    const BoundDecoder bd = bind(t, dec, true);
    const BoundAdversary ba = bind(t, adv_frozen, false);
    const NodeId x = t.constant(batch.x);
    const NodeId z = encode_on(t, arch, be, x);
    const NodeId x_hat = decode_on(t, arch, bd, z);
    const NodeId l_cae = t.mse_loss(x_hat, x);
    const NodeId pred = adversary_on(t, arch, ba, z); // L_adv touches theta via z only
    const NodeId l_adv = adversary_loss_on(t, pred, batch);
    const NodeId e = t.sub(l_cae, t.scale(l_adv, lambda));
    t.backward(e);
    apply_adam(t, named_params(enc), bound_ids(be), opt_main, lr_main);
    apply_adam(t, named_params(dec), bound_ids(bd), opt_main, lr_main);
    return {t.scalar_value(l_cae), t.scalar_value(l_adv), t.scalar_value(e)};
}

std::pair<Checkpoint, TrainHistory> train(const LabeledImageSet& ds, const TrainingConfig& config,
                                          const ArchConfig& arch) {
    arch.validate();
    const Rng root(config.seed);
    Checkpoint start;
    start.arch = arch;
    {
        Rng r_enc = root.substream("init.enc");
        Rng r_dec = root.substream("init.dec");
        Rng r_adv = root.substream("init.adv");
        start.enc = init_encoder(arch, r_enc);
        start.dec = init_decoder(arch, r_dec);
        if (ds.kind == ConfounderKind::Categorical)
            start.adv = init_adversary(arch, AdversaryHead::Categorical,
                                       std::max(ds.n_batches, 1), r_adv);
        else
            start.adv = init_adversary(arch, AdversaryHead::Continuous, 1, r_adv);
    }
    return train(ds, config, std::move(start));
}

std::pair<Checkpoint, TrainHistory> train(const LabeledImageSet& ds, const TrainingConfig& config,
                                          Checkpoint start) {
    config.validate();
    check_dataset_fits(ds, start);

    const int n = ds.size();
    std::vector<float> s_std_all;
    if (ds.kind == ConfounderKind::Continuous) s_std_all = standardize_confounder(ds.s_continuous);
    const std::vector<float>* s_std = ds.kind == ConfounderKind::Continuous ? &s_std_all : nullptr;

    const Rng root(config.seed);
    AdvFeeder feeder(root.substream("advbatch"), n, config.batch_size);

    Checkpoint ck = std::move(start);
    TrainHistory history;
    const int pretrain_epochs = std::min(config.cae_pretrain_epochs, config.epochs);
    bool adversary_warmed = false;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const bool pretraining = epoch < pretrain_epochs;
        const double lambda_eff = pretraining ? 0.0 : config.lambda;

        if (!pretraining && !adversary_warmed) {
            for (int step = 0; step < config.adv_pretrain_steps; ++step) {
                const TrainBatch b = make_batch(ds, feeder.next(), s_std);
                adversary_update(ck.arch, ck.enc, ck.adv, ck.opt_adv, b, config.lr_adv);
            }
            adversary_warmed = true;
        }

        std::vector<int> order;
        {
            Rng r = root.substream("shuffle", static_cast<uint64_t>(epoch));
            order = r.permutation(n);
        }

        EpochRecord rec;
        rec.epoch = epoch + 1;
        int steps = 0;
        for (int begin = 0; begin < n; begin += config.batch_size) {
            const int end = std::min(begin + config.batch_size, n);
            const std::vector<int> idx(order.begin() + begin, order.begin() + end);
            if (!pretraining) {
                for (int k = 0; k < config.adv_steps_per_main; ++k) {
                    const TrainBatch ab = make_batch(ds, feeder.next(), s_std);
                    adversary_update(ck.arch, ck.enc, ck.adv, ck.opt_adv, ab, config.lr_adv);
                }
            }
            const TrainBatch mb = make_batch(ds, idx, s_std);
            const StepLosses losses = main_update(ck.arch, ck.enc, ck.dec, ck.adv, ck.opt_main, mb,
                                                  config.lr_main, lambda_eff);
            rec.l_cae += losses.l_cae;
            rec.l_adv += losses.l_adv;
            rec.e_lambda += losses.e_lambda;
            ++steps;
        }
        rec.l_cae /= steps;
        rec.l_adv /= steps;
        rec.e_lambda /= steps;
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.records.push_back(rec);
    }
    return {std::move(ck), std::move(history)};
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("history: cannot open " + path + " for writing");
    out << "epoch,l_cae,l_adv,e_lambda,seconds\n";
    char line[256];
    for (const EpochRecord& r : history.records) {
        std::snprintf(line, sizeof(line), "%d,%.10g,%.10g,%.10g,%.3f\n", r.epoch, r.l_cae, r.l_adv,
                      r.e_lambda, r.seconds);
        out << line;
    }
    if (!out) throw DataError("history: write failed for " + path);
}

Tensor encode_batched(const ArchConfig& arch, const EncoderParams& enc, const Tensor& images,
                      int batch_size) {
    if (images.rank() != 4) throw ShapeError("encode_batched: expected [N,C,H,W] images");
    if (batch_size < 1) throw HyperparamError("encode_batched: batch_size must be positive");
    const int n = images.dim(0);
    const int64_t plane =
        static_cast<int64_t>(images.dim(1)) * images.dim(2) * images.dim(3);
    Tensor codes({n, arch.latent_dim});
    for (int begin = 0; begin < n; begin += batch_size) {
        const int b = std::min(batch_size, n - begin);
        Tensor chunk({b, images.dim(1), images.dim(2), images.dim(3)});
        std::memcpy(chunk.data(), images.data() + begin * plane,
                    static_cast<size_t>(b * plane) * sizeof(float));
        const Tensor z = encode(arch, enc, chunk);
        std::memcpy(codes.data() + static_cast<int64_t>(begin) * arch.latent_dim, z.data(),
                    static_cast<size_t>(b) * arch.latent_dim * sizeof(float));
    }
    return codes;
}

} // namespace debias
