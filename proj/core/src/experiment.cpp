#include "debias/experiment.hpp"

#include <cstdio>
#include <fstream>

#include "debias/errors.hpp"

namespace debias {

std::pair<EvalReport, EvalReport> evaluate_checkpoint(const Checkpoint& ck,
                                                      const LabeledImageSet& ds, int knn_k,
                                                      int batch_size) {
    if (ds.kind != ConfounderKind::Categorical)
        throw DataError("evaluate: paired probes need a categorical confounder");
    FeatureMatrix codes;
    codes.rows = encode_batched(ck.arch, ck.enc, ds.images, batch_size);
    codes.row_ids.resize(static_cast<size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) codes.row_ids[static_cast<size_t>(i)] = i;
    return probe_report(codes, ds.m_labels, ds.s_labels, ds.group_ids, knn_k);
}

SweepResult run_sweep(const LabeledImageSet& ds, const TrainingConfig& config,
                      const ArchConfig& arch, const std::vector<double>& lambdas, int knn_k) {
    if (lambdas.empty()) throw ConfigError("sweep: lambda list is empty");
    config.validate();

    // Shared pretraining: the first cae_pretrain_epochs epochs of the
    // configured schedule, run once. With zero pretrain epochs the branches
    // share only the seeded initialization.
    SweepResult result;
    TrainingConfig pre = config;
    pre.lambda = 0.0;
    pre.epochs = std::min(config.cae_pretrain_epochs, config.epochs);
    pre.cae_pretrain_epochs = pre.epochs;
    if (pre.epochs > 0) {
        auto [ck, hist] = train(ds, pre, arch);
        result.pretrained = std::move(ck);
        result.pretrain_history = std::move(hist);
    } else {
        // materialize the seeded init without taking any steps
        Rng root(config.seed);
        Rng r_enc = root.substream("init.enc");
        Rng r_dec = root.substream("init.dec");
        Rng r_adv = root.substream("init.adv");
        result.pretrained.arch = arch;
        result.pretrained.enc = init_encoder(arch, r_enc);
        result.pretrained.dec = init_decoder(arch, r_dec);
        result.pretrained.adv =
            ds.kind == ConfounderKind::Categorical
                ? init_adversary(arch, AdversaryHead::Categorical, std::max(ds.n_batches, 1), r_adv)
                : init_adversary(arch, AdversaryHead::Continuous, 1, r_adv);
    }

    const int remaining = config.epochs - std::min(config.cae_pretrain_epochs, config.epochs);
    for (double lambda : lambdas) {
        if (lambda == 0.0) {
            result.checkpoints.push_back(result.pretrained);
            result.histories.push_back(result.pretrain_history);
            continue;
        }
        TrainingConfig branch = config;
        branch.lambda = lambda;
        branch.cae_pretrain_epochs = 0;
        branch.epochs = std::max(remaining, 1);
        auto [ck, hist] = train(ds, branch, result.pretrained);
        result.checkpoints.push_back(std::move(ck));
        result.histories.push_back(std::move(hist));
    }

    result.table.k = knn_k;
    for (size_t i = 0; i < lambdas.size(); ++i) {
        const auto [moa, batch] = evaluate_checkpoint(result.checkpoints[i], ds, knn_k);
        SweepRow row;
        row.lambda = lambdas[i];
        row.moa_accuracy = moa.accuracy;
        row.moa_fc = moa.fold_change;
        row.batch_accuracy = batch.accuracy;
        row.batch_fc = batch.fold_change;
        result.table.rows.push_back(row);
        result.table.moa_null = moa.null_accuracy;
        result.table.batch_null = batch.null_accuracy;
        result.table.n = moa.n;
    }
    return result;
}

void write_sweep_csv(const std::string& path, const SweepTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("sweep: cannot open " + path + " for writing");
    out << "lambda,moa_accuracy,moa_fc,batch_accuracy,batch_fc\n";
    char line[256];
    for (const SweepRow& r : table.rows) {
        std::snprintf(line, sizeof(line), "%.10g,%.10g,%.10g,%.10g,%.10g\n", r.lambda,
                      r.moa_accuracy, r.moa_fc, r.batch_accuracy, r.batch_fc);
        out << line;
    }
    std::snprintf(line, sizeof(line), "null,%.10g,1,%.10g,1\n", table.moa_null, table.batch_null);
    out << line;
    if (!out) throw DataError("sweep: write failed for " + path);
}

SynthConfig standard_benchmark(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.image_size = 32;
    cfg.n_classes = 4;
    cfg.n_batches = 3;
    cfg.confound_strength = 0.6;
    cfg.batch_gain_spread = 0.5;
    cfg.noise_sigma = 0.02;
    cfg.samples = 2400;
    cfg.group_size = 20;
    cfg.seed = seed;
    cfg.confounder_kind = ConfounderKind::Categorical;
    return cfg;
}

} // namespace debias
