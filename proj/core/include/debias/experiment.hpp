#pragma once

#include <string>
#include <vector>

#include "debias/evaluation.hpp"
#include "debias/synth.hpp"
#include "debias/training.hpp"

namespace debias {

struct SweepRow {
    double lambda = 0.0;
    double moa_accuracy = 0.0;
    double moa_fc = 0.0;
    double batch_accuracy = 0.0;
    double batch_fc = 0.0;
};

struct SweepTable {
    std::vector<SweepRow> rows; // one per lambda, in configured order
    double moa_null = 0.0;
    double batch_null = 0.0;
    int k = 0;
    int n = 0; // rows probed (groups when aggregating)
};

struct SweepResult {
    SweepTable table;
    Checkpoint pretrained;                 // the shared lambda=0 starting point
    TrainHistory pretrain_history;
    std::vector<Checkpoint> checkpoints;   // aligned with table.rows
    std::vector<TrainHistory> histories;   // adversarial phases only
};

// One model per lambda over a shared lambda=0 pretraining: the pretrain phase
// runs once (config.cae_pretrain_epochs epochs), every lambda branch resumes
// from that checkpoint for the remaining epochs, and the lambda=0 row is the
// pretrained model itself ("before adversarial training"). Probes run on
// aggregated group profiles with the given k.
SweepResult run_sweep(const LabeledImageSet& ds, const TrainingConfig& config,
                      const ArchConfig& arch, const std::vector<double>& lambdas, int knn_k = 3);

// `lambda,moa_accuracy,moa_fc,batch_accuracy,batch_fc` rows plus the trailing
// null row (lambda column "null", accuracies = nulls, fold changes = 1).
void write_sweep_csv(const std::string& path, const SweepTable& table);

// Probe a checkpoint's codes against a labeled set (aggregating when the set
// carries group ids). Returns (signal report, batch report).
std::pair<EvalReport, EvalReport> evaluate_checkpoint(const Checkpoint& ck,
                                                      const LabeledImageSet& ds, int knn_k = 3,
                                                      int batch_size = 256);

// The desk-scale benchmark every directional claim is measured on.
SynthConfig standard_benchmark(std::uint64_t seed);

} // namespace debias
