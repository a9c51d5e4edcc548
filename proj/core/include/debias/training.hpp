#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "debias/checkpoint.hpp"
#include "debias/dataset.hpp"
#include "debias/models.hpp"
#include "debias/optim.hpp"

namespace debias {

// One run of the min/max optimisation E_lambda(theta, w) = L_cae - lambda*L_adv:
// min over the autoencoder theta, max over the adversary w. The schedule is
// cae_pretrain_epochs of lambda=0 epochs, then adv_pretrain_steps
// adversary-only warm-up steps, then adv_steps_per_main adversary steps per
// main step for the remaining epochs.
struct TrainingConfig {
    double lambda = 0.0;
    double lr_main = 1e-3;
    double lr_adv = 1e-3;
    int epochs = 1;
    int batch_size = 32;
    int adv_steps_per_main = 5;
    int adv_pretrain_steps = 500;
    int cae_pretrain_epochs = 0;
    std::uint64_t seed = 0;

    void validate() const; // throws ConfigError
};

struct EpochRecord {
    int epoch = 0;
    double l_cae = 0.0;   // epoch mean reconstruction loss
    double l_adv = 0.0;   // epoch mean adversary loss (as seen by main steps)
    double e_lambda = 0.0; // epoch mean joint objective, lambda in effect
    double seconds = 0.0;  // wall time of the epoch
};

struct TrainHistory {
    std::vector<EpochRecord> records;
};

// `epoch,l_cae,l_adv,e_lambda,seconds` with a header row.
void write_history_csv(const std::string& path, const TrainHistory& history);

// E_lambda = l_cae - lambda * l_adv, in double.
double joint_objective(double l_cae, double l_adv, double lambda);

// Mean squared error between an [N,1] prediction and the (already
// standardized) confounder column; the continuous-head L_adv.
double continuous_adversary_loss(const Tensor& pred, const Tensor& s);

// A minibatch ready for the tape: images plus the confounder target in the
// form the adversary head consumes.
struct TrainBatch {
    Tensor x;                  // [B,3,H,W]
    std::vector<int> s_labels; // categorical targets (empty in continuous mode)
    Tensor s_std;              // [B,1] standardized targets (empty otherwise)
};

struct StepLosses {
    double l_cae = 0.0;
    double l_adv = 0.0;
    double e_lambda = 0.0;
};

// One Adam step on w minimizing L_adv (equivalently maximizing E_lambda).
// theta is bound as constants: bitwise untouched. Returns the batch L_adv.
double adversary_update(const ArchConfig& arch, const EncoderParams& enc_frozen,
                        AdversaryParams& adv, std::map<std::string, AdamState>& opt_adv,
                        const TrainBatch& batch, double lr_adv);

// One Adam step on theta = (encoder, decoder) minimizing E_lambda. w is bound
// as constants: bitwise untouched. The decoder only ever receives the
// reconstruction gradient; L_adv reaches the encoder through z alone.
StepLosses main_update(const ArchConfig& arch, EncoderParams& enc, DecoderParams& dec,
                       const AdversaryParams& adv_frozen,
                       std::map<std::string, AdamState>& opt_main, const TrainBatch& batch,
                       double lr_main, double lambda);

// Fresh seeded initialization, then the full schedule.
std::pair<Checkpoint, TrainHistory> train(const LabeledImageSet& ds, const TrainingConfig& config,
                                          const ArchConfig& arch);

// Resume from an existing checkpoint (e.g. a shared lambda=0 pretrain);
// throws DataError when the adversary head does not match the dataset's
// confounder kind. cae_pretrain_epochs still applies if nonzero.
std::pair<Checkpoint, TrainHistory> train(const LabeledImageSet& ds, const TrainingConfig& config,
                                          Checkpoint start);

// Standardized continuous confounder column: (s - mean) / std over the whole
// dataset; throws NumericError when the variance is zero.
std::vector<float> standardize_confounder(const std::vector<float>& s);

// Encoder codes for a whole image set, computed in minibatches: [N, latent_dim].
Tensor encode_batched(const ArchConfig& arch, const EncoderParams& enc, const Tensor& images,
                      int batch_size);

} // namespace debias
