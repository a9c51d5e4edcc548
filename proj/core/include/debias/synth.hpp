#pragma once

#include <cstdint>

#include "debias/dataset.hpp"

namespace debias {

// Synthetic cell-image generator. Each sample is a 3-channel square image:
//   R: one rotated anisotropic Gaussian nucleus whose radius and eccentricity
//      grow with the class label m,
//   G: a circular halo ring around the nucleus,
//   B: an oriented grating whose frequency and orientation depend on m,
// all multiplied by a per-batch gain (the nuisance signal) plus pixel noise.
//
// confound_strength rho couples the class to the batch: with probability rho
// the class is forced to (batch mod n_classes) -- or the batch-quantile bin in
// continuous mode -- otherwise drawn uniformly.
struct SynthConfig {
    int image_size = 32;
    int n_classes = 4;
    int n_batches = 3;
    double confound_strength = 0.6; // rho in [0,1]
    double batch_gain_spread = 0.35;
    double noise_sigma = 0.02;
    int samples = 1000;
    std::uint64_t seed = 0;
    ConfounderKind confounder_kind = ConfounderKind::Categorical;
    int group_size = 20; // samples per replicate group within an (m, batch) cell

    void validate() const; // throws ConfigError
};

LabeledImageSet generate(const SynthConfig& config);

} // namespace debias
