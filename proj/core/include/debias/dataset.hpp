#pragma once

#include <string>
#include <vector>

#include "debias/tensor.hpp"

namespace debias {

enum class ConfounderKind { Categorical, Continuous };

// Images plus the two label tracks of the causal model: the signal class m
// and the nuisance/batch value s, with treatment-style group ids for
// profile aggregation.
struct LabeledImageSet {
    Tensor images; // [N,3,H,W], values in [0,1]
    std::vector<int> m_labels;
    std::vector<int> s_labels;        // categorical confounder
    std::vector<float> s_continuous;  // continuous confounder
    std::vector<int> group_ids;
    ConfounderKind kind = ConfounderKind::Categorical;
    int n_classes = 0;
    int n_batches = 0; // 0 in continuous mode

    int size() const { return images.empty() ? 0 : images.dim(0); }
    double s_value(int i) const {
        return kind == ConfounderKind::Categorical ? static_cast<double>(s_labels[static_cast<size_t>(i)])
                                                   : static_cast<double>(s_continuous[static_cast<size_t>(i)]);
    }
    // Throws DataError when parallel arrays disagree, labels are out of
    // range, or pixels leave [0,1].
    void validate() const;
};

// DBDS container round trip; config_echo_json is embedded verbatim in the
// header (pass "{}" when there is no generator config to echo).
void save_dataset(const std::string& path, const LabeledImageSet& ds,
                  const std::string& config_echo_json = "{}");
LabeledImageSet load_dataset(const std::string& path);

} // namespace debias
