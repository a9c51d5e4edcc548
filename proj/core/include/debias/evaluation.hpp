#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "debias/tensor.hpp"

namespace debias {

// Feature rows (codes, profiles, raw pixels) with stable row identities.
struct FeatureMatrix {
    Tensor rows; // [N,d]
    std::vector<int> row_ids;

    int n() const { return rows.empty() ? 0 : rows.dim(0); }
    int d() const { return rows.empty() ? 0 : rows.dim(1); }
    void validate() const; // rank 2, unique ids, |ids| == N
};

struct EvalReport {
    std::string probe;
    double accuracy = 0.0;
    double null_accuracy = 0.0;
    double fold_change = 0.0;
    int k = 0;
    int n = 0;
};

// Per-group arithmetic mean of feature rows; output row_ids are the group
// ids in ascending order. group_ids run parallel to the input rows.
FeatureMatrix aggregate_profiles(const FeatureMatrix& features, const std::vector<int>& group_ids);

// Leave-one-out k-nearest-neighbor accuracy, Euclidean metric. Ties: most
// votes, then the class whose tied member is nearest, then smallest class
// index. With standardize, columns are shifted/scaled to zero mean and unit
// variance first (constant columns are dropped to zero). The exclude_tags
// overload skips neighbors sharing the query's tag (e.g. same-compound
// exclusion); pass an empty vector for plain LOO.
double knn_loo_accuracy(const FeatureMatrix& features, const std::vector<int>& labels, int k,
                        bool standardize = false);
double knn_loo_accuracy(const FeatureMatrix& features, const std::vector<int>& labels, int k,
                        const std::vector<int>& exclude_tags, bool standardize = false);

// Majority-class frequency: the accuracy of label-blind guessing.
double null_accuracy(const std::vector<int>& labels);

// accuracy / null, the Table-style "FC" ratio. null must be positive.
double fold_change(double accuracy, double null);

// Product-moment correlation plus a permutation p-value
// (1 + #{|r_perm| >= |r|}) / (1 + n_permutations).
std::pair<double, double> pearson_r(const std::vector<double>& x, const std::vector<double>& y,
                                    int n_permutations, std::uint64_t seed);

// The paired signal/confounder probes: aggregate to group profiles when
// group_ids are given (labels must be group-pure by majority), then kNN-LOO
// for the class labels and the batch labels. Returns (signal, batch).
std::pair<EvalReport, EvalReport> probe_report(const FeatureMatrix& codes,
                                               const std::vector<int>& m_labels,
                                               const std::vector<int>& s_labels,
                                               const std::vector<int>& group_ids, int k = 3);

// CSV rows `probe,k,n,accuracy,null,fold_change` with a header.
void write_reports_csv(const std::string& path, const std::vector<EvalReport>& reports);

} // namespace debias
