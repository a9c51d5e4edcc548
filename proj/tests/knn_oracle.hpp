#pragma once

// Independent brute-force leave-one-out kNN used as the reference for
// knn_loo_accuracy: exhaustive double loop over pairs, selection sort of the
// k best, same published tie rule (max votes -> nearest tied member ->
// smallest class index). Deliberately written against the rule text, not the
// library code.

#include <cstdint>
#include <map>
#include <vector>

#include "debias/tensor.hpp"

inline double knn_loo_oracle(const debias::Tensor& rows, const std::vector<int>& labels, int k) {
    const int n = rows.dim(0), d = rows.dim(1);
    int correct = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> dist;
        std::vector<int> who;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double acc = 0.0;
            for (int t = 0; t < d; ++t) {
                const double diff = static_cast<double>(rows[static_cast<int64_t>(i) * d + t]) -
                                    static_cast<double>(rows[static_cast<int64_t>(j) * d + t]);
                acc += diff * diff;
            }
            dist.push_back(acc);
            who.push_back(j);
        }
        // selection sort by (distance, index)
        for (size_t a = 0; a < dist.size(); ++a) {
            size_t best = a;
            for (size_t b = a + 1; b < dist.size(); ++b)
                if (dist[b] < dist[best] || (dist[b] == dist[best] && who[b] < who[best])) best = b;
            std::swap(dist[a], dist[best]);
            std::swap(who[a], who[best]);
        }
        const int kk = k < static_cast<int>(dist.size()) ? k : static_cast<int>(dist.size());
        std::map<int, int> votes;
        for (int t = 0; t < kk; ++t) ++votes[labels[static_cast<size_t>(who[static_cast<size_t>(t)])]];
        int top = 0;
        for (const auto& [c, v] : votes)
            if (v > top) top = v;
        // nearest member of any top-vote class; equal distance -> smaller class
        int pred = -1;
        double pred_dist = 0.0;
        for (int t = 0; t < kk; ++t) {
            const int cls = labels[static_cast<size_t>(who[static_cast<size_t>(t)])];
            if (votes[cls] != top) continue;
            if (pred < 0 || dist[static_cast<size_t>(t)] < pred_dist ||
                (dist[static_cast<size_t>(t)] == pred_dist && cls < pred))
            {
                pred = cls;
                pred_dist = dist[static_cast<size_t>(t)];
            }
        }
        if (pred == labels[static_cast<size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}
