#include "debias/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "debias/errors.hpp"
#include "debias/rng.hpp"

namespace debias {

namespace {

// column standardization in double; constant columns become zero
std::vector<double> standardized_rows(const FeatureMatrix& f) {
    const int n = f.n(), d = f.d();
    std::vector<double> out(static_cast<size_t>(n) * d);
    for (int j = 0; j < d; ++j) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += static_cast<double>(f.rows[static_cast<int64_t>(i) * d + j]);
        mean /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            const double dv = static_cast<double>(f.rows[static_cast<int64_t>(i) * d + j]) - mean;
            var += dv * dv;
        }
        var /= n;
        const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
        for (int i = 0; i < n; ++i)
            out[static_cast<size_t>(i) * d + j] =
                (static_cast<double>(f.rows[static_cast<int64_t>(i) * d + j]) - mean) * inv;
    }
    return out;
}

std::vector<double> plain_rows(const FeatureMatrix& f) {
    std::vector<double> out(static_cast<size_t>(f.rows.numel()));
    for (int64_t i = 0; i < f.rows.numel(); ++i) out[static_cast<size_t>(i)] = f.rows[i];
    return out;
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
        throw NumericError("pearson_r: zero-variance argument");
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

void FeatureMatrix::validate() const {
    if (rows.empty() || rows.rank() != 2)
        throw ShapeError("features: expected a non-empty [N,d] matrix, got " +
                         shape_str(rows.shape()));
    if (static_cast<int>(row_ids.size()) != rows.dim(0))
        throw DataError("features: row_ids length does not match row count");
    std::set<int> uniq(row_ids.begin(), row_ids.end());
    if (static_cast<int>(uniq.size()) != rows.dim(0))
        throw DataError("features: duplicate row_ids");
}

FeatureMatrix aggregate_profiles(const FeatureMatrix& features, const std::vector<int>& group_ids) {
    features.validate();
    const int n = features.n(), d = features.d();
    if (static_cast<int>(group_ids.size()) != n)
        throw DataError("aggregate_profiles: group_ids length does not match rows");

    std::map<int, std::pair<std::vector<double>, int>> acc; // group -> (sum, count)
    for (int i = 0; i < n; ++i) {
        auto& [sum, count] = acc[group_ids[static_cast<size_t>(i)]];
        if (sum.empty()) sum.assign(static_cast<size_t>(d), 0.0);
        for (int j = 0; j < d; ++j)
            sum[static_cast<size_t>(j)] += static_cast<double>(features.rows[static_cast<int64_t>(i) * d + j]);
        ++count;
    }

    FeatureMatrix out;
    out.rows = Tensor({static_cast<int>(acc.size()), d});
    out.row_ids.reserve(acc.size());
    int r = 0;
    for (const auto& [gid, entry] : acc) { // std::map iterates ids ascending
        out.row_ids.push_back(gid);
        for (int j = 0; j < d; ++j)
            out.rows[static_cast<int64_t>(r) * d + j] =
                static_cast<float>(entry.first[static_cast<size_t>(j)] / entry.second);
        ++r;
    }
    return out;
}

double knn_loo_accuracy(const FeatureMatrix& features, const std::vector<int>& labels, int k,
                        bool standardize) {
    return knn_loo_accuracy(features, labels, k, std::vector<int>{}, standardize);
}

double knn_loo_accuracy(const FeatureMatrix& features, const std::vector<int>& labels, int k,
                        const std::vector<int>& exclude_tags, bool standardize) {
    features.validate();
    const int n = features.n(), d = features.d();
    if (static_cast<int>(labels.size()) != n)
        throw DataError("knn: labels length does not match rows");
    if (!exclude_tags.empty() && static_cast<int>(exclude_tags.size()) != n)
        throw DataError("knn: exclude_tags length does not match rows");
    if (k < 1) throw HyperparamError("knn: k must be at least 1");
    if (n <= k) throw DataError("knn: need more than k samples for leave-one-out");

    const std::vector<double> rows = standardize ? standardized_rows(features) : plain_rows(features);

    int correct = 0;
    std::vector<std::pair<double, int>> dist; // (squared distance, row index)
    for (int i = 0; i < n; ++i) {
        dist.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            if (!exclude_tags.empty() &&
                exclude_tags[static_cast<size_t>(j)] == exclude_tags[static_cast<size_t>(i)])
                continue;
            double d2 = 0.0;
            const double* a = rows.data() + static_cast<size_t>(i) * d;
            const double* b = rows.data() + static_cast<size_t>(j) * d;
            for (int t = 0; t < d; ++t) {
                const double diff = a[t] - b[t];
                d2 += diff * diff;
            }
            dist.emplace_back(d2, j);
        }
        if (dist.empty()) continue; // fully excluded query cannot vote
        std::sort(dist.begin(), dist.end());
        const int kk = std::min<int>(k, static_cast<int>(dist.size()));

        std::map<int, int> votes;
        for (int t = 0; t < kk; ++t) ++votes[labels[static_cast<size_t>(dist[static_cast<size_t>(t)].second)]];
        int best_votes = 0;
        for (const auto& [cls, v] : votes) best_votes = std::max(best_votes, v);

        // nearest member among top-vote classes; remaining ties -> smallest class
        double best_dist = 0.0;
        int prediction = -1;
        for (int t = 0; t < kk; ++t) {
            const int cls = labels[static_cast<size_t>(dist[static_cast<size_t>(t)].second)];
            if (votes[cls] != best_votes) continue;
            const double dd = dist[static_cast<size_t>(t)].first;
            if (prediction < 0 || dd < best_dist || (dd == best_dist && cls < prediction)) {
                best_dist = dd;
                prediction = cls;
            }
        }
        if (prediction == labels[static_cast<size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

double null_accuracy(const std::vector<int>& labels) {
    if (labels.empty()) throw DataError("null_accuracy: empty labels");
    std::map<int, int> counts;
    for (int l : labels) ++counts[l];
    int best = 0;
    for (const auto& [cls, c] : counts) best = std::max(best, c);
    return static_cast<double>(best) / static_cast<double>(labels.size());
}

double fold_change(double accuracy, double null) {
    if (!(null > 0.0)) throw NumericError("fold_change: null accuracy must be positive");
    return accuracy / null;
}

std::pair<double, double> pearson_r(const std::vector<double>& x, const std::vector<double>& y,
                                    int n_permutations, std::uint64_t seed) {
    if (x.size() != y.size()) throw ShapeError("pearson_r: mismatched lengths");
    if (x.size() < 3) throw DataError("pearson_r: need at least 3 points");
    if (n_permutations < 0) throw HyperparamError("pearson_r: negative permutation count");
    const double r = correlation(x, y);

    Rng rng = Rng(seed).substream("pearson");
    const int n = static_cast<int>(x.size());
    int hits = 0;
    std::vector<double> yp(y.size());
    for (int t = 0; t < n_permutations; ++t) {
        const std::vector<int> perm = rng.permutation(n);
        for (int i = 0; i < n; ++i) yp[static_cast<size_t>(i)] = y[static_cast<size_t>(perm[static_cast<size_t>(i)])];
        if (std::fabs(correlation(x, yp)) >= std::fabs(r)) ++hits;
    }
    const double p = static_cast<double>(1 + hits) / static_cast<double>(1 + n_permutations);
    return {r, p};
}

std::pair<EvalReport, EvalReport> probe_report(const FeatureMatrix& codes,
                                               const std::vector<int>& m_labels,
                                               const std::vector<int>& s_labels,
                                               const std::vector<int>& group_ids, int k) {
    codes.validate();
    const int n = codes.n();
    if (static_cast<int>(m_labels.size()) != n || static_cast<int>(s_labels.size()) != n)
        throw DataError("probe_report: label columns must match row count");

    FeatureMatrix probe_rows;
    std::vector<int> m_probe, s_probe;
    if (!group_ids.empty()) {
        if (static_cast<int>(group_ids.size()) != n)
            throw DataError("probe_report: group_ids length does not match rows");
        probe_rows = aggregate_profiles(codes, group_ids);
        // majority label per group; ties resolved toward the smaller label
        std::map<int, std::map<int, int>> mc, sc;
        for (int i = 0; i < n; ++i) {
            ++mc[group_ids[static_cast<size_t>(i)]][m_labels[static_cast<size_t>(i)]];
            ++sc[group_ids[static_cast<size_t>(i)]][s_labels[static_cast<size_t>(i)]];
        }
        auto majority = [](const std::map<int, int>& counts) {
            int best_label = 0, best_count = -1;
            for (const auto& [label, count] : counts)
                if (count > best_count) {
                    best_label = label;
                    best_count = count;
                }
            return best_label;
        };
        for (int gid : probe_rows.row_ids) {
            m_probe.push_back(majority(mc[gid]));
            s_probe.push_back(majority(sc[gid]));
        }
    } else {
        probe_rows = codes;
        m_probe = m_labels;
        s_probe = s_labels;
    }

    auto make_report = [&](const char* name, const std::vector<int>& labels) {
        EvalReport rep;
        rep.probe = name;
        rep.k = k;
        rep.n = probe_rows.n();
        rep.accuracy = knn_loo_accuracy(probe_rows, labels, k);
        rep.null_accuracy = null_accuracy(labels);
        rep.fold_change = fold_change(rep.accuracy, rep.null_accuracy);
        return rep;
    };
    return {make_report("moa", m_probe), make_report("batch", s_probe)};
}

void write_reports_csv(const std::string& path, const std::vector<EvalReport>& reports) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("reports: cannot open " + path + " for writing");
    out << "probe,k,n,accuracy,null,fold_change\n";
    char line[256];
    for (const EvalReport& r : reports) {
        std::snprintf(line, sizeof(line), "%s,%d,%d,%.10g,%.10g,%.10g\n", r.probe.c_str(), r.k,
                      r.n, r.accuracy, r.null_accuracy, r.fold_change);
        out << line;
    }
    if (!out) throw DataError("reports: write failed for " + path);
}

} // namespace debias
