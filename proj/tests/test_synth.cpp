#include <cmath>
#include <cstring>
#include <map>
#include <set>

#include "debias/errors.hpp"
#include "debias/synth.hpp"
#include "doctest.h"

using namespace debias;

namespace {

SynthConfig base_cfg(uint64_t seed) {
    SynthConfig cfg;
    cfg.image_size = 16;
    cfg.n_classes = 4;
    cfg.n_batches = 3;
    cfg.confound_strength = 0.6;
    cfg.samples = 200;
    cfg.group_size = 5;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("generation is deterministic and pixels stay in range") {
    const LabeledImageSet a = generate(base_cfg(11));
    const LabeledImageSet b = generate(base_cfg(11));
    CHECK(std::memcmp(a.images.data(), b.images.data(),
                      sizeof(float) * static_cast<size_t>(a.images.numel())) == 0);
    CHECK(a.m_labels == b.m_labels);
    CHECK(a.s_labels == b.s_labels);
    CHECK(a.group_ids == b.group_ids);

    for (int64_t i = 0; i < a.images.numel(); ++i) {
        CHECK(a.images[i] >= 0.0f);
        CHECK(a.images[i] <= 1.0f);
    }

    const LabeledImageSet c = generate(base_cfg(12));
    CHECK(std::memcmp(a.images.data(), c.images.data(),
                      sizeof(float) * static_cast<size_t>(a.images.numel())) != 0);
}

TEST_CASE("rho=1 with matching class and batch counts makes M equal S") {
    SynthConfig cfg = base_cfg(3);
    cfg.n_classes = 3;
    cfg.n_batches = 3;
    cfg.confound_strength = 1.0;
    cfg.samples = 300;
    const LabeledImageSet ds = generate(cfg);
    for (int i = 0; i < ds.size(); ++i)
        CHECK(ds.m_labels[static_cast<size_t>(i)] == ds.s_labels[static_cast<size_t>(i)]);
}

TEST_CASE("rho=0 leaves M and S nearly independent (plug-in mutual information)") {
    SynthConfig cfg = base_cfg(19);
    cfg.image_size = 8; // labels are what matters; render small for speed
    cfg.confound_strength = 0.0;
    cfg.samples = 10000;
    const LabeledImageSet ds = generate(cfg);

    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> pm, ps;
    const double n = ds.size();
    for (int i = 0; i < ds.size(); ++i) {
        const int m = ds.m_labels[static_cast<size_t>(i)], s = ds.s_labels[static_cast<size_t>(i)];
        joint[{m, s}] += 1.0 / n;
        pm[m] += 1.0 / n;
        ps[s] += 1.0 / n;
    }
    double mi = 0.0;
    for (const auto& [key, pj] : joint) mi += pj * std::log(pj / (pm[key.first] * ps[key.second]));
    CHECK(mi < 0.01); // nats
}

TEST_CASE("label law: P(M = S mod K | S) tracks rho + (1-rho)/K") {
    SynthConfig cfg = base_cfg(23);
    cfg.image_size = 8;
    cfg.confound_strength = 0.6;
    cfg.samples = 10000;
    const LabeledImageSet ds = generate(cfg);

    std::map<int, int> hits, totals;
    for (int i = 0; i < ds.size(); ++i) {
        const int s = ds.s_labels[static_cast<size_t>(i)];
        ++totals[s];
        if (ds.m_labels[static_cast<size_t>(i)] == s % cfg.n_classes) ++hits[s];
    }
    const double expected = 0.6 + 0.4 / 4.0;
    for (const auto& [s, total] : totals) {
        const double frac = static_cast<double>(hits[s]) / total;
        CHECK(frac == doctest::Approx(expected).epsilon(0.05)); // +-0.03 absolute on ~3300 draws
    }
}

TEST_CASE("batch gain moves mean brightness when the spread is positive") {
    SynthConfig cfg = base_cfg(31);
    cfg.batch_gain_spread = 0.5;
    cfg.samples = 600;
    const LabeledImageSet ds = generate(cfg);

    std::map<int, double> mean_by_batch;
    std::map<int, int> count_by_batch;
    const int64_t per = ds.images.numel() / ds.size();
    for (int i = 0; i < ds.size(); ++i) {
        double m = 0.0;
        for (int64_t t = 0; t < per; ++t) m += ds.images[i * per + t];
        mean_by_batch[ds.s_labels[static_cast<size_t>(i)]] += m / static_cast<double>(per);
        ++count_by_batch[ds.s_labels[static_cast<size_t>(i)]];
    }
    double lo = 1e9, hi = -1e9;
    for (auto& [s, sum] : mean_by_batch) {
        const double mean = sum / count_by_batch[s];
        lo = std::min(lo, mean);
        hi = std::max(hi, mean);
    }
    CHECK(hi - lo > 0.01); // ~25% brightness separation survives averaging

    SynthConfig flat = cfg;
    flat.batch_gain_spread = 0.0;
    flat.confound_strength = 0.0; // decouple M from S so class looks cannot masquerade as a gain
    flat.samples = 1500;
    const LabeledImageSet ds0 = generate(flat);
    std::map<int, double> mean0;
    std::map<int, int> count0;
    for (int i = 0; i < ds0.size(); ++i) {
        double m = 0.0;
        for (int64_t t = 0; t < per; ++t) m += ds0.images[i * per + t];
        mean0[ds0.s_labels[static_cast<size_t>(i)]] += m / static_cast<double>(per);
        ++count0[ds0.s_labels[static_cast<size_t>(i)]];
    }
    double lo0 = 1e9, hi0 = -1e9;
    for (auto& [s, sum] : mean0) {
        const double mean = sum / count0[s];
        lo0 = std::min(lo0, mean);
        hi0 = std::max(hi0, mean);
    }
    CHECK(hi0 - lo0 < 0.005); // no systematic brightness gap without the gain
}

TEST_CASE("groups are pure in class and batch and respect the block size") {
    SynthConfig cfg = base_cfg(41);
    const LabeledImageSet ds = generate(cfg);

    std::map<int, std::set<int>> group_m, group_s;
    std::map<int, int> group_count;
    for (int i = 0; i < ds.size(); ++i) {
        const int g = ds.group_ids[static_cast<size_t>(i)];
        group_m[g].insert(ds.m_labels[static_cast<size_t>(i)]);
        group_s[g].insert(ds.s_labels[static_cast<size_t>(i)]);
        ++group_count[g];
    }
    for (const auto& [g, ms] : group_m) CHECK(ms.size() == 1);
    for (const auto& [g, ss] : group_s) CHECK(ss.size() == 1);
    for (const auto& [g, c] : group_count) CHECK(c <= cfg.group_size);

    // ids are dense 0..G-1
    int max_id = 0;
    for (int g : ds.group_ids) max_id = std::max(max_id, g);
    CHECK(static_cast<size_t>(max_id + 1) == group_count.size());
}

TEST_CASE("continuous mode fills s_continuous in [0,1)") {
    SynthConfig cfg = base_cfg(53);
    cfg.confounder_kind = ConfounderKind::Continuous;
    const LabeledImageSet ds = generate(cfg);
    CHECK(ds.kind == ConfounderKind::Continuous);
    CHECK(ds.n_batches == 0);
    REQUIRE(ds.s_continuous.size() == static_cast<size_t>(cfg.samples));
    for (float s : ds.s_continuous) {
        CHECK(s >= 0.0f);
        CHECK(s < 1.0f);
    }
}

TEST_CASE("config validation rejects out-of-range fields") {
    SynthConfig cfg = base_cfg(1);
    cfg.samples = 0;
    CHECK_THROWS_AS(generate(cfg), ConfigError);

    cfg = base_cfg(1);
    cfg.confound_strength = 1.5;
    CHECK_THROWS_AS(generate(cfg), ConfigError);

    cfg = base_cfg(1);
    cfg.n_classes = 1;
    CHECK_THROWS_AS(generate(cfg), ConfigError);

    cfg = base_cfg(1);
    cfg.noise_sigma = -0.1;
    CHECK_THROWS_AS(generate(cfg), ConfigError);
}
