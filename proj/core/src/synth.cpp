#include "debias/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "debias/errors.hpp"
#include "debias/parallel.hpp"
#include "debias/rng.hpp"

namespace debias {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct SampleDraw {
    int m = 0;           // class
    int s_label = 0;     // batch (categorical)
    float s_cont = 0.0f; // batch position (continuous)
};

// Labels first, pixels after, all from the sample's own substream so the
// result is independent of render order.
SampleDraw draw_labels(const SynthConfig& cfg, Rng& rng) {
    SampleDraw d;
    int confound_class = 0;
    if (cfg.confounder_kind == ConfounderKind::Categorical) {
        d.s_label = static_cast<int>(rng.below(static_cast<uint32_t>(cfg.n_batches)));
        confound_class = d.s_label % cfg.n_classes;
    } else {
        d.s_cont = static_cast<float>(rng.uniform());
        confound_class = std::min(cfg.n_classes - 1,
                                  static_cast<int>(d.s_cont * static_cast<float>(cfg.n_classes)));
    }
    if (rng.uniform() < cfg.confound_strength)
        d.m = confound_class;
    else
        d.m = static_cast<int>(rng.below(static_cast<uint32_t>(cfg.n_classes)));
    return d;
}

void render_sample(const SynthConfig& cfg, const SampleDraw& d, double gain, Rng& rng,
                   float* pixels) {
    const int h = cfg.image_size;
    const double hs = static_cast<double>(h);
    const double class_t = // 0..1 position of the class within its range
        cfg.n_classes > 1 ? static_cast<double>(d.m) / static_cast<double>(cfg.n_classes - 1) : 0.0;

    // nuisance latents of this cell
    const double jr = rng.uniform(-hs / 16.0, hs / 16.0);
    const double jc = rng.uniform(-hs / 16.0, hs / 16.0);
    const double phi = rng.uniform(0.0, kPi);         // nucleus orientation
    const double phase = rng.uniform(0.0, 2.0 * kPi); // grating phase

    const double cr = (hs - 1.0) / 2.0 + jr;
    const double cc = (hs - 1.0) / 2.0 + jc;

    const double sig_a = hs * (0.10 + 0.05 * class_t); // nucleus major sigma
    const double sig_b = sig_a * (0.6 + 0.4 * class_t);
    const double ring_r = 1.6 * sig_a;
    const double ring_w = 0.35 * sig_a;
    const double freq = 2.0 + static_cast<double>(d.m);
    const double theta = kPi * static_cast<double>(d.m) / static_cast<double>(cfg.n_classes);
    const double cph = std::cos(phi), sph = std::sin(phi);
    const double cth = std::cos(theta), sth = std::sin(theta);

    const int plane = h * h;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < h; ++c) {
            const double dr = static_cast<double>(r) - cr;
            const double dc = static_cast<double>(c) - cc;
            const double u = dc * cph + dr * sph; // nucleus frame
            const double v = -dc * sph + dr * cph;
            const double rad = std::sqrt(dr * dr + dc * dc);

            const double nucleus =
                0.75 * std::exp(-0.5 * (u * u / (sig_a * sig_a) + v * v / (sig_b * sig_b)));
            const double halo =
                0.6 * std::exp(-0.5 * (rad - ring_r) * (rad - ring_r) / (ring_w * ring_w));
            const double carrier = std::sin(2.0 * kPi * freq * (dc * cth + dr * sth) / hs + phase);
            const double grating =
                0.5 * 0.5 * (1.0 + carrier) * std::exp(-0.5 * rad * rad / (0.45 * hs * 0.45 * hs));

            pixels[0 * plane + r * h + c] = static_cast<float>(gain * nucleus);
            pixels[1 * plane + r * h + c] = static_cast<float>(gain * halo);
            pixels[2 * plane + r * h + c] = static_cast<float>(gain * grating);
        }
    }
    for (int i = 0; i < 3 * plane; ++i) {
        const double noisy = static_cast<double>(pixels[i]) + cfg.noise_sigma * rng.normal();
        pixels[i] = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
    }
}

} // namespace

void SynthConfig::validate() const {
    if (image_size < 8) throw ConfigError("synth: image_size must be at least 8");
    if (n_classes < 2) throw ConfigError("synth: n_classes must be at least 2");
    if (n_batches < 2) throw ConfigError("synth: n_batches must be at least 2");
    if (!(confound_strength >= 0.0 && confound_strength <= 1.0))
        throw ConfigError("synth: confound_strength must lie in [0,1]");
    if (!(batch_gain_spread >= 0.0) || !std::isfinite(batch_gain_spread))
        throw ConfigError("synth: batch_gain_spread must be nonnegative");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        throw ConfigError("synth: noise_sigma must be nonnegative");
    if (samples < 1) throw ConfigError("synth: samples must be positive");
    if (group_size < 1) throw ConfigError("synth: group_size must be positive");
}

LabeledImageSet generate(const SynthConfig& cfg) {
    cfg.validate();
    const Rng root(cfg.seed);
    const int n = cfg.samples;
    const int h = cfg.image_size;

    // Batch gains sit on an evenly spaced grid of width batch_gain_spread,
    // assigned to batch ids in a seeded random order so the gain ranking is
    // not tied to the label encoding.
    std::vector<double> gains(static_cast<size_t>(cfg.n_batches), 1.0);
    {
        Rng grng = root.substream("gains");
        const std::vector<int> perm = grng.permutation(cfg.n_batches);
        for (int s = 0; s < cfg.n_batches; ++s) {
            const double t = static_cast<double>(perm[static_cast<size_t>(s)]) /
                             static_cast<double>(cfg.n_batches - 1);
            gains[static_cast<size_t>(s)] = 1.0 + cfg.batch_gain_spread * (t - 0.5);
        }
    }

    LabeledImageSet ds;
    ds.kind = cfg.confounder_kind;
    ds.n_classes = cfg.n_classes;
    ds.n_batches = cfg.confounder_kind == ConfounderKind::Categorical ? cfg.n_batches : 0;
    ds.images = Tensor({n, 3, h, h});
    ds.m_labels.resize(static_cast<size_t>(n));
    ds.group_ids.resize(static_cast<size_t>(n));
    if (cfg.confounder_kind == ConfounderKind::Categorical)
        ds.s_labels.resize(static_cast<size_t>(n));
    else
        ds.s_continuous.resize(static_cast<size_t>(n));

    const int64_t plane = static_cast<int64_t>(3) * h * h;
    parallel_for(n, [&](int64_t i) {
        Rng rng = root.substream("sample", static_cast<uint64_t>(i));
        const SampleDraw d = draw_labels(cfg, rng);
        ds.m_labels[static_cast<size_t>(i)] = d.m;
        double gain;
        if (cfg.confounder_kind == ConfounderKind::Categorical) {
            ds.s_labels[static_cast<size_t>(i)] = d.s_label;
            gain = gains[static_cast<size_t>(d.s_label)];
        } else {
            ds.s_continuous[static_cast<size_t>(i)] = d.s_cont;
            gain = 1.0 + cfg.batch_gain_spread * (static_cast<double>(d.s_cont) - 0.5);
        }
        render_sample(cfg, d, gain, rng, ds.images.data() + i * plane);
    });

    // Replicate groups: samples sharing an (m, batch-bin) cell are blocked
    // into runs of group_size in sample order; ids are dense in
    // lexicographic key order.
    std::vector<std::tuple<int, int, int>> keys(static_cast<size_t>(n));
    std::map<std::tuple<int, int, int>, int> ids;
    std::map<std::pair<int, int>, int> seen;
    for (int i = 0; i < n; ++i) {
        int sbin;
        if (cfg.confounder_kind == ConfounderKind::Categorical) {
            sbin = ds.s_labels[static_cast<size_t>(i)];
        } else {
            const float s = ds.s_continuous[static_cast<size_t>(i)];
            sbin = std::min(cfg.n_batches - 1,
                            static_cast<int>(s * static_cast<float>(cfg.n_batches)));
        }
        const int m = ds.m_labels[static_cast<size_t>(i)];
        const int block = seen[{m, sbin}]++ / cfg.group_size;
        keys[static_cast<size_t>(i)] = {m, sbin, block};
        ids[keys[static_cast<size_t>(i)]] = 0;
    }
    int next = 0;
    for (auto& [key, id] : ids) id = next++;
    for (int i = 0; i < n; ++i) ds.group_ids[static_cast<size_t>(i)] = ids[keys[static_cast<size_t>(i)]];

    ds.validate();
    return ds;
}

} // namespace debias
