#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

// Fraction of points whose 2-means cluster assignment matches the given
// binary labels, maximized over the two label mappings. Centers start at the
// farthest pair of points, then plain Lloyd iterations — deterministic, for
// checking that an embedding separates two known groups.
inline double two_means_agreement(const std::vector<double>& points, // row-major [N,2]
                                  const std::vector<int>& labels) {
    const int n = static_cast<int>(labels.size());
    auto d2 = [&](int i, double cx, double cy) {
        const double dx = points[static_cast<size_t>(i) * 2] - cx;
        const double dy = points[static_cast<size_t>(i) * 2 + 1] - cy;
        return dx * dx + dy * dy;
    };

    int a = 0, b = 1;
    double best = -1.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = d2(i, points[static_cast<size_t>(j) * 2],
                                points[static_cast<size_t>(j) * 2 + 1]);
            if (v > best) {
                best = v;
                a = i;
                b = j;
            }
        }

    double cx[2] = {points[static_cast<size_t>(a) * 2], points[static_cast<size_t>(b) * 2]};
    double cy[2] = {points[static_cast<size_t>(a) * 2 + 1], points[static_cast<size_t>(b) * 2 + 1]};
    std::vector<int> assign(static_cast<size_t>(n), 0);
    for (int round = 0; round < 100; ++round) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            const int c = d2(i, cx[0], cy[0]) <= d2(i, cx[1], cy[1]) ? 0 : 1;
            if (c != assign[static_cast<size_t>(i)]) {
                assign[static_cast<size_t>(i)] = c;
                changed = true;
            }
        }
        double sx[2] = {0, 0}, sy[2] = {0, 0};
        int cnt[2] = {0, 0};
        for (int i = 0; i < n; ++i) {
            const int c = assign[static_cast<size_t>(i)];
            sx[c] += points[static_cast<size_t>(i) * 2];
            sy[c] += points[static_cast<size_t>(i) * 2 + 1];
            ++cnt[c];
        }
        for (int c = 0; c < 2; ++c)
            if (cnt[c] > 0) {
                cx[c] = sx[c] / cnt[c];
                cy[c] = sy[c] / cnt[c];
            }
        if (!changed) break;
    }

    int same = 0;
    for (int i = 0; i < n; ++i)
        if (assign[static_cast<size_t>(i)] == (labels[static_cast<size_t>(i)] != 0)) ++same;
    const double frac = static_cast<double>(same) / n;
    return frac >= 0.5 ? frac : 1.0 - frac;
}
