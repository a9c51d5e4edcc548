#include "debias/imageops.hpp"

#include <algorithm>
#include <cmath>

#include "debias/errors.hpp"

namespace debias {

namespace {

void require_single_channel(const Tensor& image, const char* who) {
    if (image.rank() != 3 || image.dim(0) != 1)
        throw ShapeError(std::string(who) + ": expected a [1,H,W] image, got " +
                         shape_str(image.shape()));
}

// mirror across the border pixel (…, 2, 1, 0, 1, 2, …)
inline int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw HyperparamError("gaussian_blur: sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * static_cast<double>(i) * i / (sigma * sigma));
        k[static_cast<size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

// in-place separable blur of an H x W double raster
void blur_raster(std::vector<double>& img, int h, int w, double sigma) {
    const std::vector<double> k = gaussian_kernel(sigma);
    const int radius = (static_cast<int>(k.size()) - 1) / 2;
    std::vector<double> tmp(img.size());
    for (int r = 0; r < h; ++r) { // horizontal pass
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t)
                acc += k[static_cast<size_t>(t + radius)] *
                       img[static_cast<size_t>(r) * w + static_cast<size_t>(reflect(c + t, w))];
            tmp[static_cast<size_t>(r) * w + static_cast<size_t>(c)] = acc;
        }
    }
    for (int c = 0; c < w; ++c) { // vertical pass
        for (int r = 0; r < h; ++r) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t)
                acc += k[static_cast<size_t>(t + radius)] *
                       tmp[static_cast<size_t>(reflect(r + t, h)) * w + static_cast<size_t>(c)];
            img[static_cast<size_t>(r) * w + static_cast<size_t>(c)] = acc;
        }
    }
}

std::vector<double> to_raster(const Tensor& image) {
    const std::vector<float>& src = image.storage();
    std::vector<double> out(src.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(src[i]);
    return out;
}

} // namespace

Tensor gaussian_blur(const Tensor& image, double sigma) {
    require_single_channel(image, "gaussian_blur");
    const int h = image.dim(1), w = image.dim(2);
    std::vector<double> raster = to_raster(image);
    blur_raster(raster, h, w, sigma);
    Tensor out(image.shape());
    for (size_t i = 0; i < raster.size(); ++i) out.data()[i] = static_cast<float>(raster[i]);
    return out;
}

std::vector<NucleusDetection> dog_detect(const Tensor& image, double sigma1, double sigma2,
                                         double threshold) {
    require_single_channel(image, "dog_detect");
    if (!(sigma1 > 0.0) || !(sigma2 > sigma1))
        throw HyperparamError("dog_detect: need 0 < sigma1 < sigma2");
    const int h = image.dim(1), w = image.dim(2);

    std::vector<double> fine = to_raster(image);
    std::vector<double> coarse = fine;
    blur_raster(fine, h, w, sigma1);
    blur_raster(coarse, h, w, sigma2);
    for (size_t i = 0; i < fine.size(); ++i) fine[i] -= coarse[i]; // fine now holds the DoG

    const double scale = std::sqrt(sigma1 * sigma2);
    std::vector<NucleusDetection> hits;
    for (int r = 1; r + 1 < h; ++r) {
        for (int c = 1; c + 1 < w; ++c) {
            const double v = fine[static_cast<size_t>(r) * w + static_cast<size_t>(c)];
            if (!(v > threshold)) continue;
            bool is_max = true;
            for (int dr = -1; dr <= 1 && is_max; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    if (!(v > fine[static_cast<size_t>(r + dr) * w + static_cast<size_t>(c + dc)])) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max)
                hits.push_back({static_cast<double>(r), static_cast<double>(c), scale, v});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const NucleusDetection& a, const NucleusDetection& b) {
        if (a.response != b.response) return a.response > b.response;
        if (a.row != b.row) return a.row < b.row;
        return a.col < b.col;
    });
    return hits;
}

Tensor crop_patches(const Tensor& image, const std::vector<std::pair<double, double>>& centers,
                    int size) {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw ShapeError("crop_patches: expected a [3,H,W] image, got " + shape_str(image.shape()));
    const int h = image.dim(1), w = image.dim(2);
    if (size <= 0 || size % 2 != 0)
        throw HyperparamError("crop_patches: size must be a positive even integer");
    if (size > h || size > w)
        throw HyperparamError("crop_patches: size exceeds image extent");

    const int half = size / 2;
    std::vector<std::pair<int, int>> tops; // (top, left) of kept windows
    for (const auto& [cr, cc] : centers) {
        const int r = static_cast<int>(std::lround(cr));
        const int c = static_cast<int>(std::lround(cc));
        const int top = r - half, left = c - half;
        if (top < 0 || left < 0 || top + size > h || left + size > w) continue;
        tops.emplace_back(top, left);
    }
    if (tops.empty()) return Tensor{};

    Tensor out({static_cast<int>(tops.size()), 3, size, size});
    for (size_t k = 0; k < tops.size(); ++k) {
        const auto [top, left] = tops[k];
        for (int ch = 0; ch < 3; ++ch)
            for (int r = 0; r < size; ++r)
                for (int c = 0; c < size; ++c)
                    out.at4(static_cast<int>(k), ch, r, c) = image.at3(ch, top + r, left + c);
    }
    return out;
}

} // namespace debias
