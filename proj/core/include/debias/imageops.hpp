#pragma once

#include <utility>
#include <vector>

#include "debias/tensor.hpp"

namespace debias {

struct NucleusDetection {
    double row = 0.0, col = 0.0;
    double scale = 0.0;    // sqrt(sigma1*sigma2) of the detecting band
    double response = 0.0; // DoG value at the maximum
};

// Separable Gaussian blur on a [1,H,W] image: kernel truncated at 3*sigma,
// normalized to unit mass, mirrored borders. Accumulates in double.
Tensor gaussian_blur(const Tensor& image, double sigma);

// Blob detection on a [1,H,W] image: response = blur(sigma1) - blur(sigma2),
// detections are strict 8-neighborhood local maxima above threshold, sorted
// by descending response (ties by row, then col). Requires 0 < sigma1 < sigma2.
std::vector<NucleusDetection> dog_detect(const Tensor& image, double sigma1, double sigma2,
                                         double threshold);

// Axis-aligned size x size crops of a [3,H,W] image centred at the rounded
// (row, col) centers; size must be even and fit the image. Centers whose
// window would cross the border are discarded. Returns [K,3,size,size], or
// an empty tensor when nothing fits.
Tensor crop_patches(const Tensor& image, const std::vector<std::pair<double, double>>& centers,
                    int size);

} // namespace debias
