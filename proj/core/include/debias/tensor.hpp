#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace debias {

// Dense row-major tensor of 32-bit reals. The universal value type for
// images, latent codes, parameters, and gradients. Tensors are plain values:
// copyable, no views, no aliasing.
class Tensor {
public:
    Tensor() = default;

    // Zero-filled tensor of the given shape. All dims must be positive.
    explicit Tensor(std::vector<int> shape);

    Tensor(std::vector<int> shape, std::vector<float> data);

    static Tensor scalar(float v);
    static Tensor full(std::vector<int> shape, float v);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& storage() { return data_; }
    const std::vector<float>& storage() const { return data_; }

    float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Convenience indexed access; used by tests and cold paths.
    float& at2(int i, int j);
    float& at3(int i, int j, int k);
    float& at4(int n, int c, int h, int w);
    float at2(int i, int j) const { return const_cast<Tensor*>(this)->at2(i, j); }
    float at3(int i, int j, int k) const { return const_cast<Tensor*>(this)->at3(i, j, k); }
    float at4(int n, int c, int h, int w) const { return const_cast<Tensor*>(this)->at4(n, c, h, w); }

    // Value of a one-element tensor.
    float item() const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    void fill(float v);

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

int64_t numel_of(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Throws ShapeError unless the shapes match.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

} // namespace debias
