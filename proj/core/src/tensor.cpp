#include "debias/tensor.hpp"

#include <cmath>
#include <sstream>

#include "debias/errors.hpp"

namespace debias {

int64_t numel_of(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {
void check_shape(const std::vector<int>& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    }
}
} // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(static_cast<size_t>(numel_of(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (numel_of(shape_) != static_cast<int64_t>(data_.size())) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::scalar(float v) { return Tensor({1}, {v}); }

Tensor Tensor::full(std::vector<int> shape, float v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

float& Tensor::at2(int i, int j) {
    return data_[static_cast<size_t>(i) * dim(1) + j];
}

float& Tensor::at3(int i, int j, int k) {
    return data_[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
}

float& Tensor::at4(int n, int c, int h, int w) {
    return data_[((static_cast<size_t>(n) * dim(1) + c) * dim(2) + h) * dim(3) + w];
}

float Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() requires a one-element tensor, got " + shape_str(shape_));
    return data_[0];
}

bool Tensor::all_finite() const {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(float v) {
    for (auto& x : data_) x = v;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

} // namespace debias
