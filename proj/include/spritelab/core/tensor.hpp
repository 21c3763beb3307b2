#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace spritelab {

// Dense row-major float32 tensor. Shapes are small (rank <= 4 in practice);
// all heavy math routes through the BLAS wrappers, this type is storage.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(count(shape_)), 0.0f);
    }

    Tensor(std::vector<int> shape, std::vector<float> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        assert(static_cast<int64_t>(data_.size()) == count(shape_));
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, float v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    static Tensor scalar(float v) { return Tensor({1}, {v}); }

    bool empty() const { return data_.empty(); }
    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    float& at(int i, int j) { return data_[static_cast<size_t>(i) * dim(1) + j]; }
    float at(int i, int j) const { return data_[static_cast<size_t>(i) * dim(1) + j]; }

    float& at(int i, int j, int k) {
        return data_[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
    }
    float at(int i, int j, int k) const {
        return data_[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
    }

    float& at(int i, int j, int k, int l) {
        return data_[((static_cast<size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
    }
    float at(int i, int j, int k, int l) const {
        return data_[((static_cast<size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
    }

    // Same storage, new shape; element count must match.
    Tensor reshaped(std::vector<int> shape) const {
        if (count(shape) != numel()) throw std::invalid_argument("reshape: numel mismatch");
        return Tensor(std::move(shape), data_);
    }

    void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

    void add_(const Tensor& o) {
        assert(numel() == o.numel());
        for (int64_t i = 0; i < numel(); ++i) data_[static_cast<size_t>(i)] += o[i];
    }

    void scale_(float s) {
        for (auto& v : data_) v *= s;
    }

    double sum() const {
        double a = 0.0;
        for (float v : data_) a += v;
        return a;
    }

    double sq_norm() const {
        double a = 0.0;
        for (float v : data_) a += static_cast<double>(v) * v;
        return a;
    }

    bool all_finite() const {
        for (float v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool same_bits(const Tensor& o) const {
        if (shape_ != o.shape_) return false;
        for (int64_t i = 0; i < numel(); ++i) {
            if (data_[static_cast<size_t>(i)] != o[i]) return false;
        }
        return true;
    }

    static int64_t count(const std::vector<int>& shape) {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    assert(a.numel() == b.numel());
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

inline std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

}  // namespace spritelab
