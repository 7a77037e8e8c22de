#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "spikepoint/errors.hpp"

namespace spikepoint {

// Dense row-major float tensor. Plain storage; all math lives in the ops
// that consume it.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(count(shape)), 0.0f);
    }
    Tensor(std::vector<int64_t> s, float fill) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(count(shape)), fill);
    }

    static int64_t count(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int64_t> s, float v) { return Tensor(std::move(s), v); }
    static Tensor scalar(float v) { return Tensor({1}, v); }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

    float& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    // Product of dims in [from, to).
    int64_t count_dims(int from, int to) const {
        int64_t n = 1;
        for (int i = from; i < to; ++i) n *= dim(i);
        return n;
    }

    static std::string shape_to_string(const std::vector<int64_t>& s) {
        std::string out = "[";
        for (size_t i = 0; i < s.size(); ++i) {
            if (i) out += ", ";
            out += std::to_string(s[i]);
        }
        return out + "]";
    }

    std::string shape_str() const { return shape_to_string(shape); }

    void require_shape(const std::vector<int64_t>& s, const char* what) const {
        if (shape != s) {
            throw ShapeError(std::string(what) + ": expected shape " + shape_to_string(s) +
                             ", got " + shape_str());
        }
    }
};

}  // namespace spikepoint
