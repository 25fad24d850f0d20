#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ivqa {

// Error taxonomy; the CLI maps these onto distinct exit codes.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Dense row-major array. The universal value carrier for features,
// activations, parameters and gradients.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (shape_numel(shape) != data.size())
            throw DataError("tensor: shape " + shape_str(shape) + " does not match data length " +
                            std::to_string(data.size()));
    }

    static Tensor zeros(Shape s) {
        std::size_t n = shape_numel(s);
        return Tensor(std::move(s), std::vector<T>(n, T(0)));
    }
    static Tensor full(Shape s, T v) {
        std::size_t n = shape_numel(s);
        return Tensor(std::move(s), std::vector<T>(n, v));
    }
    static Tensor vec(std::vector<T> d) {
        Shape s{d.size()};
        return Tensor(std::move(s), std::move(d));
    }
    static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

    std::size_t size() const { return data.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
    void require_finite(const char* what) const {
        if (!all_finite()) throw NumericError(std::string("non-finite values in ") + what);
    }
};

// Glorot-uniform initialization, b = sqrt(6/(fan_in+fan_out)).
// fan_in = last extent, fan_out = first extent; a 1-d shape uses its
// single extent for both. Biases are zero-initialized elsewhere.
template <typename T>
Tensor<T> glorot_init(const Shape& shape, std::uint64_t seed) {
    if (shape.empty()) throw DataError("glorot_init: empty shape");
    for (std::size_t e : shape)
        if (e == 0) throw DataError("glorot_init: zero extent in shape " + shape_str(shape));
    double fan_out = static_cast<double>(shape.front());
    double fan_in = static_cast<double>(shape.back());
    double b = std::sqrt(6.0 / (fan_in + fan_out));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-b, b);
    Tensor<T> out = Tensor<T>::zeros(shape);
    for (auto& v : out.data) v = static_cast<T>(dist(rng));
    return out;
}

// Numerically stable softmax over a flat vector (max subtraction).
template <typename T>
Tensor<T> softmax(const Tensor<T>& v) {
    if (v.size() == 0) throw DataError("softmax: empty input");
    v.require_finite("softmax input");
    T mx = v.data[0];
    for (T x : v.data) mx = std::max(mx, x);
    Tensor<T> out = Tensor<T>::zeros(v.shape);
    T sum = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.data[i] = std::exp(v.data[i] - mx);
        sum += out.data[i];
    }
    for (auto& x : out.data) x /= sum;
    return out;
}

}  // namespace ivqa
