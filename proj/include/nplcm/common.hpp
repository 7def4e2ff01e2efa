#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nplcm {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Dense row-major matrix of doubles. All model matrices are small enough
// that a flat vector with explicit indexing is the right tool.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    std::span<const double> row(int r) const { return {v.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
    std::span<double> row(int r) { return {v.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }

    std::vector<double> col(int c) const {
        std::vector<double> out(rows);
        for (int r = 0; r < rows; ++r) out[r] = (*this)(r, c);
        return out;
    }

    bool operator==(const Matrix&) const = default;
};

// Binary / missing-coded integer matrix: entries 0, 1, or -1 for missing.
struct BinMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int8_t> v;

    BinMatrix() = default;
    BinMatrix(int r, int c, int8_t fill = 0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

    int8_t& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    int8_t operator()(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    bool operator==(const BinMatrix&) const = default;
};

inline double logistic(double a) {
    if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
    const double e = std::exp(a);
    return e / (1.0 + e);
}

// log(1/(1+exp(-a))) without overflow.
inline double log_logistic(double a) {
    if (a > 0.0) return -std::log1p(std::exp(-a));
    return a - std::log1p(std::exp(a));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double log_sum_exp(std::span<const double> x) {
    double m = kNegInf;
    for (double xi : x) m = std::max(m, xi);
    if (!std::isfinite(m)) return m;  // all -inf
    double s = 0.0;
    for (double xi : x) s += std::exp(xi - m);
    return m + std::log(s);
}

// Compensated (Kahan) accumulator for long likelihood sums.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream seed for substream `index` of a base seed; used so chains and
// replications get independent, insertion-stable RNG streams.
inline uint64_t derive_seed(uint64_t base, uint64_t index) {
    return splitmix64(splitmix64(base) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

// FNV-1a over raw bytes; provenance hashing for manifests.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace nplcm
