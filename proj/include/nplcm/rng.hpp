#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <string>

#include "nplcm/common.hpp"

namespace nplcm {

// Seeded random stream with hand-rolled variate generators so that draws are
// bit-reproducible across platforms and the full state serializes cleanly
// (std::*_distribution state is implementation-defined; these are not).
class RngStream {
public:
    RngStream() : engine_(0) {}
    explicit RngStream(uint64_t seed) : engine_(seed) {}

    // Uniform on the open interval (0,1); safe to take logs of u and 1-u.
    double uniform() {
        const uint64_t x = engine_();
        return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int n) {  // 0..n-1
        return static_cast<int>(std::min<double>(n - 1, std::floor(uniform() * n)));
    }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double half_normal(double precision) {  // |N(0, 1/precision)|
        return std::abs(normal() / std::sqrt(precision));
    }

    // Marsaglia-Tsang; shape a > 0, unit rate.
    double gamma(double a) {
        if (a < 1.0) {
            const double u = uniform();
            return gamma(a + 1.0) * std::pow(u, 1.0 / a);
        }
        const double d = a - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double gamma(double shape, double rate) { return gamma(shape) / rate; }

    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        const double s = x + y;
        if (s <= 0.0) return 0.5;  // double underflow for extreme shapes
        return x / s;
    }

    int bernoulli(double p) { return uniform() < p ? 1 : 0; }

    // Index draw from possibly unnormalized nonnegative weights.
    int categorical(std::span<const double> w) {
        double total = 0.0;
        for (double wi : w) total += wi;
        require(total > 0.0 && std::isfinite(total), "categorical: no positive weight");
        double u = uniform() * total;
        for (size_t k = 0; k + 1 < w.size(); ++k) {
            u -= w[k];
            if (u <= 0.0) return static_cast<int>(k);
        }
        return static_cast<int>(w.size()) - 1;
    }

    // Index draw from log-weights (-inf allowed).
    int categorical_log(std::span<const double> lw) {
        double m = kNegInf;
        for (double l : lw) m = std::max(m, l);
        require(std::isfinite(m), "categorical_log: all weights are zero");
        std::vector<double> w(lw.size());
        for (size_t k = 0; k < lw.size(); ++k) w[k] = std::exp(lw[k] - m);
        return categorical(w);
    }

    // InvPareto(a,b): density (a/b)(t/b)^(a-1) on (0,b); CDF (t/b)^a.
    double inv_pareto(double a, double b) { return b * std::pow(uniform(), 1.0 / a); }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
        if (!is) throw std::runtime_error("rng state parse failure");
    }

    bool operator==(const RngStream& o) const { return engine_ == o.engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace nplcm
