#include "stabssm/rng.hpp"

#include <cmath>

namespace stabssm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
    // Two rounds of splitmix decorrelate nearby (seed, stream) pairs before
    // seeding the engine.
    std::seed_seq seq{splitmix64(seed), splitmix64(stream ^ 0xD1B54A32D192ED03ull),
                      splitmix64(seed ^ splitmix64(stream))};
    engine_.seed(seq);
}

RngStream RngStream::substream(std::uint64_t index) const {
    return RngStream(seed_, splitmix64(stream_ * 0x9E3779B97F4A7C15ull + index + 1));
}

double RngStream::uniform() {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    return d(engine_);
}

double RngStream::uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(engine_);
}

double RngStream::normal() {
    // Stateless polar method; std::normal_distribution caches a spare draw,
    // which would make the stream position depend on call history.
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
}

double RngStream::chi_squared(double df) {
    return gamma(0.5 * df, 2.0);
}

double RngStream::gamma(double shape, double scale) {
    // Marsaglia-Tsang for shape >= 1, boosted for shape < 1.
    if (shape < 1.0) {
        const double u = uniform();
        return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
}

double RngStream::rademacher() {
    return (engine_() & 1ull) ? 1.0 : -1.0;
}

Eigen::VectorXd RngStream::normal_vector(int n) {
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = normal();
    return z;
}

Eigen::VectorXd RngStream::gaussian(const Eigen::VectorXd& mu,
                                    const Eigen::MatrixXd& chol_lower) {
    return mu + chol_lower.triangularView<Eigen::Lower>() *
                    normal_vector(static_cast<int>(mu.size()));
}

}  // namespace stabssm
