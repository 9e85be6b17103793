#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace stabssm {

/// Seeded random stream. Identical (seed, stream) pairs reproduce the same
/// draw sequence; distinct stream ids give statistically independent
/// sequences. Parallel consumers derive child streams with substream().
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Deterministically derived independent stream for worker `index`.
    RngStream substream(std::uint64_t index) const;

    double uniform();                     // U(0,1)
    double uniform(double lo, double hi); // U(lo,hi)
    double normal();                      // N(0,1)
    double chi_squared(double df);
    double gamma(double shape, double scale);  // mean shape*scale
    double rademacher();                  // +-1 with equal probability

    Eigen::VectorXd normal_vector(int n);
    /// mu + L z with z standard normal (L a lower Cholesky factor).
    Eigen::VectorXd gaussian(const Eigen::VectorXd& mu, const Eigen::MatrixXd& chol_lower);

    std::mt19937_64& engine() { return engine_; }

  private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
};

}  // namespace stabssm
