#pragma once

#include <optional>
#include <variant>

#include "stabssm/linalg.hpp"
#include "stabssm/rng.hpp"

namespace stabssm {

/// Multivariate Gaussian block N(mu, cov). A zero-dimensional block is a
/// valid degenerate case (e.g. the skew block at n = 1).
class GaussianBlock {
  public:
    GaussianBlock() = default;
    GaussianBlock(VectorXd mu, SpdMatrix cov) : mu_(std::move(mu)), cov_(std::move(cov)) {
        if (mu_.size() != cov_->dim())
            throw DimensionMismatch("GaussianBlock: mean/covariance size mismatch");
    }
    static GaussianBlock isotropic(int dim, double var) {
        if (dim == 0) return {};
        return {VectorXd::Zero(dim), SpdMatrix::scaled_identity(dim, var)};
    }

    int dim() const { return static_cast<int>(mu_.size()); }
    const VectorXd& mean() const { return mu_; }
    const SpdMatrix& covariance() const { return *cov_; }

    VectorXd sample(RngStream& rng) const {
        if (dim() == 0) return VectorXd();
        return rng.gaussian(mu_, cov_->cholesky());
    }

    double log_density(const VectorXd& x) const {
        if (dim() == 0) return 0.0;
        if (x.size() != dim()) throw DimensionMismatch("GaussianBlock: point size");
        const VectorXd r = x - mu_;
        const VectorXd w = cov_->cholesky().triangularView<Eigen::Lower>().solve(r);
        constexpr double kLog2Pi = 1.8378770664093453;
        return -0.5 * (w.squaredNorm() + cov_->log_det() + dim() * kLog2Pi);
    }

  private:
    VectorXd mu_;
    std::optional<SpdMatrix> cov_;
};

/// How the slack matrix Q of the stable-pair map is resolved.
struct FixedQSpec {
    SpdMatrix q;
};
struct WishartQSpec {
    double k;
    SpdMatrix sigma;
};
struct GammaAlphaSpec {
    double shape;
    double scale;  // mean = shape * scale
};
using QModeSpec = std::variant<FixedQSpec, WishartQSpec, GammaAlphaSpec>;

/// Hyperparameters of the stable-pair distributions: Wishart factor for
/// P^{-1}, Gaussian blocks for vec(Ftil) and veck(S), and the Q mode.
struct WnsConfig {
    int n = 0;
    double k_p = 0.0;
    SpdMatrix sigma_p = SpdMatrix::identity(1);
    QModeSpec qmode = FixedQSpec{SpdMatrix::identity(1)};
    GaussianBlock ftil;  // dim n^2
    GaussianBlock skew;  // dim n(n-1)/2

    void validate() const;
};

/// Orthogonal-factor sampling scheme for the gain block.
struct AcgOrthSpec {
    SpdMatrix sigma_u = SpdMatrix::identity(1);  // dim 2n+q
    SpdMatrix sigma_v = SpdMatrix::identity(1);  // dim l
};
struct CayleyOrthSpec {
    GaussianBlock su;  // veck dim of a (2n+q)-square skew matrix
    GaussianBlock sv;  // veck dim of an l-square skew matrix
    bool random_signs = true;  // forward sampling only; charts pin E = I
};
using OrthSpec = std::variant<AcgOrthSpec, CayleyOrthSpec>;

/// Gain-block construction: one spectral-ball matrix Z, or three independent
/// SVD factors with Dirichlet-weighted top singular values.
struct ZBallGainSpec {};
struct DirichletGainSpec {
    double a_b = 1.0, a_g = 1.0, a_d = 1.0;
};
using GainSpec = std::variant<ZBallGainSpec, DirichletGainSpec>;

/// Full configuration of the externally-stable model distributions.
struct WnsBrlConfig {
    WnsConfig base;
    int l = 0;
    int q = 0;
    GaussianBlock c;  // dim q*n
    double gamma = 1.0;
    double rho = 0.0;
    double epsilon = 1e-4;
    OrthSpec orth = CayleyOrthSpec{};
    GainSpec gain = ZBallGainSpec{};

    int zdim() const { return 2 * base.n + q; }
    int zrank() const { return std::min(zdim(), l); }
    void validate() const;
};

/// Hyper-priors placed on (rho, gamma) during inference. When a flag is
/// false the corresponding value is held fixed at the config value.
struct HyperPriors {
    bool infer_rho = true;
    double rho_lo = -0.95;
    double rho_hi = 0.95;
    bool infer_gamma = true;
    double gamma_shape = 1.0;
    double gamma_scale = 1.0;
};

}  // namespace stabssm
