#pragma once

#include <optional>

#include "stabssm/config.hpp"
#include "stabssm/param.hpp"

namespace stabssm {

/// Lower Cholesky factor of a Wishart(k, Sigma) draw, built from independent
/// chi diagonal entries (c_i^2 with k-i+1 degrees of freedom, 1-based) and
/// standard-normal below-diagonal entries, scaled by the factor of Sigma.
/// The product L L^T is the Wishart sample itself.
MatrixXd sample_bartlett_chol(double k, const SpdMatrix& sigma, RngStream& rng);

/// E[L] for the factor above: L_Sigma times the diagonal of chi means
///   sqrt(2) Gamma((degrees - i + 2)/2) / Gamma((degrees - i + 1)/2).
/// `degrees` = k gives the mean of sample_bartlett_chol(k, .); passing the
/// matrix dimension instead reproduces the n-based variant of the ratio.
MatrixXd expected_chol_factor(double degrees, const SpdMatrix& sigma);

/// Draws the free parameters of a stable pair (no model assembly).
StablePairParams sample_wns_params(const WnsConfig& cfg, RngStream& rng);

struct WnsSample {
    StablePairParams params;
    MatrixXd a;
    MatrixXd f;
};

/// Samples a stable pair; every draw is mean-square stable by construction.
WnsSample sample_wns(const WnsConfig& cfg, RngStream& rng);

/// Closed-form E[Q] of the resolved slack matrix. Throws MomentUndefined for
/// the alpha-P mode with k_p <= n + 1 (inverse-Wishart mean does not exist).
MatrixXd expected_q(const WnsConfig& cfg);

/// Closed-form E[A] and E[F]. The alpha-P case uses the exact identity
/// E[P^{-1} (alpha P)] = E[alpha] I rather than a product of expectations.
MatrixXd expected_a(const WnsConfig& cfg);
MatrixXd expected_f(const WnsConfig& cfg);

/// E[Ftil^T Ftil] = E[Ftil]^T E[Ftil] + block-trace matrix of Sigma_f.
MatrixXd expected_ftil_gram(const GaussianBlock& ftil, int n);

/// Orthogonal factor of a Gaussian matrix whose columns have covariance
/// Sigma (matrix angular central Gaussian). Resamples internally on rank
/// deficiency, up to 8 attempts.
OrthogonalMatrix sample_acg_orthogonal(int rows, int cols, const SpdMatrix& sigma,
                                       RngStream& rng);

/// Square orthogonal factor drawn according to the configured scheme.
/// `dim` may differ from the Z-block sizes (Dirichlet construction); the
/// configured covariances are used when they match and identity otherwise.
MatrixXd sample_orthogonal_factor(int dim, bool is_left, const OrthSpec& orth,
                                  RngStream& rng);

struct GainBlockSample {
    MatrixXd btil;  // n x l
    MatrixXd d;     // q x l
    MatrixXd gtil;  // n x l
    std::optional<ZFormGain> zform;           // spectral-ball construction
    std::optional<Eigen::Vector3d> weights;   // Dirichlet construction (b, g, d)
};

/// Gain block via one (2n+q) x l matrix Z with top singular value pinned to
/// 1 - epsilon and the rest uniform on (0, 1 - epsilon); rows scaled by gamma.
GainBlockSample sample_gain_block_zball(int n, int q, int l, double gamma, double epsilon,
                                        const OrthSpec& orth, RngStream& rng);

/// Gain block via three independent SVD constructions whose top singular
/// values are Dirichlet-weighted fractions of (1 - epsilon) gamma.
GainBlockSample sample_gain_block_dirichlet(int n, int q, int l, double gamma,
                                            double epsilon, const DirichletGainSpec& spec,
                                            const OrthSpec& orth, RngStream& rng);

struct WnsBrlSample {
    BrlParams params;
    Ssm ssm;
    SpdMatrix certificate;
};

/// Samples a full model; every draw satisfies the dissipation certificate
/// with gain bound cfg.gamma by construction.
WnsBrlSample sample_wns_brl(const WnsBrlConfig& cfg, RngStream& rng);

/// Log-density of the generative coordinates in the unconstrained chart,
/// including the log-Jacobians of the coordinate transforms. Finite for all
/// finite coordinate vectors. Only the Cayley/spectral-ball family has a
/// tractable chart density; other families throw UnsupportedFamily via the
/// layout construction.
double log_prior(const VectorXd& coords, const UnconstrainedLayout& layout,
                 const WnsBrlConfig& cfg, const HyperPriors& hyper);
double log_prior(const UnconstrainedVector& v, const WnsBrlConfig& cfg,
                 const HyperPriors& hyper);

/// Per-coordinate prior means in the unconstrained chart (used by the
/// prior-recovery diagnostics): exact values from chi, normal, gamma and
/// logistic-uniform marginals.
VectorXd prior_coordinate_means(const UnconstrainedLayout& layout, const WnsBrlConfig& cfg,
                                const HyperPriors& hyper);

}  // namespace stabssm
