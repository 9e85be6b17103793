#pragma once

#include <complex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stabssm/config.hpp"
#include "stabssm/model.hpp"

namespace stabssm {

/// Q resolution for a realized stable-pair parameter set.
struct FixedQ {
    SpdMatrix q;
};
struct SampledQ {
    SpdMatrix q;
};
struct AlphaP {
    double alpha;
};
using QMode = std::variant<FixedQ, SampledQ, AlphaP>;

/// Free parameters (P, Q-mode, S, Ftil) generating a mean-square stable
/// pair A = -1/2 P^{-1}(Q + Ftil^T Ftil + S), F = L_{P^{-1}} Ftil.
struct StablePairParams {
    SpdMatrix p;
    MatrixXd ftil;
    SkewMatrix s;
    QMode qmode;

    int dim() const { return p.dim(); }
    SpdMatrix resolved_q() const;
};

struct StablePair {
    MatrixXd a;
    MatrixXd f;
};

StablePair stable_pair_from_params(const StablePairParams& params);

/// Recovers parameters from a stable pair for a chosen slack matrix Q.
/// Throws UnstablePair when the Lyapunov solution is not positive definite
/// and AsymmetryTooLarge when the extracted S drifts from skew-symmetry.
StablePairParams params_from_stable_pair(const MatrixXd& a, const MatrixXd& f,
                                         const SpdMatrix& q);

/// Gain block coordinates: either the stacked spectral-ball matrix
/// Z = (1/gamma) [Btil; D; Gtil] (optionally with its generating SVD
/// factors) or the three blocks directly.
struct ZFormGain {
    MatrixXd z;  // (2n+q) x l, ||Z||_2 < 1
    std::optional<MatrixXd> u;       // (2n+q) square orthogonal
    std::optional<MatrixXd> v;       // l square orthogonal
    std::optional<VectorXd> sigma;   // min(2n+q, l) singular values
};
struct SplitGain {
    MatrixXd btil;  // n x l
    MatrixXd d;     // q x l
    MatrixXd gtil;  // n x l
};
using GainBlock = std::variant<ZFormGain, SplitGain>;

/// Free parameters generating a model that satisfies the dissipation
/// certificate with gain bound gamma.
struct BrlParams {
    SpdMatrix p;
    SpdMatrix q;
    SkewMatrix s;
    MatrixXd ftil;  // n x n
    MatrixXd c;     // q x n
    GainBlock gain;
    double gamma = 1.0;
    double rho = 0.0;

    int n() const { return p.dim(); }
    int q_out() const { return static_cast<int>(c.rows()); }
    int l() const;

    /// (Btil, D, Gtil), scaling Z by gamma when in Z form.
    SplitGain resolved_gain() const;
};

struct RealizedSsm {
    Ssm ssm;
    SpdMatrix certificate;
};

/// Forward map: throws GainConditionViolated when
/// Btil^T Btil + D^T D + Gtil^T Gtil < gamma^2 I fails.
RealizedSsm ssm_from_brl_params(const BrlParams& params);

/// Inverse map given a certificate P. Throws NotACertificate when the
/// block matrix is not negative definite or the recovered Q is not
/// positive definite.
BrlParams brl_params_from_ssm(const Ssm& s, const SpdMatrix& p, double gamma);

/// Residuals of the Rayleigh-quotient eigenvalue identities
///   Re(lambda) = -v* (Q + Ftil^T Ftil) v / (2 v* P v),
///   Im(lambda) = -v* S v / (2 v* P v)
/// for each eigenpair of A.
struct EigResidual {
    std::complex<double> lambda;
    double residual_re;
    double residual_im;
};
std::vector<EigResidual> eig_structure_check(const MatrixXd& a, const SpdMatrix& p,
                                             const SpdMatrix& q_resolved,
                                             const MatrixXd& ftil, const SkewMatrix& s);

// ---------------------------------------------------------------------------
// Unconstrained coordinates
// ---------------------------------------------------------------------------

enum class SegmentKind {
    BartlettLogDiagP,
    BartlettOffDiagP,
    BartlettLogDiagQ,
    BartlettOffDiagQ,
    LogAlpha,
    GaussFtil,
    GaussSkew,
    GaussC,
    CayleySkewU,
    CayleySkewV,
    SigmaLogit,
    RhoLogit,
    LogGamma,
};

struct Segment {
    SegmentKind kind;
    std::string name;
    int offset = 0;
    int size = 0;
};

/// Named segment map over a flat coordinate vector.
struct UnconstrainedLayout {
    std::vector<Segment> segments;
    int total = 0;

    static UnconstrainedLayout for_stable_pair(const WnsConfig& cfg);
    static UnconstrainedLayout for_brl(const WnsBrlConfig& cfg, const HyperPriors& hyper);

    const Segment* find(SegmentKind kind) const;
    Eigen::VectorBlock<const VectorXd> view(const VectorXd& coords, const Segment& seg) const;
};

struct UnconstrainedVector {
    VectorXd coords;
    UnconstrainedLayout layout;
};

/// Bijective charts between parameter structs and unconstrained coordinates.
/// Positive scalars map through log, bounded scalars through scaled logits,
/// SPD factors through Bartlett-style Cholesky coordinates with log
/// diagonals, and orthogonal factors through Cayley skew coordinates with
/// sign matrices pinned to the identity. Only the spectral-ball/Cayley gain
/// family is chartable; ACG and Dirichlet variants throw UnsupportedFamily.
UnconstrainedVector to_unconstrained(const StablePairParams& params, const WnsConfig& cfg);
StablePairParams stable_pair_from_unconstrained(const UnconstrainedVector& v,
                                                const WnsConfig& cfg);

UnconstrainedVector to_unconstrained(const BrlParams& params, const WnsBrlConfig& cfg,
                                     const HyperPriors& hyper);
BrlParams brl_from_unconstrained(const UnconstrainedVector& v, const WnsBrlConfig& cfg,
                                 const HyperPriors& hyper);
BrlParams brl_from_unconstrained(const VectorXd& coords, const WnsBrlConfig& cfg,
                                 const HyperPriors& hyper);

}  // namespace stabssm
