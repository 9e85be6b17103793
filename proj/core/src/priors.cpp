#include "stabssm/priors.hpp"

#include <cmath>

namespace stabssm {

namespace {

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double digamma(double x) {
    double r = 0.0;
    while (x < 6.0) {
        r -= 1.0 / x;
        x += 1.0;
    }
    const double f = 1.0 / (x * x);
    return r + std::log(x) - 0.5 / x -
           f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f / 132))));
}

// E[c] for c^2 ~ chi^2_nu.
double chi_mean(double nu) {
    return std::sqrt(2.0) * std::exp(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu));
}

// log-density of x = log c with c ~ chi_nu, Jacobian included.
double chi_log_density(double x, double nu) {
    return (1.0 - 0.5 * nu) * std::log(2.0) - std::lgamma(0.5 * nu) + nu * x -
           0.5 * std::exp(2.0 * x);
}

// log-density of x = log a with a ~ Gamma(shape, scale), Jacobian included.
double log_gamma_log_density(double x, double shape, double scale) {
    return shape * x - std::exp(x) / scale - shape * std::log(scale) - std::lgamma(shape);
}

constexpr double kLogSqrt2Pi = 0.9189385332046727;

MatrixXd unveck(const VectorXd& packed, int n) {
    return SkewMatrix(n, packed).unpack();
}

}  // namespace

void WnsConfig::validate() const {
    if (n < 1) throw ConfigError("WnsConfig: n must be positive");
    if (k_p < n) throw DegreesTooSmall("WnsConfig: k_p must be >= n");
    if (sigma_p.dim() != n) throw DimensionMismatch("WnsConfig: Sigma_p dimension");
    if (ftil.dim() != n * n) throw DimensionMismatch("WnsConfig: Ftil block must have n^2 dims");
    if (skew.dim() != n * (n - 1) / 2)
        throw DimensionMismatch("WnsConfig: skew block must have n(n-1)/2 dims");
    if (const auto* fq = std::get_if<FixedQSpec>(&qmode)) {
        if (fq->q.dim() != n) throw DimensionMismatch("WnsConfig: fixed Q dimension");
    } else if (const auto* wq = std::get_if<WishartQSpec>(&qmode)) {
        if (wq->sigma.dim() != n) throw DimensionMismatch("WnsConfig: Sigma_q dimension");
        if (wq->k < n) throw DegreesTooSmall("WnsConfig: k_q must be >= n");
    } else {
        const auto& ga = std::get<GammaAlphaSpec>(qmode);
        if (!(ga.shape > 0.0) || !(ga.scale > 0.0))
            throw ConfigError("WnsConfig: Gamma(alpha) parameters must be positive");
    }
}

void WnsBrlConfig::validate() const {
    base.validate();
    if (l < 1 || q < 1) throw ConfigError("WnsBrlConfig: l and q must be positive");
    if (c.dim() != q * base.n) throw DimensionMismatch("WnsBrlConfig: C block must have q*n dims");
    if (!(gamma > 0.0)) throw ConfigError("WnsBrlConfig: gamma must be positive");
    if (rho < -1.0 || rho > 1.0) throw ConfigError("WnsBrlConfig: rho outside [-1,1]");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("WnsBrlConfig: epsilon outside (0,1)");
    if (std::holds_alternative<ZBallGainSpec>(gain)) {
        const int m = zdim();
        if (const auto* acg = std::get_if<AcgOrthSpec>(&orth)) {
            if (acg->sigma_u.dim() != m) throw DimensionMismatch("WnsBrlConfig: Sigma_u dimension");
            if (acg->sigma_v.dim() != l) throw DimensionMismatch("WnsBrlConfig: Sigma_v dimension");
        } else {
            const auto& cay = std::get<CayleyOrthSpec>(orth);
            if (cay.su.dim() != m * (m - 1) / 2)
                throw DimensionMismatch("WnsBrlConfig: S_u block must have (2n+q choose 2) dims");
            if (cay.sv.dim() != l * (l - 1) / 2)
                throw DimensionMismatch("WnsBrlConfig: S_v block must have (l choose 2) dims");
        }
    } else {
        const auto& dir = std::get<DirichletGainSpec>(gain);
        if (!(dir.a_b > 0.0 && dir.a_g > 0.0 && dir.a_d > 0.0))
            throw ConfigError("WnsBrlConfig: Dirichlet concentrations must be positive");
    }
}

MatrixXd sample_bartlett_chol(double k, const SpdMatrix& sigma, RngStream& rng) {
    const int n = sigma.dim();
    if (k < n) throw DegreesTooSmall("sample_bartlett_chol: degrees k must be >= dimension");
    MatrixXd ltil = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < i; ++j) ltil(i, j) = rng.normal();
        ltil(i, i) = std::sqrt(rng.chi_squared(k - i));
    }
    return sigma.cholesky().triangularView<Eigen::Lower>() * ltil;
}

MatrixXd expected_chol_factor(double degrees, const SpdMatrix& sigma) {
    const int n = sigma.dim();
    VectorXd d(n);
    for (int i = 1; i <= n; ++i) d(i - 1) = chi_mean(degrees - i + 1);
    return sigma.cholesky() * d.asDiagonal();
}

StablePairParams sample_wns_params(const WnsConfig& cfg, RngStream& rng) {
    cfg.validate();
    const int n = cfg.n;
    MatrixXd l_pinv = sample_bartlett_chol(cfg.k_p, cfg.sigma_p, rng);
    QMode qmode = [&]() -> QMode {
        if (const auto* fq = std::get_if<FixedQSpec>(&cfg.qmode)) return FixedQ{fq->q};
        if (const auto* wq = std::get_if<WishartQSpec>(&cfg.qmode))
            return SampledQ{SpdMatrix::from_cholesky(sample_bartlett_chol(wq->k, wq->sigma, rng))};
        const auto& ga = std::get<GammaAlphaSpec>(cfg.qmode);
        return AlphaP{rng.gamma(ga.shape, ga.scale)};
    }();
    MatrixXd ftil = Eigen::Map<const MatrixXd>(cfg.ftil.sample(rng).eval().data(), n, n);
    SkewMatrix s = cfg.skew.dim() > 0 ? SkewMatrix(n, cfg.skew.sample(rng)) : SkewMatrix(n);
    return StablePairParams{SpdMatrix::from_inverse_cholesky(l_pinv), std::move(ftil),
                            std::move(s), std::move(qmode)};
}

WnsSample sample_wns(const WnsConfig& cfg, RngStream& rng) {
    StablePairParams params = sample_wns_params(cfg, rng);
    StablePair pair = stable_pair_from_params(params);
    return {std::move(params), std::move(pair.a), std::move(pair.f)};
}

MatrixXd expected_ftil_gram(const GaussianBlock& ftil, int n) {
    if (ftil.dim() != n * n) throw DimensionMismatch("expected_ftil_gram: block size");
    const MatrixXd mu = Eigen::Map<const MatrixXd>(ftil.mean().data(), n, n);
    MatrixXd gram = mu.transpose() * mu;
    const MatrixXd& cov = ftil.covariance().matrix();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) gram(i, j) += cov.block(i * n, j * n, n, n).trace();
    return gram;
}

MatrixXd expected_q(const WnsConfig& cfg) {
    cfg.validate();
    if (const auto* fq = std::get_if<FixedQSpec>(&cfg.qmode)) return fq->q.matrix();
    if (const auto* wq = std::get_if<WishartQSpec>(&cfg.qmode)) return wq->k * wq->sigma.matrix();
    const auto& ga = std::get<GammaAlphaSpec>(cfg.qmode);
    if (cfg.k_p <= cfg.n + 1)
        throw MomentUndefined("expected_q: alpha-P mode needs k_p > n + 1");
    return ga.shape * ga.scale / (cfg.k_p - cfg.n - 1) * cfg.sigma_p.inverse();
}

MatrixXd expected_a(const WnsConfig& cfg) {
    cfg.validate();
    const int n = cfg.n;
    const MatrixXd e_pinv = cfg.k_p * cfg.sigma_p.matrix();
    const MatrixXd gram = expected_ftil_gram(cfg.ftil, n);
    const MatrixXd e_s =
        cfg.skew.dim() > 0 ? unveck(cfg.skew.mean(), n) : MatrixXd::Zero(n, n);
    if (const auto* ga = std::get_if<GammaAlphaSpec>(&cfg.qmode)) {
        if (cfg.k_p <= n + 1)
            throw MomentUndefined("expected_a: alpha-P mode needs k_p > n + 1");
        // P^{-1} (alpha P) = alpha I exactly; the slack term decouples from P.
        return -0.5 * (ga->shape * ga->scale * MatrixXd::Identity(n, n) +
                       e_pinv * (gram + e_s));
    }
    return -0.5 * e_pinv * (expected_q(cfg) + gram + e_s);
}

MatrixXd expected_f(const WnsConfig& cfg) {
    cfg.validate();
    const int n = cfg.n;
    const MatrixXd mu = Eigen::Map<const MatrixXd>(cfg.ftil.mean().data(), n, n);
    return expected_chol_factor(cfg.k_p, cfg.sigma_p) * mu;
}

OrthogonalMatrix sample_acg_orthogonal(int rows, int cols, const SpdMatrix& sigma,
                                       RngStream& rng) {
    if (rows < cols) throw DimensionMismatch("sample_acg_orthogonal: rows must be >= cols");
    if (sigma.dim() != rows) throw DimensionMismatch("sample_acg_orthogonal: Sigma dimension");
    for (int attempt = 0; attempt < 8; ++attempt) {
        MatrixXd x(rows, cols);
        for (int j = 0; j < cols; ++j)
            x.col(j) = sigma.cholesky().triangularView<Eigen::Lower>() * rng.normal_vector(rows);
        try {
            return qr_orthonormal(x);
        } catch (const RankDeficient&) {
            continue;
        }
    }
    throw RankDeficient("sample_acg_orthogonal: rank-deficient after 8 attempts");
}

MatrixXd sample_orthogonal_factor(int dim, bool is_left, const OrthSpec& orth,
                                  RngStream& rng) {
    if (const auto* acg = std::get_if<AcgOrthSpec>(&orth)) {
        const SpdMatrix& cfg_sigma = is_left ? acg->sigma_u : acg->sigma_v;
        const SpdMatrix sigma =
            cfg_sigma.dim() == dim ? cfg_sigma : SpdMatrix::identity(dim);
        return sample_acg_orthogonal(dim, dim, sigma, rng).matrix();
    }
    const auto& cay = std::get<CayleyOrthSpec>(orth);
    const int veck_dim = dim * (dim - 1) / 2;
    const GaussianBlock& cfg_block = is_left ? cay.su : cay.sv;
    // Standard-normal skew entries when the configured block does not match
    // this factor's size (Dirichlet construction reuses the scheme only).
    SkewMatrix skew = (veck_dim == 0) ? SkewMatrix(dim)
                      : (cfg_block.dim() == veck_dim)
                          ? SkewMatrix(dim, cfg_block.sample(rng))
                          : SkewMatrix(dim, rng.normal_vector(veck_dim));
    VectorXd signs = VectorXd::Ones(dim);
    if (cay.random_signs)
        for (int i = 0; i < dim; ++i) signs(i) = rng.rademacher();
    return cayley(skew, signs).matrix();
}

GainBlockSample sample_gain_block_zball(int n, int q, int l, double gamma, double epsilon,
                                        const OrthSpec& orth, RngStream& rng) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ConfigError("sample_gain_block_zball: epsilon outside (0,1)");
    const int m = 2 * n + q;
    const int k = std::min(m, l);
    const double cap = 1.0 - epsilon;
    VectorXd sigma(k);
    sigma(0) = cap;
    for (int i = 1; i < k; ++i) sigma(i) = rng.uniform(0.0, cap);
    MatrixXd u = sample_orthogonal_factor(m, /*is_left=*/true, orth, rng);
    MatrixXd v = sample_orthogonal_factor(l, /*is_left=*/false, orth, rng);
    MatrixXd z = u * rect_diag(m, l, sigma) * v.transpose();

    GainBlockSample out;
    out.btil = gamma * z.topRows(n);
    out.d = gamma * z.middleRows(n, q);
    out.gtil = gamma * z.bottomRows(n);
    out.zform = ZFormGain{std::move(z), std::move(u), std::move(v), std::move(sigma)};
    return out;
}

namespace {

MatrixXd sample_svd_matrix(int rows, int cols, double top, const OrthSpec& orth,
                           RngStream& rng) {
    const int k = std::min(rows, cols);
    VectorXd sigma(k);
    sigma(0) = top;
    for (int i = 1; i < k; ++i) sigma(i) = rng.uniform(0.0, top);
    MatrixXd u = sample_orthogonal_factor(rows, true, orth, rng);
    MatrixXd v = sample_orthogonal_factor(cols, false, orth, rng);
    return u * rect_diag(rows, cols, sigma) * v.transpose();
}

}  // namespace

GainBlockSample sample_gain_block_dirichlet(int n, int q, int l, double gamma,
                                            double epsilon, const DirichletGainSpec& spec,
                                            const OrthSpec& orth, RngStream& rng) {
    if (!(spec.a_b > 0.0 && spec.a_g > 0.0 && spec.a_d > 0.0))
        throw ConfigError("sample_gain_block_dirichlet: concentrations must be positive");
    const double gb = rng.gamma(spec.a_b, 1.0);
    const double gg = rng.gamma(spec.a_g, 1.0);
    const double gd = rng.gamma(spec.a_d, 1.0);
    const double total = gb + gg + gd;
    const Eigen::Vector3d lambda(gb / total, gg / total, gd / total);

    const double scale = (1.0 - epsilon) * gamma;
    GainBlockSample out;
    out.btil = sample_svd_matrix(n, l, lambda(0) * scale, orth, rng);
    out.gtil = sample_svd_matrix(n, l, lambda(1) * scale, orth, rng);
    out.d = sample_svd_matrix(q, l, lambda(2) * scale, orth, rng);
    out.weights = lambda;
    return out;
}

WnsBrlSample sample_wns_brl(const WnsBrlConfig& cfg, RngStream& rng) {
    cfg.validate();
    const int n = cfg.base.n;
    StablePairParams base = sample_wns_params(cfg.base, rng);
    MatrixXd c = Eigen::Map<const MatrixXd>(cfg.c.sample(rng).eval().data(), cfg.q, n);

    GainBlockSample gain = [&] {
        if (const auto* dir = std::get_if<DirichletGainSpec>(&cfg.gain))
            return sample_gain_block_dirichlet(n, cfg.q, cfg.l, cfg.gamma, cfg.epsilon, *dir,
                                               cfg.orth, rng);
        return sample_gain_block_zball(n, cfg.q, cfg.l, cfg.gamma, cfg.epsilon, cfg.orth, rng);
    }();

    GainBlock block = gain.zform
                          ? GainBlock{std::move(*gain.zform)}
                          : GainBlock{SplitGain{std::move(gain.btil), std::move(gain.d),
                                                std::move(gain.gtil)}};
    BrlParams params{base.p,           base.resolved_q(), std::move(base.s),
                     std::move(base.ftil), std::move(c),  std::move(block),
                     cfg.gamma,        cfg.rho};
    RealizedSsm realized = ssm_from_brl_params(params);
    return {std::move(params), std::move(realized.ssm), std::move(realized.certificate)};
}

double log_prior(const VectorXd& coords, const UnconstrainedLayout& layout,
                 const WnsBrlConfig& cfg, const HyperPriors& hyper) {
    if (coords.size() != layout.total)
        throw DimensionMismatch("log_prior: coordinate size does not match layout");
    const auto* cay = std::get_if<CayleyOrthSpec>(&cfg.orth);
    if (!cay) throw UnsupportedFamily("log_prior: only the Cayley orthogonal family");

    double lp = 0.0;
    for (const Segment& seg : layout.segments) {
        const auto x = coords.segment(seg.offset, seg.size);
        switch (seg.kind) {
            case SegmentKind::BartlettLogDiagP:
                for (int i = 0; i < seg.size; ++i)
                    lp += chi_log_density(x(i), cfg.base.k_p - i);
                break;
            case SegmentKind::BartlettLogDiagQ: {
                const auto& wq = std::get<WishartQSpec>(cfg.base.qmode);
                for (int i = 0; i < seg.size; ++i) lp += chi_log_density(x(i), wq.k - i);
                break;
            }
            case SegmentKind::BartlettOffDiagP:
            case SegmentKind::BartlettOffDiagQ:
                lp += -0.5 * x.squaredNorm() - seg.size * kLogSqrt2Pi;
                break;
            case SegmentKind::LogAlpha: {
                const auto& ga = std::get<GammaAlphaSpec>(cfg.base.qmode);
                lp += log_gamma_log_density(x(0), ga.shape, ga.scale);
                break;
            }
            case SegmentKind::GaussFtil:
                lp += cfg.base.ftil.log_density(x);
                break;
            case SegmentKind::GaussSkew:
                lp += cfg.base.skew.log_density(x);
                break;
            case SegmentKind::GaussC:
                lp += cfg.c.log_density(x);
                break;
            case SegmentKind::CayleySkewU:
                lp += cay->su.log_density(x);
                break;
            case SegmentKind::CayleySkewV:
                lp += cay->sv.log_density(x);
                break;
            case SegmentKind::SigmaLogit:
            case SegmentKind::RhoLogit:
                // logit of a uniform variate: logistic(0,1) density.
                for (int i = 0; i < seg.size; ++i)
                    lp += -softplus(x(i)) - softplus(-x(i));
                break;
            case SegmentKind::LogGamma:
                lp += log_gamma_log_density(x(0), hyper.gamma_shape, hyper.gamma_scale);
                break;
        }
    }
    return lp;
}

double log_prior(const UnconstrainedVector& v, const WnsBrlConfig& cfg,
                 const HyperPriors& hyper) {
    return log_prior(v.coords, v.layout, cfg, hyper);
}

VectorXd prior_coordinate_means(const UnconstrainedLayout& layout, const WnsBrlConfig& cfg,
                                const HyperPriors& hyper) {
    VectorXd mean = VectorXd::Zero(layout.total);
    const auto* cay = std::get_if<CayleyOrthSpec>(&cfg.orth);
    for (const Segment& seg : layout.segments) {
        auto block = mean.segment(seg.offset, seg.size);
        switch (seg.kind) {
            case SegmentKind::BartlettLogDiagP:
                for (int i = 0; i < seg.size; ++i)
                    block(i) = 0.5 * (std::log(2.0) + digamma(0.5 * (cfg.base.k_p - i)));
                break;
            case SegmentKind::BartlettLogDiagQ: {
                const auto& wq = std::get<WishartQSpec>(cfg.base.qmode);
                for (int i = 0; i < seg.size; ++i)
                    block(i) = 0.5 * (std::log(2.0) + digamma(0.5 * (wq.k - i)));
                break;
            }
            case SegmentKind::LogAlpha: {
                const auto& ga = std::get<GammaAlphaSpec>(cfg.base.qmode);
                block(0) = digamma(ga.shape) + std::log(ga.scale);
                break;
            }
            case SegmentKind::GaussFtil:
                block = cfg.base.ftil.mean();
                break;
            case SegmentKind::GaussSkew:
                block = cfg.base.skew.mean();
                break;
            case SegmentKind::GaussC:
                block = cfg.c.mean();
                break;
            case SegmentKind::CayleySkewU:
                if (cay) block = cay->su.mean();
                break;
            case SegmentKind::CayleySkewV:
                if (cay) block = cay->sv.mean();
                break;
            case SegmentKind::LogGamma:
                block(0) = digamma(hyper.gamma_shape) + std::log(hyper.gamma_scale);
                break;
            default:
                break;  // zero-mean coordinates
        }
    }
    return mean;
}

}  // namespace stabssm
