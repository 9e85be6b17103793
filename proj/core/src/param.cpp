#include "stabssm/param.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace stabssm {

namespace {

double logit(double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("logit: argument outside (0,1)");
    return std::log(u) - std::log1p(-u);
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

MatrixXd unvec(const VectorXd& v, int rows, int cols) {
    return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

VectorXd vec(const MatrixXd& m) {
    return Eigen::Map<const VectorXd>(m.data(), m.size());
}

// Bartlett-style chart of a lower Cholesky factor relative to a scale
// factor: coords are log-diagonal then below-diagonal entries (column
// order) of Ltil = L_sigma^{-1} L.
void pack_chol(const MatrixXd& l, const MatrixXd& l_sigma, VectorXd& out, int& pos) {
    const int n = static_cast<int>(l.rows());
    MatrixXd ltil = l_sigma.triangularView<Eigen::Lower>().solve(l);
    for (int i = 0; i < n; ++i) {
        if (!(ltil(i, i) > 0.0))
            throw DomainError("to_unconstrained: non-positive Cholesky pivot");
        out(pos++) = std::log(ltil(i, i));
    }
    for (int j = 0; j < n; ++j)
        for (int i = j + 1; i < n; ++i) out(pos++) = ltil(i, j);
}

MatrixXd unpack_chol(const VectorXd& coords, int& pos, int n, const MatrixXd& l_sigma) {
    MatrixXd ltil = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) ltil(i, i) = std::exp(coords(pos++));
    for (int j = 0; j < n; ++j)
        for (int i = j + 1; i < n; ++i) ltil(i, j) = coords(pos++);
    return l_sigma.triangularView<Eigen::Lower>() * ltil;
}

// Recovers square SVD factors (U, V, sigma) of Z with det(U) = det(V) = +1,
// preserving Z. Used when a Z-form gain block arrives without its
// generating factors (e.g. deserialized models).
void reconstruct_gain_svd(const MatrixXd& z, double epsilon, MatrixXd& u, MatrixXd& v,
                          VectorXd& sigma) {
    Eigen::JacobiSVD<MatrixXd> svd(z, Eigen::ComputeFullU | Eigen::ComputeFullV);
    u = svd.matrixU();
    v = svd.matrixV();
    sigma = svd.singularValues();
    const int m = static_cast<int>(u.rows());
    const int l = static_cast<int>(v.rows());
    const int k = static_cast<int>(sigma.size());
    if (sigma(0) > 1.0 - epsilon + 1e-8)
        throw DomainError("gain chart: top singular value exceeds 1 - epsilon");

    bool flip_u = u.determinant() < 0.0;
    bool flip_v = v.determinant() < 0.0;
    if (flip_u && flip_v) {
        u.col(0) = -u.col(0);
        v.col(0) = -v.col(0);
    } else if (flip_u != flip_v) {
        if (m > k) {
            if (flip_v) {  // move the flip onto U first
                u.col(0) = -u.col(0);
                v.col(0) = -v.col(0);
            }
            u.col(m - 1) = -u.col(m - 1);
        } else if (l > k) {
            if (flip_u) {
                u.col(0) = -u.col(0);
                v.col(0) = -v.col(0);
            }
            v.col(l - 1) = -v.col(l - 1);
        } else {
            throw DomainError("gain chart: square Z with negative determinant");
        }
    }
}

}  // namespace

SpdMatrix StablePairParams::resolved_q() const {
    if (const auto* fixed = std::get_if<FixedQ>(&qmode)) return fixed->q;
    if (const auto* sampled = std::get_if<SampledQ>(&qmode)) return sampled->q;
    const double alpha = std::get<AlphaP>(qmode).alpha;
    if (!(alpha > 0.0)) throw DomainError("StablePairParams: alpha must be positive");
    return SpdMatrix::from_cholesky(std::sqrt(alpha) * p.cholesky());
}

StablePair stable_pair_from_params(const StablePairParams& params) {
    const int n = params.dim();
    if (params.ftil.rows() != n || params.ftil.cols() != n || params.s.dim() != n)
        throw DimensionMismatch("stable_pair_from_params: shape mismatch");
    const SpdMatrix q = params.resolved_q();
    if (q.dim() != n) throw DimensionMismatch("stable_pair_from_params: Q dimension");
    MatrixXd k = q.matrix() + params.ftil.transpose() * params.ftil + params.s.unpack();
    StablePair out;
    out.a = -0.5 * params.p.solve(k);
    out.f = params.p.inverse_cholesky() * params.ftil;
    return out;
}

StablePairParams params_from_stable_pair(const MatrixXd& a, const MatrixXd& f,
                                         const SpdMatrix& q) {
    MatrixXd p_raw = solve_gen_lyapunov(a, f, q);
    SpdMatrix p = [&] {
        try {
            return SpdMatrix::from_matrix(p_raw);
        } catch (const NotPositiveDefinite&) {
            throw UnstablePair("params_from_stable_pair: Lyapunov solution not positive definite");
        }
    }();
    const MatrixXd l_pinv = p.inverse_cholesky();
    MatrixXd ftil = l_pinv.triangularView<Eigen::Lower>().solve(f);
    MatrixXd s_raw = -(2.0 * p.matrix() * a + q.matrix() + ftil.transpose() * ftil);
    MatrixXd sym_part = 0.5 * (s_raw + s_raw.transpose());
    const double scale = std::max(1.0, s_raw.norm());
    if (sym_part.norm() > 1e-8 * scale)
        throw AsymmetryTooLarge("params_from_stable_pair: extracted S not skew-symmetric");
    SkewMatrix s = SkewMatrix::pack(0.5 * (s_raw - s_raw.transpose()));
    return StablePairParams{std::move(p), std::move(ftil), std::move(s), FixedQ{q}};
}

int BrlParams::l() const {
    if (const auto* zf = std::get_if<ZFormGain>(&gain))
        return static_cast<int>(zf->z.cols());
    return static_cast<int>(std::get<SplitGain>(gain).btil.cols());
}

SplitGain BrlParams::resolved_gain() const {
    if (const auto* sg = std::get_if<SplitGain>(&gain)) return *sg;
    const auto& zf = std::get<ZFormGain>(gain);
    const int nn = n();
    const int qq = q_out();
    if (zf.z.rows() != 2 * nn + qq)
        throw DimensionMismatch("BrlParams: Z must have 2n+q rows");
    SplitGain sg;
    sg.btil = gamma * zf.z.topRows(nn);
    sg.d = gamma * zf.z.middleRows(nn, qq);
    sg.gtil = gamma * zf.z.bottomRows(nn);
    return sg;
}

RealizedSsm ssm_from_brl_params(const BrlParams& params) {
    const int n = params.n();
    const int q_out = params.q_out();
    const int l = params.l();
    if (params.q.dim() != n || params.s.dim() != n || params.ftil.rows() != n ||
        params.ftil.cols() != n || params.c.cols() != n)
        throw DimensionMismatch("ssm_from_brl_params: shape mismatch");
    if (!(params.gamma > 0.0))
        throw DomainError("ssm_from_brl_params: gamma must be positive");
    if (params.rho < -1.0 || params.rho > 1.0)
        throw DomainError("ssm_from_brl_params: rho outside [-1,1]");

    const SplitGain g = params.resolved_gain();
    MatrixXd gram = g.btil.transpose() * g.btil + g.d.transpose() * g.d +
                    g.gtil.transpose() * g.gtil;
    if (max_eig_sym(gram - params.gamma * params.gamma * MatrixXd::Identity(l, l)) >= 0.0)
        throw GainConditionViolated(
            "ssm_from_brl_params: Btil^T Btil + D^T D + Gtil^T Gtil < gamma^2 I fails");

    const MatrixXd l_pinv = params.p.inverse_cholesky();
    Ssm s;
    s.n = n;
    s.l = l;
    s.q = q_out;
    s.rho = params.rho;
    MatrixXd k = params.q.matrix() + params.ftil.transpose() * params.ftil +
                 params.c.transpose() * params.c + params.s.unpack();
    s.A = -0.5 * params.p.solve(k);
    s.F = l_pinv * params.ftil;
    s.G = l_pinv * g.gtil;
    s.C = params.c;
    s.D = g.d;
    s.B = params.p.solve(params.q.cholesky() * g.btil -
                         params.rho * params.ftil.transpose() * g.gtil -
                         params.c.transpose() * g.d);
    return RealizedSsm{std::move(s), params.p};
}

BrlParams brl_params_from_ssm(const Ssm& s, const SpdMatrix& p, double gamma) {
    s.check_dims();
    if (p.dim() != s.n) throw DimensionMismatch("brl_params_from_ssm: P dimension");
    if (max_eig_sym(assemble_brl_matrix(s, p, gamma)) >= 0.0)
        throw NotACertificate("brl_params_from_ssm: block matrix not negative definite");

    const MatrixXd& pm = p.matrix();
    MatrixXd q_raw = -(pm * s.A + s.A.transpose() * pm + s.F.transpose() * pm * s.F +
                       s.C.transpose() * s.C);
    SpdMatrix q = [&] {
        try {
            return SpdMatrix::from_matrix(q_raw);
        } catch (const NotPositiveDefinite&) {
            throw NotACertificate("brl_params_from_ssm: recovered Q not positive definite");
        }
    }();

    const MatrixXd l_pinv = p.inverse_cholesky();
    MatrixXd ftil = l_pinv.triangularView<Eigen::Lower>().solve(s.F);
    MatrixXd gtil = l_pinv.triangularView<Eigen::Lower>().solve(s.G);
    MatrixXd btil = q.cholesky().triangularView<Eigen::Lower>().solve(
        pm * s.B + s.rho * ftil.transpose() * gtil + s.C.transpose() * s.D);

    MatrixXd s_raw = -(2.0 * pm * s.A + q.matrix() + ftil.transpose() * ftil +
                       s.C.transpose() * s.C);
    MatrixXd sym_part = 0.5 * (s_raw + s_raw.transpose());
    if (sym_part.norm() > 1e-8 * std::max(1.0, s_raw.norm()))
        throw AsymmetryTooLarge("brl_params_from_ssm: extracted S not skew-symmetric");
    SkewMatrix skew = SkewMatrix::pack(0.5 * (s_raw - s_raw.transpose()));

    BrlParams out{p,
                  std::move(q),
                  std::move(skew),
                  std::move(ftil),
                  s.C,
                  SplitGain{std::move(btil), s.D, std::move(gtil)},
                  gamma,
                  s.rho};
    return out;
}

std::vector<EigResidual> eig_structure_check(const MatrixXd& a, const SpdMatrix& p,
                                             const SpdMatrix& q_resolved,
                                             const MatrixXd& ftil, const SkewMatrix& s) {
    Eigen::EigenSolver<MatrixXd> es(a);
    if (es.info() != Eigen::Success)
        throw NumericalFailure("eig_structure_check: eigensolver failed");
    const MatrixXd real_part = q_resolved.matrix() + ftil.transpose() * ftil;
    const MatrixXd skew = s.unpack();
    std::vector<EigResidual> out;
    out.reserve(a.rows());
    for (int i = 0; i < a.rows(); ++i) {
        const Eigen::VectorXcd v = es.eigenvectors().col(i);
        const std::complex<double> lambda = es.eigenvalues()(i);
        const std::complex<double> vpv = v.dot(p.matrix() * v);  // v^dagger P v, real > 0
        const std::complex<double> num =
            v.dot(real_part * v) + v.dot(skew * v);
        const std::complex<double> r = lambda + 0.5 * num / vpv.real();
        out.push_back({lambda, std::abs(r.real()), std::abs(r.imag())});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Layouts and charts
// ---------------------------------------------------------------------------

const Segment* UnconstrainedLayout::find(SegmentKind kind) const {
    for (const auto& seg : segments)
        if (seg.kind == kind) return &seg;
    return nullptr;
}

Eigen::VectorBlock<const VectorXd> UnconstrainedLayout::view(const VectorXd& coords,
                                                             const Segment& seg) const {
    return coords.segment(seg.offset, seg.size);
}

namespace {

void push(UnconstrainedLayout& layout, SegmentKind kind, std::string name, int size) {
    if (size <= 0) return;
    layout.segments.push_back({kind, std::move(name), layout.total, size});
    layout.total += size;
}

void push_qmode(UnconstrainedLayout& layout, const QModeSpec& qmode, int n) {
    if (std::holds_alternative<WishartQSpec>(qmode)) {
        push(layout, SegmentKind::BartlettLogDiagQ, "q_chol_logdiag", n);
        push(layout, SegmentKind::BartlettOffDiagQ, "q_chol_offdiag", n * (n - 1) / 2);
    } else if (std::holds_alternative<GammaAlphaSpec>(qmode)) {
        push(layout, SegmentKind::LogAlpha, "log_alpha", 1);
    }
}

}  // namespace

UnconstrainedLayout UnconstrainedLayout::for_stable_pair(const WnsConfig& cfg) {
    cfg.validate();
    const int n = cfg.n;
    UnconstrainedLayout layout;
    push(layout, SegmentKind::BartlettLogDiagP, "p_chol_logdiag", n);
    push(layout, SegmentKind::BartlettOffDiagP, "p_chol_offdiag", n * (n - 1) / 2);
    push_qmode(layout, cfg.qmode, n);
    push(layout, SegmentKind::GaussFtil, "ftil", n * n);
    push(layout, SegmentKind::GaussSkew, "s", n * (n - 1) / 2);
    return layout;
}

UnconstrainedLayout UnconstrainedLayout::for_brl(const WnsBrlConfig& cfg,
                                                 const HyperPriors& hyper) {
    cfg.validate();
    if (!std::holds_alternative<CayleyOrthSpec>(cfg.orth))
        throw UnsupportedFamily("unconstrained chart requires the Cayley orthogonal family");
    if (!std::holds_alternative<ZBallGainSpec>(cfg.gain))
        throw UnsupportedFamily("unconstrained chart requires the spectral-ball gain block");
    const int n = cfg.base.n;
    const int m = cfg.zdim();
    UnconstrainedLayout layout;
    push(layout, SegmentKind::BartlettLogDiagP, "p_chol_logdiag", n);
    push(layout, SegmentKind::BartlettOffDiagP, "p_chol_offdiag", n * (n - 1) / 2);
    push_qmode(layout, cfg.base.qmode, n);
    push(layout, SegmentKind::GaussFtil, "ftil", n * n);
    push(layout, SegmentKind::GaussSkew, "s", n * (n - 1) / 2);
    push(layout, SegmentKind::GaussC, "c", cfg.q * n);
    push(layout, SegmentKind::CayleySkewU, "su", m * (m - 1) / 2);
    push(layout, SegmentKind::CayleySkewV, "sv", cfg.l * (cfg.l - 1) / 2);
    push(layout, SegmentKind::SigmaLogit, "sigma_logit", cfg.zrank() - 1);
    if (hyper.infer_rho) push(layout, SegmentKind::RhoLogit, "rho_logit", 1);
    if (hyper.infer_gamma) push(layout, SegmentKind::LogGamma, "log_gamma", 1);
    return layout;
}

namespace {

void write_qmode_coords(const QMode& qmode, const QModeSpec& spec, VectorXd& out, int& pos) {
    if (const auto* wq = std::get_if<WishartQSpec>(&spec)) {
        const auto* sampled = std::get_if<SampledQ>(&qmode);
        const auto* fixed = std::get_if<FixedQ>(&qmode);
        if (!sampled && !fixed)
            throw DomainError("to_unconstrained: Q mode does not match config");
        const SpdMatrix& q = sampled ? sampled->q : fixed->q;
        pack_chol(q.cholesky(), wq->sigma.cholesky(), out, pos);
    } else if (std::holds_alternative<GammaAlphaSpec>(spec)) {
        const auto* ap = std::get_if<AlphaP>(&qmode);
        if (!ap) throw DomainError("to_unconstrained: expected alpha-P mode");
        if (!(ap->alpha > 0.0)) throw DomainError("to_unconstrained: alpha must be positive");
        out(pos++) = std::log(ap->alpha);
    }
}

QMode read_qmode_coords(const VectorXd& coords, int& pos, const QModeSpec& spec, int n) {
    if (const auto* wq = std::get_if<WishartQSpec>(&spec)) {
        MatrixXd lq = unpack_chol(coords, pos, n, wq->sigma.cholesky());
        return SampledQ{SpdMatrix::from_cholesky(lq)};
    }
    if (std::holds_alternative<GammaAlphaSpec>(spec)) {
        return AlphaP{std::exp(coords(pos++))};
    }
    return FixedQ{std::get<FixedQSpec>(spec).q};
}

}  // namespace

UnconstrainedVector to_unconstrained(const StablePairParams& params, const WnsConfig& cfg) {
    UnconstrainedLayout layout = UnconstrainedLayout::for_stable_pair(cfg);
    const int n = cfg.n;
    if (params.dim() != n) throw DimensionMismatch("to_unconstrained: dimension mismatch");
    VectorXd out(layout.total);
    int pos = 0;
    pack_chol(params.p.inverse_cholesky(), cfg.sigma_p.cholesky(), out, pos);
    write_qmode_coords(params.qmode, cfg.qmode, out, pos);
    out.segment(pos, n * n) = vec(params.ftil);
    pos += n * n;
    out.segment(pos, params.s.packed().size()) = params.s.packed();
    pos += static_cast<int>(params.s.packed().size());
    return {std::move(out), std::move(layout)};
}

StablePairParams stable_pair_from_unconstrained(const UnconstrainedVector& v,
                                                const WnsConfig& cfg) {
    const int n = cfg.n;
    if (!v.coords.allFinite())
        throw DomainError("from_unconstrained: non-finite coordinates");
    int pos = 0;
    MatrixXd l_pinv = unpack_chol(v.coords, pos, n, cfg.sigma_p.cholesky());
    SpdMatrix p = SpdMatrix::from_inverse_cholesky(l_pinv);
    QMode qmode = read_qmode_coords(v.coords, pos, cfg.qmode, n);
    MatrixXd ftil = unvec(v.coords.segment(pos, n * n), n, n);
    pos += n * n;
    const int sk = SkewMatrix::packed_size(n);
    SkewMatrix s(n, v.coords.segment(pos, sk));
    return StablePairParams{std::move(p), std::move(ftil), std::move(s), std::move(qmode)};
}

UnconstrainedVector to_unconstrained(const BrlParams& params, const WnsBrlConfig& cfg,
                                     const HyperPriors& hyper) {
    UnconstrainedLayout layout = UnconstrainedLayout::for_brl(cfg, hyper);
    const auto& orth = std::get<CayleyOrthSpec>(cfg.orth);
    (void)orth;
    const int n = cfg.base.n;
    if (params.n() != n || params.q_out() != cfg.q || params.l() != cfg.l)
        throw DimensionMismatch("to_unconstrained: dimension mismatch");

    const auto* zf = std::get_if<ZFormGain>(&params.gain);
    if (!zf) throw UnsupportedFamily("to_unconstrained: gain block must be in Z form");
    MatrixXd u, vmat;
    VectorXd sigma;
    if (zf->u && zf->v && zf->sigma) {
        u = *zf->u;
        vmat = *zf->v;
        sigma = *zf->sigma;
    } else {
        reconstruct_gain_svd(zf->z, cfg.epsilon, u, vmat, sigma);
    }

    VectorXd out(layout.total);
    int pos = 0;
    pack_chol(params.p.inverse_cholesky(), cfg.base.sigma_p.cholesky(), out, pos);
    if (std::holds_alternative<WishartQSpec>(cfg.base.qmode)) {
        write_qmode_coords(QMode{SampledQ{params.q}}, cfg.base.qmode, out, pos);
    } else if (std::holds_alternative<GammaAlphaSpec>(cfg.base.qmode)) {
        // Q = alpha P exactly in this mode, so alpha = tr(P^{-1} Q) / n.
        const double alpha = params.p.solve(params.q.matrix()).trace() / n;
        write_qmode_coords(QMode{AlphaP{alpha}}, cfg.base.qmode, out, pos);
    }
    out.segment(pos, n * n) = vec(params.ftil);
    pos += n * n;
    const int sk = SkewMatrix::packed_size(n);
    out.segment(pos, sk) = params.s.packed();
    pos += sk;
    out.segment(pos, cfg.q * n) = vec(params.c);
    pos += cfg.q * n;

    const SkewMatrix su = cayley_inverse(u);
    out.segment(pos, su.packed().size()) = su.packed();
    pos += static_cast<int>(su.packed().size());
    if (cfg.l > 1) {
        const SkewMatrix sv = cayley_inverse(vmat);
        out.segment(pos, sv.packed().size()) = sv.packed();
        pos += static_cast<int>(sv.packed().size());
    }
    const double cap = 1.0 - cfg.epsilon;
    for (int i = 1; i < cfg.zrank(); ++i) out(pos++) = logit(sigma(i) / cap);
    if (hyper.infer_rho)
        out(pos++) = logit((params.rho - hyper.rho_lo) / (hyper.rho_hi - hyper.rho_lo));
    if (hyper.infer_gamma) {
        if (!(params.gamma > 0.0)) throw DomainError("to_unconstrained: gamma <= 0");
        out(pos++) = std::log(params.gamma);
    }
    return {std::move(out), std::move(layout)};
}

BrlParams brl_from_unconstrained(const UnconstrainedVector& v, const WnsBrlConfig& cfg,
                                 const HyperPriors& hyper) {
    return brl_from_unconstrained(v.coords, cfg, hyper);
}

BrlParams brl_from_unconstrained(const VectorXd& coords, const WnsBrlConfig& cfg,
                                 const HyperPriors& hyper) {
    if (!coords.allFinite())
        throw DomainError("from_unconstrained: non-finite coordinates");
    if (!std::holds_alternative<CayleyOrthSpec>(cfg.orth) ||
        !std::holds_alternative<ZBallGainSpec>(cfg.gain))
        throw UnsupportedFamily("unconstrained chart requires Cayley + spectral-ball family");
    const int n = cfg.base.n;
    const int m = cfg.zdim();
    const int k = cfg.zrank();

    int pos = 0;
    MatrixXd l_pinv = unpack_chol(coords, pos, n, cfg.base.sigma_p.cholesky());
    SpdMatrix p = SpdMatrix::from_inverse_cholesky(l_pinv);
    QMode qmode = read_qmode_coords(coords, pos, cfg.base.qmode, n);
    SpdMatrix q = [&]() -> SpdMatrix {
        if (const auto* sq = std::get_if<SampledQ>(&qmode)) return sq->q;
        if (const auto* fq = std::get_if<FixedQ>(&qmode)) return fq->q;
        const double alpha = std::get<AlphaP>(qmode).alpha;
        return SpdMatrix::from_cholesky(std::sqrt(alpha) * p.cholesky());
    }();
    MatrixXd ftil = unvec(coords.segment(pos, n * n), n, n);
    pos += n * n;
    const int sk = SkewMatrix::packed_size(n);
    SkewMatrix s(n, coords.segment(pos, sk));
    pos += sk;
    MatrixXd c = unvec(coords.segment(pos, cfg.q * n), cfg.q, n);
    pos += cfg.q * n;

    const int su_sz = SkewMatrix::packed_size(m);
    SkewMatrix su(m, coords.segment(pos, su_sz));
    pos += su_sz;
    MatrixXd u = cayley(su).matrix();
    MatrixXd vmat = MatrixXd::Identity(cfg.l, cfg.l);
    if (cfg.l > 1) {
        const int sv_sz = SkewMatrix::packed_size(cfg.l);
        SkewMatrix sv(cfg.l, coords.segment(pos, sv_sz));
        pos += sv_sz;
        vmat = cayley(sv).matrix();
    }
    const double cap = 1.0 - cfg.epsilon;
    VectorXd sigma(k);
    sigma(0) = cap;
    for (int i = 1; i < k; ++i) sigma(i) = cap * sigmoid(coords(pos++));
    MatrixXd z = u * rect_diag(m, cfg.l, sigma) * vmat.transpose();

    double rho = cfg.rho;
    if (hyper.infer_rho)
        rho = hyper.rho_lo + (hyper.rho_hi - hyper.rho_lo) * sigmoid(coords(pos++));
    double gamma = cfg.gamma;
    if (hyper.infer_gamma) gamma = std::exp(coords(pos++));

    ZFormGain gain{std::move(z), std::move(u), std::move(vmat), std::move(sigma)};
    return BrlParams{std::move(p), std::move(q),    std::move(s), std::move(ftil),
                     std::move(c), std::move(gain), gamma,        rho};
}

}  // namespace stabssm
