#pragma once

// Shared construction of distribution configs for tests, shaped like the
// experiment settings (Sigma_p = I, Sigma_q = 2I, k_p = 6, k_q = 6,
// Sigma_s = 0.01 I, Sigma_f = 2I, Sigma_c = 2I, eps = 1e-4, rho = 0.3,
// gamma = 3).

#include "stabssm/config.hpp"

namespace testcfg {

using namespace stabssm;

enum class QKind { Fixed, Wishart, Alpha };
enum class OrthKind { Acg, Cayley };
enum class GainKind { ZBall, Dirichlet };

inline WnsConfig wns(int n, QKind qkind, double k_p = 6.0) {
    WnsConfig cfg;
    cfg.n = n;
    cfg.k_p = k_p;
    cfg.sigma_p = SpdMatrix::identity(n);
    switch (qkind) {
        case QKind::Fixed:
            cfg.qmode = FixedQSpec{SpdMatrix::identity(n)};
            break;
        case QKind::Wishart:
            cfg.qmode = WishartQSpec{6.0, SpdMatrix::scaled_identity(n, 2.0)};
            break;
        case QKind::Alpha:
            cfg.qmode = GammaAlphaSpec{2.0, 0.5};
            break;
    }
    cfg.ftil = GaussianBlock::isotropic(n * n, 2.0);
    cfg.skew = GaussianBlock::isotropic(n * (n - 1) / 2, 0.01);
    return cfg;
}

inline WnsBrlConfig brl(int n, int l, int q, QKind qkind, OrthKind orth,
                        GainKind gain = GainKind::ZBall, bool random_signs = true) {
    WnsBrlConfig cfg;
    cfg.base = wns(n, qkind);
    cfg.l = l;
    cfg.q = q;
    cfg.c = GaussianBlock::isotropic(q * n, 2.0);
    cfg.gamma = 3.0;
    cfg.rho = 0.3;
    cfg.epsilon = 1e-4;
    const int m = 2 * n + q;
    if (orth == OrthKind::Acg) {
        cfg.orth = AcgOrthSpec{SpdMatrix::identity(m), SpdMatrix::identity(l)};
    } else {
        CayleyOrthSpec spec;
        spec.su = GaussianBlock::isotropic(m * (m - 1) / 2, 1.0);
        spec.sv = GaussianBlock::isotropic(l * (l - 1) / 2, 1.0);
        spec.random_signs = random_signs;
        cfg.orth = spec;
    }
    if (gain == GainKind::Dirichlet)
        cfg.gain = DirichletGainSpec{1.0, 1.0, 1.0};
    else
        cfg.gain = ZBallGainSpec{};
    return cfg;
}

}  // namespace testcfg
