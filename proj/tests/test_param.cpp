#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stabssm/param.hpp"
#include "stabssm/priors.hpp"
#include "test_configs.hpp"

using namespace stabssm;

namespace {

StablePairParams scalar_params(double p, double q, double ftil, double alpha = -1.0) {
    MatrixXd fm(1, 1);
    fm << ftil;
    QMode qmode = alpha > 0.0 ? QMode{AlphaP{alpha}}
                              : QMode{FixedQ{SpdMatrix::scaled_identity(1, q)}};
    return StablePairParams{SpdMatrix::scaled_identity(1, p), fm, SkewMatrix(1), qmode};
}

}  // namespace

TEST_CASE("stable pair forward map: scalar example") {
    const auto pair = stable_pair_from_params(scalar_params(2.0, 1.0, 1.0));
    CHECK(pair.a(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(pair.f(0, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    // residual of the certificate equation: 2AP + F^2 P = -Q
    const double resid = 2.0 * pair.a(0, 0) * 2.0 + pair.f(0, 0) * pair.f(0, 0) * 2.0 + 1.0;
    CHECK(std::abs(resid) < 1e-12);
}

TEST_CASE("stable pair forward map: identity case") {
    StablePairParams params{SpdMatrix::identity(2), MatrixXd::Zero(2, 2), SkewMatrix(2),
                            FixedQ{SpdMatrix::scaled_identity(2, 2.0)}};
    const auto pair = stable_pair_from_params(params);
    CHECK((pair.a + MatrixXd::Identity(2, 2)).norm() < 1e-12);
    CHECK(pair.f.norm() == 0.0);
}

TEST_CASE("stable pair forward map: random parameters are stable") {
    RngStream rng(21, 0);
    for (auto qkind : {testcfg::QKind::Fixed, testcfg::QKind::Wishart, testcfg::QKind::Alpha}) {
        const WnsConfig cfg = testcfg::wns(3, qkind);
        for (int rep = 0; rep < 50; ++rep) {
            const WnsSample s = sample_wns(cfg, rng);
            CHECK(is_mean_square_stable(s.a, s.f).stable);
            const SpdMatrix q = s.params.resolved_q();
            CHECK(lyapunov_residual(s.a, s.f, s.params.p.matrix(), q.matrix()).norm() <=
                  1e-9 * q.matrix().norm());
        }
    }
}

TEST_CASE("stable pair inverse map") {
    SUBCASE("identity case") {
        const auto params = params_from_stable_pair(-MatrixXd::Identity(2, 2),
                                                    MatrixXd::Zero(2, 2),
                                                    SpdMatrix::scaled_identity(2, 2.0));
        CHECK((params.p.matrix() - MatrixXd::Identity(2, 2)).norm() < 1e-12);
        CHECK(params.ftil.norm() < 1e-12);
        CHECK(params.s.packed().norm() < 1e-12);
    }
    SUBCASE("scalar inverse") {
        MatrixXd a(1, 1), f(1, 1);
        a << -0.5;
        f << std::sqrt(0.5);
        const auto params = params_from_stable_pair(a, f, SpdMatrix::identity(1));
        CHECK(params.p.matrix()(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(params.ftil(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("round trip on rejection-sampled stable pairs") {
        RngStream rng(22, 0);
        for (int rep = 0; rep < 50; ++rep) {
            const int n = 1 + static_cast<int>(rng.uniform() * 4);
            MatrixXd a, f;
            oracles::random_stable_pair(n, rng, a, f);
            const auto params = params_from_stable_pair(a, f, SpdMatrix::identity(n));
            const auto pair = stable_pair_from_params(params);
            CHECK((pair.a - a).cwiseAbs().maxCoeff() < 1e-8);
            CHECK((pair.f - f).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
    SUBCASE("unstable pair is rejected") {
        MatrixXd a(1, 1), f(1, 1);
        a << 1.0;
        f << 0.0;
        CHECK_THROWS_AS(params_from_stable_pair(a, f, SpdMatrix::identity(1)), UnstablePair);
    }
}

TEST_CASE("eigenvalue structure residuals") {
    SUBCASE("pure real spectrum") {
        StablePairParams params{SpdMatrix::identity(2), MatrixXd::Zero(2, 2), SkewMatrix(2),
                                FixedQ{SpdMatrix::scaled_identity(2, 2.0)}};
        const auto pair = stable_pair_from_params(params);
        const auto res = eig_structure_check(pair.a, params.p, params.resolved_q(),
                                             params.ftil, params.s);
        for (const auto& r : res) {
            CHECK(r.lambda.real() == doctest::Approx(-1.0).epsilon(1e-12));
            CHECK(r.residual_re < 1e-12);
            CHECK(r.residual_im < 1e-12);
        }
    }
    SUBCASE("skew part sets the imaginary parts") {
        VectorXd packed(1);
        packed << 0.8;
        StablePairParams params{SpdMatrix::identity(2), MatrixXd::Zero(2, 2),
                                SkewMatrix(2, packed), FixedQ{SpdMatrix::identity(2)}};
        const auto pair = stable_pair_from_params(params);
        const auto res = eig_structure_check(pair.a, params.p, params.resolved_q(),
                                             params.ftil, params.s);
        for (const auto& r : res) {
            CHECK(std::abs(r.lambda.imag()) > 0.1);
            CHECK(r.residual_re < 1e-10);
            CHECK(r.residual_im < 1e-10);
        }
    }
    SUBCASE("random sample at n = 4") {
        RngStream rng(23, 0);
        const WnsConfig cfg = testcfg::wns(4, testcfg::QKind::Fixed);
        const WnsSample s = sample_wns(cfg, rng);
        const auto res = eig_structure_check(s.a, s.params.p, s.params.resolved_q(),
                                             s.params.ftil, s.params.s);
        for (const auto& r : res) {
            CHECK(r.residual_re < 1e-8);
            CHECK(r.residual_im < 1e-8);
        }
    }
}

TEST_CASE("BRL matrix assembly") {
    SUBCASE("zero model") {
        const Ssm s = Ssm::zero(2, 3, 1);
        const MatrixXd m = assemble_brl_matrix(s, SpdMatrix::identity(2), 1.0);
        MatrixXd expect = MatrixXd::Zero(5, 5);
        expect.bottomRightCorner(3, 3) = -MatrixXd::Identity(3, 3);
        CHECK((m - expect).norm() == 0.0);
    }
    SUBCASE("scalar drift only") {
        Ssm s = Ssm::zero(1, 1, 1);
        s.A(0, 0) = -1.0;
        const MatrixXd m = assemble_brl_matrix(s, SpdMatrix::identity(1), 1.0);
        CHECK(m(0, 0) == doctest::Approx(-2.0));
        CHECK(m(1, 1) == doctest::Approx(-1.0));
        CHECK(m(0, 1) == 0.0);
    }
}

TEST_CASE("BRL forward map") {
    SUBCASE("scalar all-zero gain") {
        BrlParams params{SpdMatrix::identity(1),
                         SpdMatrix::identity(1),
                         SkewMatrix(1),
                         MatrixXd::Zero(1, 1),
                         MatrixXd::Zero(1, 1),
                         SplitGain{MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 1),
                                   MatrixXd::Zero(1, 1)},
                         1.0,
                         0.0};
        const RealizedSsm r = ssm_from_brl_params(params);
        CHECK(r.ssm.A(0, 0) == doctest::Approx(-0.5));
        CHECK(r.ssm.B.norm() == 0.0);
        CHECK(r.ssm.F.norm() == 0.0);
        CHECK(r.ssm.G.norm() == 0.0);
        const MatrixXd m = assemble_brl_matrix(r.ssm, r.certificate, params.gamma);
        CHECK(m(0, 0) == doctest::Approx(-1.0));
        CHECK(m(1, 1) == doctest::Approx(-1.0));
        CHECK(max_eig_sym(m) < 0.0);
    }
    SUBCASE("zero gain and zero C reduces to the stable-pair map") {
        RngStream rng(24, 0);
        const WnsConfig wcfg = testcfg::wns(3, testcfg::QKind::Fixed);
        const StablePairParams base = sample_wns_params(wcfg, rng);
        BrlParams params{base.p,
                         base.resolved_q(),
                         base.s,
                         base.ftil,
                         MatrixXd::Zero(1, 3),
                         SplitGain{MatrixXd::Zero(3, 2), MatrixXd::Zero(1, 2),
                                   MatrixXd::Zero(3, 2)},
                         3.0,
                         0.3};
        const RealizedSsm r = ssm_from_brl_params(params);
        const StablePair pair = stable_pair_from_params(base);
        CHECK((r.ssm.A - pair.a).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((r.ssm.F - pair.f).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(r.ssm.B.norm() == 0.0);
        CHECK(r.ssm.G.norm() == 0.0);
        CHECK(r.ssm.D.norm() == 0.0);
    }
    SUBCASE("experiment-shaped sample satisfies the certificate") {
        RngStream rng(25, 0);
        const auto cfg = testcfg::brl(4, 2, 1, testcfg::QKind::Wishart,
                                      testcfg::OrthKind::Cayley);
        const WnsBrlSample s = sample_wns_brl(cfg, rng);
        CHECK(s.ssm.n == 4);
        CHECK(s.ssm.l == 2);
        CHECK(s.ssm.q == 1);
        CHECK(max_eig_sym(assemble_brl_matrix(s.ssm, s.certificate, 3.0)) < 0.0);
    }
    SUBCASE("gain condition violation") {
        MatrixXd big = MatrixXd::Identity(1, 1) * 2.0;
        BrlParams params{SpdMatrix::identity(1),
                         SpdMatrix::identity(1),
                         SkewMatrix(1),
                         MatrixXd::Zero(1, 1),
                         MatrixXd::Zero(1, 1),
                         SplitGain{big, MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 1)},
                         1.0,
                         0.0};
        CHECK_THROWS_AS(ssm_from_brl_params(params), GainConditionViolated);
    }
}

TEST_CASE("BRL inverse map") {
    SUBCASE("scalar inverse recovers the zeros") {
        Ssm s = Ssm::zero(1, 1, 1);
        s.A(0, 0) = -0.5;
        const BrlParams params = brl_params_from_ssm(s, SpdMatrix::identity(1), 1.0);
        CHECK(params.q.matrix()(0, 0) == doctest::Approx(1.0));
        CHECK(params.ftil.norm() < 1e-12);
        const SplitGain g = params.resolved_gain();
        CHECK(g.btil.norm() < 1e-12);
        CHECK(g.d.norm() < 1e-12);
        CHECK(g.gtil.norm() < 1e-12);
    }
    SUBCASE("round trip through sampled models") {
        RngStream rng(26, 0);
        for (auto qkind : {testcfg::QKind::Fixed, testcfg::QKind::Wishart}) {
            const auto cfg = testcfg::brl(3, 2, 1, qkind, testcfg::OrthKind::Acg);
            for (int rep = 0; rep < 25; ++rep) {
                const WnsBrlSample s = sample_wns_brl(cfg, rng);
                const BrlParams rec = brl_params_from_ssm(s.ssm, s.certificate, cfg.gamma);
                const RealizedSsm back = ssm_from_brl_params(rec);
                CHECK((back.ssm.A - s.ssm.A).cwiseAbs().maxCoeff() < 1e-8);
                CHECK((back.ssm.B - s.ssm.B).cwiseAbs().maxCoeff() < 1e-8);
                CHECK((back.ssm.C - s.ssm.C).cwiseAbs().maxCoeff() < 1e-8);
                CHECK((back.ssm.D - s.ssm.D).cwiseAbs().maxCoeff() < 1e-8);
                CHECK((back.ssm.F - s.ssm.F).cwiseAbs().maxCoeff() < 1e-8);
                CHECK((back.ssm.G - s.ssm.G).cwiseAbs().maxCoeff() < 1e-8);
            }
        }
    }
    SUBCASE("params -> model -> params round trip") {
        RngStream rng(27, 0);
        const auto cfg = testcfg::brl(3, 2, 1, testcfg::QKind::Wishart,
                                      testcfg::OrthKind::Cayley);
        for (int rep = 0; rep < 25; ++rep) {
            const WnsBrlSample s = sample_wns_brl(cfg, rng);
            const BrlParams rec = brl_params_from_ssm(s.ssm, s.certificate, cfg.gamma);
            CHECK((rec.p.matrix() - s.params.p.matrix()).cwiseAbs().maxCoeff() < 1e-8);
            CHECK((rec.q.matrix() - s.params.q.matrix()).cwiseAbs().maxCoeff() < 1e-8);
            CHECK((rec.ftil - s.params.ftil).cwiseAbs().maxCoeff() < 1e-8);
            CHECK((rec.s.packed() - s.params.s.packed()).cwiseAbs().maxCoeff() < 1e-8);
            const SplitGain expect = s.params.resolved_gain();
            const SplitGain got = rec.resolved_gain();
            CHECK((got.btil - expect.btil).cwiseAbs().maxCoeff() < 1e-8);
            CHECK((got.d - expect.d).cwiseAbs().maxCoeff() < 1e-8);
            CHECK((got.gtil - expect.gtil).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
    SUBCASE("halving gamma below the realized gain invalidates the certificate") {
        RngStream rng(28, 0);
        const auto cfg = testcfg::brl(3, 2, 1, testcfg::QKind::Fixed,
                                      testcfg::OrthKind::Cayley);
        const WnsBrlSample s = sample_wns_brl(cfg, rng);
        CHECK_THROWS_AS(brl_params_from_ssm(s.ssm, s.certificate, cfg.gamma / 2.0),
                        NotACertificate);
    }
    SUBCASE("cross-check of the mixed term: F^T P G = Ftil^T Gtil") {
        RngStream rng(29, 0);
        const auto cfg = testcfg::brl(3, 2, 1, testcfg::QKind::Wishart,
                                      testcfg::OrthKind::Acg);
        for (int rep = 0; rep < 10; ++rep) {
            const WnsBrlSample s = sample_wns_brl(cfg, rng);
            const SplitGain g = s.params.resolved_gain();
            const MatrixXd lhs =
                s.ssm.F.transpose() * s.certificate.matrix() * s.ssm.G;
            const MatrixXd rhs = s.params.ftil.transpose() * g.gtil;
            CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("unconstrained chart: stable pair") {
    RngStream rng(30, 0);
    for (auto qkind : {testcfg::QKind::Fixed, testcfg::QKind::Wishart, testcfg::QKind::Alpha}) {
        const WnsConfig cfg = testcfg::wns(3, qkind);
        for (int rep = 0; rep < 10; ++rep) {
            const StablePairParams params = sample_wns_params(cfg, rng);
            const UnconstrainedVector v = to_unconstrained(params, cfg);
            const StablePairParams back = stable_pair_from_unconstrained(v, cfg);
            CHECK((back.p.matrix() - params.p.matrix()).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((back.ftil - params.ftil).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((back.s.packed() - params.s.packed()).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((back.resolved_q().matrix() - params.resolved_q().matrix())
                      .cwiseAbs()
                      .maxCoeff() < 1e-10);
            // coords -> params -> coords closes as well
            const UnconstrainedVector v2 = to_unconstrained(back, cfg);
            CHECK((v2.coords - v.coords).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("unconstrained chart: full model") {
    RngStream rng(31, 0);
    const HyperPriors hyper;
    for (auto qkind : {testcfg::QKind::Fixed, testcfg::QKind::Wishart, testcfg::QKind::Alpha}) {
        const auto cfg = testcfg::brl(3, 2, 1, qkind, testcfg::OrthKind::Cayley,
                                      testcfg::GainKind::ZBall, /*random_signs=*/false);
        for (int rep = 0; rep < 10; ++rep) {
            const WnsBrlSample s = sample_wns_brl(cfg, rng);
            const UnconstrainedVector v = to_unconstrained(s.params, cfg, hyper);
            const BrlParams back = brl_from_unconstrained(v, cfg, hyper);
            CHECK((back.p.matrix() - s.params.p.matrix()).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((back.q.matrix() - s.params.q.matrix()).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((back.ftil - s.params.ftil).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((back.c - s.params.c).cwiseAbs().maxCoeff() < 1e-10);
            const auto& z0 = std::get<ZFormGain>(s.params.gain).z;
            const auto& z1 = std::get<ZFormGain>(back.gain).z;
            CHECK((z1 - z0).cwiseAbs().maxCoeff() < 1e-10);
            CHECK(back.rho == doctest::Approx(s.params.rho).epsilon(1e-10));
            CHECK(back.gamma == doctest::Approx(s.params.gamma).epsilon(1e-10));
        }
    }
    SUBCASE("transform-neutral scalars") {
        const auto cfg = testcfg::brl(2, 1, 1, testcfg::QKind::Fixed,
                                      testcfg::OrthKind::Cayley, testcfg::GainKind::ZBall,
                                      false);
        RngStream r2(32, 0);
        WnsBrlSample s = sample_wns_brl(cfg, r2);
        s.params.rho = 0.0;
        s.params.gamma = 1.0;
        const UnconstrainedVector v = to_unconstrained(s.params, cfg, hyper);
        const auto* rho_seg = v.layout.find(SegmentKind::RhoLogit);
        const auto* gamma_seg = v.layout.find(SegmentKind::LogGamma);
        REQUIRE(rho_seg != nullptr);
        REQUIRE(gamma_seg != nullptr);
        CHECK(std::abs(v.coords(rho_seg->offset)) < 1e-12);
        CHECK(std::abs(v.coords(gamma_seg->offset)) < 1e-12);
    }
    SUBCASE("non-finite coordinates are rejected") {
        const auto cfg = testcfg::brl(2, 1, 1, testcfg::QKind::Fixed,
                                      testcfg::OrthKind::Cayley, testcfg::GainKind::ZBall,
                                      false);
        const UnconstrainedLayout layout = UnconstrainedLayout::for_brl(cfg, hyper);
        VectorXd bad = VectorXd::Zero(layout.total);
        bad(0) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(brl_from_unconstrained(bad, cfg, hyper), DomainError);
    }
    SUBCASE("ACG family has no chart") {
        const auto cfg = testcfg::brl(2, 1, 1, testcfg::QKind::Fixed, testcfg::OrthKind::Acg);
        CHECK_THROWS_AS(UnconstrainedLayout::for_brl(cfg, HyperPriors{}), UnsupportedFamily);
    }
}
