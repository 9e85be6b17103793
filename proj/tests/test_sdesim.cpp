#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stabssm/priors.hpp"
#include "stabssm/sdesim.hpp"
#include "test_configs.hpp"

using namespace stabssm;

namespace {

Ssm scalar_model(double a, double f, double rho = 0.0) {
    Ssm s = Ssm::zero(1, 1, 1);
    s.A(0, 0) = a;
    s.F(0, 0) = f;
    s.C(0, 0) = 1.0;
    s.rho = rho;
    return s;
}

}  // namespace

TEST_CASE("wiener increments: correlation structure") {
    SUBCASE("rho = 1 duplicates the first component") {
        RngStream rng(61, 0);
        const MatrixXd inc = wiener_increments(1.0, 0.01, 1000, rng);
        CHECK((inc.row(0) - inc.row(1)).norm() == 0.0);
    }
    SUBCASE("rho = 0 is uncorrelated") {
        RngStream rng(61, 1);
        const MatrixXd inc = wiener_increments(0.0, 1.0, 1000000, rng);
        const double r = (inc.row(0).dot(inc.row(1)) / inc.cols());
        CHECK(std::abs(r) < 0.01);
    }
    SUBCASE("empirical covariance at rho = 0.3, dt = 0.01") {
        RngStream rng(61, 2);
        const double dt = 0.01;
        const MatrixXd inc = wiener_increments(0.3, dt, 1000000, rng);
        const double c11 = inc.row(0).squaredNorm() / inc.cols();
        const double c22 = inc.row(1).squaredNorm() / inc.cols();
        const double c12 = inc.row(0).dot(inc.row(1)) / inc.cols();
        CHECK(std::abs(c11 - dt) < 0.01 * dt);
        CHECK(std::abs(c22 - dt) < 0.01 * dt);
        CHECK(std::abs(c12 - 0.3 * dt) < 0.01 * dt);
    }
}

TEST_CASE("Euler-Maruyama") {
    SUBCASE("deterministic linear system matches the matrix exponential") {
        Ssm s = Ssm::zero(2, 1, 1);
        s.A = -MatrixXd::Identity(2, 2);
        s.C = MatrixXd::Ones(1, 2);
        VectorXd x0(2);
        x0 << 1.0, -2.0;
        const TimeGrid grid(0.0, 1.0, 1e-3);
        RngStream rng(62, 0);
        const PathResult path = euler_maruyama(s, x0, InputSignal::zero(1), grid, rng);
        double max_err = 0.0;
        for (int k = 0; k < grid.size(); ++k) {
            const VectorXd expect = oracles::expm(s.A * grid.time(k)) * x0;
            max_err = std::max(max_err, (path.states.col(k) - expect).norm());
        }
        CHECK(max_err < 5.0 * grid.dt * x0.norm());
    }
    SUBCASE("zero initial state and zero input stay at zero") {
        Ssm s = scalar_model(-1.0, 1.0);
        const TimeGrid grid(0.0, 0.5, 1e-3);
        RngStream rng(62, 1);
        const PathResult path =
            euler_maruyama(s, VectorXd::Zero(1), InputSignal::zero(1), grid, rng);
        CHECK(path.states.norm() == 0.0);
        CHECK(path.outputs.norm() == 0.0);
    }
    SUBCASE("scalar second moment matches the closed form") {
        // dE[x^2]/dt = (2A + F^2) E[x^2] = -E[x^2]
        Ssm s = scalar_model(-1.0, 1.0);
        const TimeGrid grid(0.0, 1.0, 1e-3);
        VectorXd x0(1);
        x0 << 1.0;
        std::vector<double> endsq;
        RngStream rng(62, 2);
        for (int p = 0; p < 100000; ++p) {
            RngStream prng = rng.substream(p);
            const PathResult path = euler_maruyama(s, x0, InputSignal::zero(1), grid, prng);
            const double v = path.states(0, grid.size() - 1);
            endsq.push_back(v * v);
        }
        const auto ms = oracles::mean_se(endsq);
        CHECK(std::abs(ms.mean - std::exp(-1.0)) < 3.0 * ms.se + 2e-3);
    }
    SUBCASE("non-finite states are reported") {
        Ssm s = scalar_model(60.0, 0.0);  // violently unstable under dt = 0.5
        const TimeGrid grid(0.0, 400.0, 0.5);
        RngStream rng(62, 3);
        VectorXd x0(1);
        x0 << 1.0;
        CHECK_THROWS_AS(euler_maruyama(s, x0, InputSignal::zero(1), grid, rng),
                        NonFiniteState);
    }
    SUBCASE("strong error shrinks with the step size") {
        Ssm s = scalar_model(-1.0, 0.8);
        VectorXd x0(1);
        x0 << 1.0;
        const double t1 = 1.0;
        const double dt_fine = 1.0 / 4096.0;
        RngStream rng(62, 4);
        double err_coarse = 0.0, err_half = 0.0;
        const int n_paths = 400;
        for (int p = 0; p < n_paths; ++p) {
            RngStream prng = rng.substream(p);
            const MatrixXd fine =
                wiener_increments(0.0, dt_fine, static_cast<int>(t1 / dt_fine), prng);
            // aggregate the same Brownian path onto coarser grids (16x, 8x)
            const auto aggregate = [&](int factor) {
                MatrixXd coarse(2, fine.cols() / factor);
                for (int k = 0; k < coarse.cols(); ++k) {
                    coarse.col(k) =
                        fine.middleCols(k * factor, factor).rowwise().sum();
                }
                return coarse;
            };
            const TimeGrid g16(0.0, t1, 16 * dt_fine);
            const TimeGrid g8(0.0, t1, 8 * dt_fine);
            const TimeGrid gf(0.0, t1, dt_fine);
            const auto u = InputSignal::zero(1);
            const double ref =
                euler_maruyama_with_increments(s, x0, u, gf, fine).states(0, gf.size() - 1);
            const double c16 = euler_maruyama_with_increments(s, x0, u, g16, aggregate(16))
                                   .states(0, g16.size() - 1);
            const double c8 = euler_maruyama_with_increments(s, x0, u, g8, aggregate(8))
                                  .states(0, g8.size() - 1);
            err_coarse += (c16 - ref) * (c16 - ref);
            err_half += (c8 - ref) * (c8 - ref);
        }
        const double ratio = std::sqrt(err_coarse / n_paths) / std::sqrt(err_half / n_paths);
        CHECK(ratio > 1.2);
        CHECK(ratio < 2.8);
    }
}

TEST_CASE("moment propagation") {
    SUBCASE("zero initial condition and input stay at zero") {
        Ssm s = scalar_model(-1.0, 1.0);
        const TimeGrid grid(0.0, 1.0, 1e-2);
        const auto traj = propagate_moments(s, VectorXd::Zero(1), InputSignal::zero(1), grid);
        CHECK(traj.mean.norm() == 0.0);
        for (const auto& pi : traj.second) CHECK(pi.norm() == 0.0);
    }
    SUBCASE("no diffusion: mean follows the linear ODE, covariance vanishes") {
        Ssm s = Ssm::zero(3, 1, 1);
        RngStream rng(63, 0);
        MatrixXd a, f;
        oracles::random_stable_pair(3, rng, a, f);
        s.A = a;
        s.C = MatrixXd::Ones(1, 3);
        VectorXd x0 = rng.normal_vector(3);
        const TimeGrid grid(0.0, 1.0, 1e-3);
        const auto traj = propagate_moments(s, x0, InputSignal::zero(1), grid);
        double max_err = 0.0;
        for (int k = 0; k < grid.size(); k += 100) {
            const VectorXd expect = oracles::expm(s.A * grid.time(k)) * x0;
            max_err = std::max(max_err, (traj.mean.col(k) - expect).norm());
            CHECK(traj.state_cov(k).norm() < 1e-8);
        }
        CHECK(max_err < 1e-8);
    }
    SUBCASE("scalar closed form E[x^2](t) = e^{-t}") {
        Ssm s = scalar_model(-1.0, 1.0);
        VectorXd x0(1);
        x0 << 1.0;
        const TimeGrid grid(0.0, 1.0, 1e-3);
        const auto traj = propagate_moments(s, x0, InputSignal::zero(1), grid);
        for (int k = 0; k < grid.size(); k += 200)
            CHECK(traj.second[k](0, 0) ==
                  doctest::Approx(std::exp(-grid.time(k))).epsilon(1e-6));
    }
    SUBCASE("moment blow-up is reported") {
        Ssm s = scalar_model(40.0, 0.0);
        const TimeGrid grid(0.0, 50.0, 0.01);
        VectorXd x0(1);
        x0 << 1.0;
        CHECK_THROWS_AS(propagate_moments(s, x0, InputSignal::zero(1), grid),
                        NonFiniteMoments);
    }
}

TEST_CASE("ensemble simulation") {
    SUBCASE("deterministic system has zero variance") {
        Ssm s = Ssm::zero(2, 1, 1);
        s.A = -MatrixXd::Identity(2, 2);
        s.C = MatrixXd::Ones(1, 2);
        VectorXd x0(2);
        x0 << 1.0, 1.0;
        const TimeGrid grid(0.0, 0.5, 1e-2);
        const auto summary =
            simulate_ensemble(s, x0, InputSignal::zero(1), grid, 64, RngStream(64, 0));
        CHECK(summary.var.maxCoeff() < 1e-20);
    }
    SUBCASE("ensemble mean tracks the moment equations") {
        RngStream rng(64, 1);
        const auto cfg = testcfg::brl(2, 1, 1, testcfg::QKind::Fixed,
                                      testcfg::OrthKind::Cayley);
        const WnsBrlSample model = sample_wns_brl(cfg, rng);
        VectorXd x0(2);
        x0 << 1.0, -1.0;
        const TimeGrid grid(0.0, 1.0, 1e-3);
        RngStream irng(64, 2);
        const InputSignal u = make_fourier_input(1, 6, 1.0, irng);
        const auto summary = simulate_ensemble(model.ssm, x0, u, grid, 2000, RngStream(64, 3));
        const auto traj = propagate_moments(model.ssm, x0, u, grid);
        for (int k = 0; k < grid.size(); k += 250) {
            const double se =
                std::sqrt(std::max(summary.var(0, k), 1e-12) / summary.paths);
            CHECK(std::abs(summary.mean(0, k) - traj.out_mean(0, k)) < 3.0 * se + 5e-3);
        }
    }
}

TEST_CASE("mean-square decay bound for alpha-P samples") {
    RngStream rng(65, 0);
    WnsConfig cfg = testcfg::wns(2, testcfg::QKind::Alpha);
    const WnsSample sample = sample_wns(cfg, rng);
    const double alpha = std::get<AlphaP>(sample.params.qmode).alpha;
    const double cond = sample.params.p.condition_number();

    Ssm s = Ssm::zero(2, 1, 1);
    s.A = sample.a;
    s.F = sample.f;
    s.C = MatrixXd::Identity(1, 2);
    VectorXd x0(2);
    x0 << 1.0, 0.5;
    const TimeGrid grid(0.0, 1.0, 1e-3);

    // Monte-Carlo E||x(t)||^2 against cond(P) e^{-alpha t} ||x0||^2 * slack
    const int paths = 2000;
    MatrixXd acc = MatrixXd::Zero(1, grid.size());
    RngStream prng(65, 1);
    for (int p = 0; p < paths; ++p) {
        RngStream stream = prng.substream(p);
        const PathResult path = euler_maruyama(s, x0, InputSignal::zero(1), grid, stream);
        acc += path.states.colwise().squaredNorm();
    }
    acc /= paths;
    for (int k = 0; k < grid.size(); k += 50) {
        const double bound =
            1.2 * cond * std::exp(-alpha * grid.time(k)) * x0.squaredNorm();
        CHECK(acc(0, k) <= bound);
    }
}

TEST_CASE("Fourier inputs") {
    RngStream rng(66, 0);
    const InputSignal u = make_fourier_input(2, 6, 3.0, rng);
    const auto* f = u.as_fourier();
    REQUIRE(f != nullptr);
    CHECK(f->a.cols() == 6);
    // u(0) is exactly the cosine coefficient sum
    const VectorXd at0 = u.eval(0.0);
    CHECK((at0 - f->b.rowwise().sum()).norm() < 1e-14);
    // zero coefficients give the zero signal
    const InputSignal z = InputSignal::fourier(MatrixXd::Zero(2, 6), MatrixXd::Zero(2, 6), 3.0);
    CHECK(z.eval(1.234).norm() == 0.0);
}

TEST_CASE("dataset generation") {
    RngStream rng(67, 0);
    const auto cfg = testcfg::brl(2, 2, 1, testcfg::QKind::Fixed, testcfg::OrthKind::Cayley);
    const WnsBrlSample model = sample_wns_brl(cfg, rng);
    const TimeGrid grid(0.0, 1.0, 1e-3);
    RngStream irng(67, 1);
    const InputSignal u = make_fourier_input(2, 6, 1.0, irng);
    std::vector<double> meas;
    for (int i = 1; i <= 20; ++i) meas.push_back(i * 0.05);
    VectorXd x0 = VectorXd::Ones(2);

    SUBCASE("zero noise reproduces the noiseless outputs") {
        const Dataset ds = make_dataset(model.ssm, x0, u, grid, meas, 3, 0.0, RngStream(67, 2));
        for (int m = 0; m < 3; ++m) {
            RngStream prng = RngStream(67, 2).substream(2 * m);
            const PathResult path = euler_maruyama(model.ssm, x0, u, grid, prng);
            for (int i = 0; i < 20; ++i) {
                const int k = grid.index_of(meas[i]);
                CHECK(ds.outputs[m](0, i) == doctest::Approx(path.outputs(0, k)));
            }
        }
    }
    SUBCASE("noise standard deviation is honored") {
        const int m = 600;
        const double sigma = 0.15;
        const Dataset ds = make_dataset(model.ssm, x0, u, grid, meas, m, sigma,
                                        RngStream(67, 3));
        // measure residual std against the noiseless paths
        std::vector<double> noise;
        for (int e = 0; e < m; ++e) {
            RngStream prng = RngStream(67, 3).substream(2 * e);
            const PathResult path = euler_maruyama(model.ssm, x0, u, grid, prng);
            for (int i = 0; i < 20; ++i) {
                const int k = grid.index_of(meas[i]);
                noise.push_back(ds.outputs[e](0, i) - path.outputs(0, k));
            }
        }
        double ss = 0.0;
        for (double v : noise) ss += v * v;
        const double std_hat = std::sqrt(ss / noise.size());
        CHECK(std::abs(std_hat - sigma) < 0.03 * sigma);
    }
    SUBCASE("measurement times must be grid nodes") {
        CHECK_THROWS_AS(
            make_dataset(model.ssm, x0, u, grid, {0.0505}, 1, 0.1, RngStream(67, 4)),
            DomainError);
    }
}

TEST_CASE("empirical gain") {
    SUBCASE("zero system has zero gain") {
        const Ssm s = Ssm::zero(2, 1, 1);
        const TimeGrid grid(0.0, 1.0, 1e-2);
        CHECK(empirical_gain(s, grid, 3, 4, RngStream(68, 0)) == 0.0);
    }
    SUBCASE("static feedthrough recovers the gain of D") {
        Ssm s = Ssm::zero(1, 1, 1);
        s.A(0, 0) = -50.0;
        s.D(0, 0) = 0.5;
        const TimeGrid grid(0.0, 2.0, 1e-3);
        const double g = empirical_gain(s, grid, 4, 2, RngStream(68, 1));
        CHECK(g == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("below the certificate bound for sampled models") {
        RngStream rng(68, 2);
        const auto cfg = testcfg::brl(2, 2, 1, testcfg::QKind::Wishart,
                                      testcfg::OrthKind::Cayley);
        for (int rep = 0; rep < 3; ++rep) {
            const WnsBrlSample model = sample_wns_brl(cfg, rng);
            const TimeGrid grid(0.0, 4.0, 2e-3);
            const double g = empirical_gain(model.ssm, grid, 4, 64, RngStream(68, 3 + rep));
            CHECK(g < cfg.gamma);
        }
    }
}
