// scratch probe for criterion 8 (not part of the test suite)
#include <cstdio>

#include "oracles.hpp"
#include "stabssm/infer.hpp"
#include "test_configs.hpp"

using namespace stabssm;

int main(int argc, char** argv) {
    const double step = argc > 1 ? std::atof(argv[1]) : 0.28;
    const int leap = argc > 2 ? std::atoi(argv[2]) : 6;
    const int iters = argc > 3 ? std::atoi(argv[3]) : 20000;
    const auto cfg = testcfg::brl(2, 1, 1, testcfg::QKind::Wishart, testcfg::OrthKind::Cayley,
                                  testcfg::GainKind::ZBall, false);
    const HyperPriors hyper;
    const PosteriorModel model = PosteriorModel::make(cfg, hyper, std::nullopt);
    const SplitTarget target = make_target(model);
    const VectorXd truth = prior_coordinate_means(model.layout, cfg, hyper);

    const Chain chain =
        hmc(target, VectorXd::Zero(model.dim()), iters, step, leap, RngStream(1012, 1));
    const auto d = diagnostics(chain);
    std::printf("acceptance=%.3f divergences=%d max|dH|=%.3g\n", chain.acceptance_rate,
                chain.divergences, chain.max_abs_dh);
    for (const auto& seg : model.layout.segments) {
        for (int i = 0; i < seg.size; ++i) {
            const int c = seg.offset + i;
            const double scale = std::max(std::abs(truth(c)), d.coord_std(c));
            const double mc = 3.0 * d.coord_std(c) *
                              std::sqrt(d.autocorr_time(c) / chain.length());
            const double excess = (std::abs(d.coord_mean(c) - truth(c)) - mc) / (0.05 * scale);
            if (excess > 0.5 || i == 0)
                std::printf("%-16s[%d] mean=%8.4f truth=%8.4f std=%6.3f tau=%7.1f excess=%6.2f\n",
                            seg.name.c_str(), i, d.coord_mean(c), truth(c), d.coord_std(c),
                            d.autocorr_time(c), excess);
        }
    }
    return 0;
}
