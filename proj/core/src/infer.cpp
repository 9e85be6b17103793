#include "stabssm/infer.hpp"

#include <cmath>
#include <limits>

#include "stabssm/threading.hpp"

namespace stabssm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093453;

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Likelihood integration grid: measurement instants must land on nodes, so
// the step is a divisor of the (uniform) measurement spacing.
void build_like_grid(const Dataset& ds, double target_dt, std::optional<TimeGrid>& grid,
                     std::vector<int>& meas_idx) {
    if (ds.times() == 0) return;
    const double t0 = ds.sim_grid.t0;
    const double spacing =
        ds.times() > 1 ? ds.meas_times[1] - ds.meas_times[0] : ds.meas_times[0] - t0;
    if (!(spacing > 0.0))
        throw ConfigError("likelihood grid: measurement times must be increasing");
    for (int i = 1; i < ds.times(); ++i)
        if (std::abs(ds.meas_times[i] - ds.meas_times[i - 1] - spacing) > 1e-9)
            throw ConfigError("likelihood grid: measurement times must be uniformly spaced");
    const int sub = std::max(1, static_cast<int>(std::ceil(spacing / target_dt - 1e-12)));
    grid = TimeGrid(t0, ds.meas_times.back(), spacing / sub);
    meas_idx.clear();
    for (double t : ds.meas_times) meas_idx.push_back(grid->index_of(t, 1e-7));
}

}  // namespace

PosteriorModel PosteriorModel::make(WnsBrlConfig prior, HyperPriors hyper,
                                    std::optional<Dataset> data, LikelihoodOptions like) {
    PosteriorModel m;
    m.layout = UnconstrainedLayout::for_brl(prior, hyper);
    m.prior = std::move(prior);
    m.hyper = hyper;
    m.like = like;
    if (data) {
        if (data->l != m.prior.l || data->q != m.prior.q)
            throw DimensionMismatch("PosteriorModel: dataset dims do not match the prior");
        m.data = std::move(data);
        build_like_grid(*m.data, like.dt, m.like_grid, m.meas_idx);
    }
    return m;
}

double moment_gaussian_loglik(const Ssm& s, const Dataset& data, const TimeGrid& grid,
                              const std::vector<int>& meas_idx, double cov_floor) {
    MomentOptions opts;
    opts.with_outputs = false;
    const MomentTrajectory traj =
        propagate_moments(s, data.x0, data.input_signal, grid, opts);

    const int q = s.q;
    const double noise_var = data.sigma * data.sigma + cov_floor;
    double ll = 0.0;
    for (int i = 0; i < static_cast<int>(meas_idx.size()); ++i) {
        const int k = meas_idx[i];
        const VectorXd mu = s.C * traj.mean.col(k) + s.D * data.inputs.col(i);
        // No PSD flooring here: the noise variance dominates any integration
        // roundoff in Pi - m m^T.
        MatrixXd cov = traj.second[k] - traj.mean.col(k) * traj.mean.col(k).transpose();
        MatrixXd ycov = s.C * cov * s.C.transpose() +
                        noise_var * MatrixXd::Identity(q, q);
        ycov = 0.5 * (ycov + ycov.transpose());
        Eigen::LLT<MatrixXd> llt(ycov);
        if (llt.info() != Eigen::Success) return kNegInf;
        const MatrixXd l = llt.matrixL();
        const double logdet = 2.0 * l.diagonal().array().log().sum();
        for (const MatrixXd& obs : data.outputs) {
            const VectorXd w =
                l.triangularView<Eigen::Lower>().solve(obs.col(i) - mu);
            ll += -0.5 * (w.squaredNorm() + logdet + q * kLog2Pi);
        }
    }
    return std::isfinite(ll) ? ll : kNegInf;
}

double log_likelihood(const VectorXd& v, const PosteriorModel& model) {
    if (!model.data || model.data->experiments() == 0 || model.data->times() == 0)
        return 0.0;
    try {
        const BrlParams params = brl_from_unconstrained(v, model.prior, model.hyper);
        const RealizedSsm realized = ssm_from_brl_params(params);
        return moment_gaussian_loglik(realized.ssm, *model.data, *model.like_grid,
                                      model.meas_idx, model.like.cov_floor);
    } catch (const Error&) {
        // Overflowed charts or diverged moments read as impossible data.
        return kNegInf;
    }
}

double log_posterior(const VectorXd& v, const PosteriorModel& model) {
    const double lp = log_prior(v, model.layout, model.prior, model.hyper);
    const double ll = log_likelihood(v, model);
    return lp + ll;
}

SplitTarget make_target(const PosteriorModel& model) {
    return SplitTarget{
        [&model](const VectorXd& v) { return log_prior(v, model.layout, model.prior, model.hyper); },
        [&model](const VectorXd& v) { return log_likelihood(v, model); }};
}

VectorXd gradient_fd(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                     double h) {
    const int d = static_cast<int>(x.size());
    std::vector<double> plus(d), minus(d);
    parallel_for(2 * d, [&](int k) {
        VectorXd p = x;
        const int i = k / 2;
        if (k % 2 == 0) {
            p(i) += h;
            plus[i] = f(p);
        } else {
            p(i) -= h;
            minus[i] = f(p);
        }
    });
    VectorXd g(d);
    const double fx_lazy = std::numeric_limits<double>::quiet_NaN();
    double fx = fx_lazy;
    for (int i = 0; i < d; ++i) {
        const bool pf = std::isfinite(plus[i]);
        const bool mf = std::isfinite(minus[i]);
        if (pf && mf) {
            g(i) = (plus[i] - minus[i]) / (2.0 * h);
        } else if (pf || mf) {
            if (std::isnan(fx)) fx = f(x);
            if (!std::isfinite(fx)) {
                g(i) = 0.0;
            } else {
                g(i) = pf ? (plus[i] - fx) / h : (fx - minus[i]) / h;
            }
        } else {
            g(i) = 0.0;
        }
    }
    return g;
}

namespace {

struct TargetState {
    double lp = 0.0;
    double ll = 0.0;
    double total() const { return lp + ll; }
    bool likelihood_finite() const { return std::isfinite(ll); }
};

TargetState eval_target(const SplitTarget& t, const VectorXd& x) {
    TargetState s;
    s.lp = t.log_prior(x);
    s.ll = t.log_likelihood(x);
    return s;
}

}  // namespace

Chain rw_metropolis(const SplitTarget& target, const VectorXd& init, int n_iters,
                    double proposal_scale, RngStream rng) {
    if (!(proposal_scale > 0.0))
        throw DomainError("rw_metropolis: proposal scale must be positive");
    Chain chain;
    chain.kernel = "rwm";
    chain.proposal_scale = proposal_scale;
    chain.seed = rng.seed();
    chain.stream = rng.stream();
    chain.draws.reserve(n_iters);
    chain.log_posts.reserve(n_iters);

    VectorXd x = init;
    TargetState cur = eval_target(target, x);
    int accepted = 0;
    for (int it = 0; it < n_iters; ++it) {
        VectorXd prop = x + proposal_scale * rng.normal_vector(static_cast<int>(x.size()));
        const TargetState cand = eval_target(target, prop);
        const double log_u = std::log(rng.uniform());
        bool accept = false;
        if (!cand.likelihood_finite()) {
            chain.forced_rejections += 1;
            // From a -inf state the chain still moves through the prior.
            if (!cur.likelihood_finite()) accept = log_u < cand.lp - cur.lp;
        } else if (!cur.likelihood_finite()) {
            accept = true;
        } else {
            accept = log_u < cand.total() - cur.total();
        }
        if (accept) {
            x = std::move(prop);
            cur = cand;
            ++accepted;
        }
        chain.draws.push_back(x);
        chain.log_posts.push_back(cur.total());
    }
    chain.acceptance_rate = n_iters > 0 ? double(accepted) / n_iters : 0.0;
    return chain;
}

Chain hmc(const SplitTarget& target, const VectorXd& init, int n_iters, double step_size,
          int n_leapfrog, RngStream rng, const GradientFn& gradient, double fd_step,
          double divergence_threshold) {
    if (!(step_size > 0.0)) throw DomainError("hmc: step size must be positive");
    if (n_leapfrog < 1) throw DomainError("hmc: need at least one leapfrog step");
    Chain chain;
    chain.kernel = "hmc";
    chain.step_size = step_size;
    chain.n_leapfrog = n_leapfrog;
    chain.seed = rng.seed();
    chain.stream = rng.stream();
    chain.draws.reserve(n_iters);
    chain.log_posts.reserve(n_iters);
    chain.delta_h.reserve(n_iters);

    // Potential energy: -(log prior + log likelihood); from a -inf
    // likelihood state the dynamics run on the prior alone.
    const auto total_for = [&](const TargetState& s, bool prior_only) {
        return prior_only ? s.lp : s.total();
    };
    const auto grad_at = [&](const VectorXd& p, bool prior_only) {
        if (gradient && !prior_only) return gradient(p);
        if (prior_only) return gradient_fd(target.log_prior, p, fd_step);
        return gradient_fd(
            [&](const VectorXd& y) {
                const double lp = target.log_prior(y);
                const double ll = target.log_likelihood(y);
                return lp + ll;
            },
            p, fd_step);
    };

    VectorXd x = init;
    TargetState cur = eval_target(target, x);
    int accepted = 0;
    const int dim = static_cast<int>(x.size());
    for (int it = 0; it < n_iters; ++it) {
        const bool prior_only = !cur.likelihood_finite();
        VectorXd momentum = rng.normal_vector(dim);
        const double h0 = 0.5 * momentum.squaredNorm() - total_for(cur, prior_only);

        VectorXd pos = x;
        VectorXd mom = momentum;
        bool exploded = false;
        mom += 0.5 * step_size * grad_at(pos, prior_only);
        for (int step = 0; step < n_leapfrog; ++step) {
            pos += step_size * mom;
            if (!pos.allFinite()) {
                exploded = true;
                break;
            }
            const VectorXd g = grad_at(pos, prior_only);
            mom += (step + 1 == n_leapfrog ? 0.5 : 1.0) * step_size * g;
            if (!mom.allFinite()) {
                exploded = true;
                break;
            }
        }

        bool accept = false;
        if (!exploded) {
            const TargetState cand = eval_target(target, pos);
            if (!cand.likelihood_finite()) chain.forced_rejections += 1;
            const bool cand_prior_only = prior_only && !cand.likelihood_finite();
            if (prior_only && cand.likelihood_finite()) {
                accept = true;  // escaping the -inf region
                cur = cand;
            } else if (!prior_only && !cand.likelihood_finite()) {
                accept = false;  // forced rejection
            } else {
                const double h1 =
                    0.5 * mom.squaredNorm() - total_for(cand, cand_prior_only);
                const double dh = h1 - h0;
                chain.delta_h.push_back(dh);
                chain.max_abs_dh = std::max(chain.max_abs_dh, std::abs(dh));
                if (std::abs(dh) > divergence_threshold || !std::isfinite(dh)) {
                    chain.divergences += 1;
                } else if (std::log(rng.uniform()) < -dh) {
                    accept = true;
                    cur = cand;
                }
            }
            if (accept) x = pos;
        } else {
            chain.divergences += 1;
        }
        if (accept) ++accepted;
        chain.draws.push_back(x);
        chain.log_posts.push_back(cur.total());
    }
    chain.acceptance_rate = n_iters > 0 ? double(accepted) / n_iters : 0.0;
    return chain;
}

Chain run_kernel(const SplitTarget& target, const VectorXd& init, int n_iters,
                 const KernelConfig& kcfg, RngStream rng) {
    if (kcfg.kind == "rwm")
        return rw_metropolis(target, init, n_iters, kcfg.proposal_scale, std::move(rng));
    if (kcfg.kind == "hmc")
        return hmc(target, init, n_iters, kcfg.step_size, kcfg.n_leapfrog, std::move(rng),
                   nullptr, kcfg.fd_step);
    throw ConfigError("run_kernel: unknown kernel '" + kcfg.kind + "'");
}

BaselineModel BaselineModel::make(int n, int l, int q, double entry_std, HyperPriors hyper,
                                  std::optional<Dataset> data, LikelihoodOptions like) {
    if (n < 1 || l < 1 || q < 1) throw DimensionMismatch("BaselineModel: dims");
    if (!(entry_std > 0.0)) throw ConfigError("BaselineModel: entry std must be positive");
    BaselineModel m;
    m.n = n;
    m.l = l;
    m.q = q;
    m.entry_std = entry_std;
    m.hyper = hyper;
    m.like = like;
    if (data) {
        if (data->l != l || data->q != q)
            throw DimensionMismatch("BaselineModel: dataset dims");
        m.data = std::move(data);
        build_like_grid(*m.data, like.dt, m.like_grid, m.meas_idx);
    }
    return m;
}

int BaselineModel::dim() const {
    return 2 * n * n + 2 * n * l + q * n + q * l + (hyper.infer_rho ? 1 : 0);
}

Ssm BaselineModel::realize(const VectorXd& v) const {
    if (v.size() != dim()) throw DimensionMismatch("BaselineModel::realize: size");
    Ssm s;
    s.n = n;
    s.l = l;
    s.q = q;
    int pos = 0;
    const auto take = [&](int rows, int cols) {
        MatrixXd m = Eigen::Map<const MatrixXd>(v.data() + pos, rows, cols);
        pos += rows * cols;
        return m;
    };
    s.A = take(n, n);
    s.B = take(n, l);
    s.C = take(q, n);
    s.D = take(q, l);
    s.F = take(n, n);
    s.G = take(n, l);
    if (hyper.infer_rho) {
        s.rho = hyper.rho_lo + (hyper.rho_hi - hyper.rho_lo) * sigmoid(v(pos));
    } else {
        s.rho = rho0;
    }
    return s;
}

SplitTarget make_baseline_target(const BaselineModel& model) {
    const int entries = model.dim() - (model.hyper.infer_rho ? 1 : 0);
    const double inv_var = 1.0 / (model.entry_std * model.entry_std);
    const double log_norm =
        entries * (std::log(model.entry_std) + 0.5 * kLog2Pi);
    SplitTarget t;
    t.log_prior = [&model, entries, inv_var, log_norm](const VectorXd& v) {
        double lp = -0.5 * inv_var * v.head(entries).squaredNorm() - log_norm;
        if (model.hyper.infer_rho) {
            const double x = v(entries);
            lp += -softplus(x) - softplus(-x);
        }
        return lp;
    };
    t.log_likelihood = [&model](const VectorXd& v) {
        if (!model.data || model.data->experiments() == 0 || model.data->times() == 0)
            return 0.0;
        try {
            const Ssm s = model.realize(v);
            return moment_gaussian_loglik(s, *model.data, *model.like_grid, model.meas_idx,
                                          model.like.cov_floor);
        } catch (const Error&) {
            return kNegInf;
        }
    };
    return t;
}

Chain free_param_baseline(const BaselineModel& model, const VectorXd& init, int n_iters,
                          const KernelConfig& kcfg, RngStream rng) {
    return run_kernel(make_baseline_target(model), init, n_iters, kcfg, std::move(rng));
}

PredictiveResult posterior_predictive(const std::vector<VectorXd>& draws,
                                      const std::function<Ssm(const VectorXd&)>& realize,
                                      const VectorXd& x0, const InputSignal& u,
                                      const TimeGrid& grid, int paths_per_draw,
                                      const RngStream& rng) {
    PredictiveResult res;
    res.per_draw.resize(draws.size());
    std::vector<char> ok(draws.size(), 0);
    // One substream family per draw; draws are independent workloads.
    parallel_for(static_cast<int>(draws.size()), [&](int i) {
        try {
            const Ssm s = realize(draws[i]);
            res.per_draw[i] =
                simulate_ensemble(s, x0, u, grid, paths_per_draw, rng.substream(i));
            ok[i] = 1;
        } catch (const Error&) {
            EnsembleSummary bad;
            bad.grid = grid;
            bad.paths = paths_per_draw;
            bad.mean = MatrixXd::Constant(1, grid.size(),
                                          std::numeric_limits<double>::quiet_NaN());
            bad.var = bad.mean;
            res.per_draw[i] = std::move(bad);
        }
    });

    int finite = 0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        if (!ok[i]) {
            res.diverged += 1;
            continue;
        }
        if (finite == 0) {
            res.pooled = res.per_draw[i];
        } else {
            res.pooled.mean += res.per_draw[i].mean;
            res.pooled.var += res.per_draw[i].var;
        }
        ++finite;
    }
    if (finite > 0) {
        res.pooled.mean /= finite;
        res.pooled.var /= finite;
    }
    return res;
}

PredictiveResult posterior_predictive(const Chain& chain, const PosteriorModel& model,
                                      int keep_last, int paths_per_draw,
                                      const VectorXd& x0, const InputSignal& u,
                                      const TimeGrid& grid, const RngStream& rng) {
    if (keep_last > chain.length())
        throw DomainError("posterior_predictive: keep_last exceeds chain length");
    std::vector<VectorXd> kept(chain.draws.end() - keep_last, chain.draws.end());
    const auto realize = [&model](const VectorXd& v) {
        return ssm_from_brl_params(brl_from_unconstrained(v, model.prior, model.hyper)).ssm;
    };
    return posterior_predictive(kept, realize, x0, u, grid, paths_per_draw, rng);
}

ChainDiagnostics diagnostics(const Chain& chain) {
    if (chain.draws.empty()) throw DomainError("diagnostics: empty chain");
    const int len = chain.length();
    const int dim = static_cast<int>(chain.draws.front().size());
    ChainDiagnostics d;
    d.acceptance_rate = chain.acceptance_rate;
    d.forced_rejections = chain.forced_rejections;
    d.coord_mean = VectorXd::Zero(dim);
    for (const auto& v : chain.draws) d.coord_mean += v;
    d.coord_mean /= len;
    d.coord_std = VectorXd::Zero(dim);
    for (const auto& v : chain.draws)
        d.coord_std += (v - d.coord_mean).cwiseAbs2();
    d.coord_std = (d.coord_std / std::max(1, len - 1)).cwiseSqrt();

    d.autocorr_time = VectorXd::Constant(dim, double(len));
    const int max_lag = len / 2;
    for (int c = 0; c < dim; ++c) {
        const double var = d.coord_std(c) * d.coord_std(c);
        if (!(var > 0.0)) continue;  // constant coordinate: cap at length
        // Geyer initial-positive-sequence estimator over lag pairs.
        double tau = 1.0;
        for (int m = 0;; ++m) {
            const int l1 = 2 * m + 1;
            const int l2 = 2 * m + 2;
            if (l2 > max_lag) break;
            double r1 = 0.0, r2 = 0.0;
            for (int t = 0; t + l1 < len; ++t)
                r1 += (chain.draws[t](c) - d.coord_mean(c)) *
                      (chain.draws[t + l1](c) - d.coord_mean(c));
            for (int t = 0; t + l2 < len; ++t)
                r2 += (chain.draws[t](c) - d.coord_mean(c)) *
                      (chain.draws[t + l2](c) - d.coord_mean(c));
            r1 /= len * var;
            r2 /= len * var;
            const double pair = r1 + r2;
            if (pair <= 0.0) break;
            tau += 2.0 * pair;
        }
        d.autocorr_time(c) = std::min(tau, double(len));
    }
    d.mean_autocorr_time = d.autocorr_time.mean();
    d.max_autocorr_time = d.autocorr_time.maxCoeff();
    return d;
}

}  // namespace stabssm
