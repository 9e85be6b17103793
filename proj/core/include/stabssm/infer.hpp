#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stabssm/priors.hpp"
#include "stabssm/sdesim.hpp"

namespace stabssm {

/// Moment-Gaussian observation likelihood settings. The likelihood treats
///   y_m(t_i) ~ N(C m(t_i) + D u(t_i), C Sigma(t_i) C^T + sigma^2 I)
/// as independent across experiments and measurement times, with (m, Sigma)
/// from the Ito moment equations.
struct LikelihoodOptions {
    double dt = 0.04;          // target moment-integration step
    double cov_floor = 1e-12;  // diagonal jitter added on top of sigma^2
};

/// Posterior over the unconstrained chart of the stability-enforcing prior.
struct PosteriorModel {
    WnsBrlConfig prior;
    HyperPriors hyper;
    std::optional<Dataset> data;  // empty -> prior-only target
    LikelihoodOptions like;
    UnconstrainedLayout layout;

    // cached likelihood grid (meas times are nodes)
    std::optional<TimeGrid> like_grid;
    std::vector<int> meas_idx;

    static PosteriorModel make(WnsBrlConfig prior, HyperPriors hyper,
                               std::optional<Dataset> data, LikelihoodOptions like = {});
    int dim() const { return layout.total; }
};

/// Gaussian observation log-likelihood of a realized model against a
/// dataset; shared by the parametrized posterior and the free baseline.
double moment_gaussian_loglik(const Ssm& s, const Dataset& data, const TimeGrid& grid,
                              const std::vector<int>& meas_idx, double cov_floor);

/// -inf (never throws) when the chart point realizes to non-finite moments.
double log_likelihood(const VectorXd& v, const PosteriorModel& model);
double log_posterior(const VectorXd& v, const PosteriorModel& model);

/// Target split into prior and likelihood so the kernels can implement
/// forced rejection and prior-only moves from -inf likelihood states.
struct SplitTarget {
    std::function<double(const VectorXd&)> log_prior;
    std::function<double(const VectorXd&)> log_likelihood;  // may return -inf
};

SplitTarget make_target(const PosteriorModel& model);

struct Chain {
    std::vector<VectorXd> draws;
    std::vector<double> log_posts;
    double acceptance_rate = 0.0;
    int forced_rejections = 0;  // proposals with -inf likelihood
    int divergences = 0;        // HMC trajectories with |dH| > threshold
    double max_abs_dh = 0.0;
    std::vector<double> delta_h;  // per accepted-or-rejected proposal (HMC)
    std::string kernel;
    double step_size = 0.0;
    int n_leapfrog = 0;
    double proposal_scale = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    int length() const { return static_cast<int>(draws.size()); }
};

/// Finite-difference gradient of the total log target (central differences,
/// one-sided next to -inf regions, zero where both sides are -inf).
/// Evaluations run in parallel; results are index-ordered, so the gradient
/// is deterministic.
VectorXd gradient_fd(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                     double h = 1e-5);

using GradientFn = std::function<VectorXd(const VectorXd&)>;

/// Symmetric Gaussian-proposal Metropolis over unconstrained coordinates.
Chain rw_metropolis(const SplitTarget& target, const VectorXd& init, int n_iters,
                    double proposal_scale, RngStream rng);

/// Hamiltonian Monte Carlo: leapfrog with unit mass matrix and Metropolis
/// correction on the Hamiltonian. Gradients come from central finite
/// differences unless a callback is supplied. Proposals with |dH| above
/// `divergence_threshold` count as divergent and are rejected.
Chain hmc(const SplitTarget& target, const VectorXd& init, int n_iters, double step_size,
          int n_leapfrog, RngStream rng, const GradientFn& gradient = nullptr,
          double fd_step = 1e-5, double divergence_threshold = 1000.0);

struct KernelConfig {
    std::string kind = "hmc";  // "hmc" | "rwm"
    double step_size = 0.01;
    int n_leapfrog = 3;
    double proposal_scale = 0.05;
    double fd_step = 1e-5;
};

Chain run_kernel(const SplitTarget& target, const VectorXd& init, int n_iters,
                 const KernelConfig& kcfg, RngStream rng);

/// Free-parametrization baseline: iid Gaussian prior directly on the matrix
/// entries (plus the rho hyper-prior), no stability structure. Proposals
/// whose propagated moments blow up receive -inf likelihood (forced
/// rejection); nothing constrains accepted draws to be stable.
struct BaselineModel {
    int n = 0, l = 0, q = 0;
    double entry_std = 1.0;
    double rho0 = 0.0;  // used when the rho hyper-prior is disabled
    HyperPriors hyper;  // infer_gamma is ignored (gamma plays no role here)
    std::optional<Dataset> data;
    LikelihoodOptions like;
    std::optional<TimeGrid> like_grid;
    std::vector<int> meas_idx;

    static BaselineModel make(int n, int l, int q, double entry_std, HyperPriors hyper,
                              std::optional<Dataset> data, LikelihoodOptions like = {});
    int dim() const;
    Ssm realize(const VectorXd& v) const;
};

SplitTarget make_baseline_target(const BaselineModel& model);

Chain free_param_baseline(const BaselineModel& model, const VectorXd& init, int n_iters,
                          const KernelConfig& kcfg, RngStream rng);

/// Posterior-predictive ensembles: realize each retained draw, simulate
/// paths_per_draw trajectories, and summarize. Draws whose simulation
/// diverges are recorded with NaN summaries and counted.
struct PredictiveResult {
    std::vector<EnsembleSummary> per_draw;
    EnsembleSummary pooled;  // mean over finite draws of means and variances
    int diverged = 0;
};

PredictiveResult posterior_predictive(const std::vector<VectorXd>& draws,
                                      const std::function<Ssm(const VectorXd&)>& realize,
                                      const VectorXd& x0, const InputSignal& u,
                                      const TimeGrid& grid, int paths_per_draw,
                                      const RngStream& rng);

PredictiveResult posterior_predictive(const Chain& chain, const PosteriorModel& model,
                                      int keep_last, int paths_per_draw,
                                      const VectorXd& x0, const InputSignal& u,
                                      const TimeGrid& grid, const RngStream& rng);

struct ChainDiagnostics {
    double acceptance_rate = 0.0;
    VectorXd coord_mean;
    VectorXd coord_std;
    VectorXd autocorr_time;  // initial-positive-sequence estimator, capped
    double mean_autocorr_time = 0.0;
    double max_autocorr_time = 0.0;
    int forced_rejections = 0;
};

ChainDiagnostics diagnostics(const Chain& chain);

}  // namespace stabssm
