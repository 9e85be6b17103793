#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "stabssm/model.hpp"
#include "stabssm/rng.hpp"

namespace stabssm {

/// Uniform time grid t0, t0 + dt, ..., covering [t0, t1].
struct TimeGrid {
    double t0 = 0.0;
    double t1 = 1.0;
    double dt = 1e-3;

    TimeGrid() = default;
    TimeGrid(double t0_, double t1_, double dt_);

    int steps() const { return steps_; }
    int size() const { return steps_ + 1; }
    double time(int i) const { return t0 + i * dt; }

    /// Node index of a time instant; throws DomainError when `t` is not a
    /// grid node to within `tol`.
    int index_of(double t, double tol = 1e-9) const;

  private:
    int steps_ = 0;
};

/// Deterministic input signal u(t) with l channels.
class InputSignal {
  public:
    struct Zero {};
    struct Fourier {
        MatrixXd a;  // l x H, sine coefficients
        MatrixXd b;  // l x H, cosine coefficients
        double period = 1.0;
    };
    struct Tabulated {
        TimeGrid grid;
        MatrixXd values;  // l x grid.size(), linearly interpolated
    };

    static InputSignal zero(int channels);
    static InputSignal fourier(MatrixXd a, MatrixXd b, double period);
    static InputSignal tabulated(TimeGrid grid, MatrixXd values);

    int channels() const { return channels_; }
    VectorXd eval(double t) const;

    const Fourier* as_fourier() const { return std::get_if<Fourier>(&kind_); }
    const Tabulated* as_tabulated() const { return std::get_if<Tabulated>(&kind_); }
    bool is_zero() const { return std::holds_alternative<Zero>(kind_); }

  private:
    InputSignal(int channels, std::variant<Zero, Fourier, Tabulated> kind)
        : channels_(channels), kind_(std::move(kind)) {}
    int channels_ = 0;
    std::variant<Zero, Fourier, Tabulated> kind_;
};

/// u_j(t) = sum_h a_jh sin(2 pi h t / T) + b_jh cos(2 pi h t / T) with
/// standard-normal coefficients.
InputSignal make_fourier_input(int channels, int harmonics, double period, RngStream& rng);

/// Correlated Wiener increments: row 0 drives the state noise, row 1 the
/// input noise, with E[dw dw^T] = [[1, rho], [rho, 1]] dt.
MatrixXd wiener_increments(double rho, double dt, int steps, RngStream& rng);

struct PathResult {
    MatrixXd states;   // n x size
    MatrixXd outputs;  // q x size
};

/// Explicit Euler-Maruyama path with supplied increments (2 x steps).
PathResult euler_maruyama_with_increments(const Ssm& s, const VectorXd& x0,
                                          const InputSignal& u, const TimeGrid& grid,
                                          const MatrixXd& increments);

/// Explicit Euler-Maruyama path. Throws NonFiniteState when the state stops
/// being finite (instability or too-large dt).
PathResult euler_maruyama(const Ssm& s, const VectorXd& x0, const InputSignal& u,
                          const TimeGrid& grid, RngStream& rng);

struct MomentTrajectory {
    TimeGrid grid;
    MatrixXd mean;                    // n x size, E[x]
    std::vector<MatrixXd> second;     // size of n x n blocks, E[x x^T]
    MatrixXd out_mean;                // q x size
    std::vector<MatrixXd> out_cov;    // size of q x q blocks

    /// State covariance at node i, floored to be positive semidefinite.
    MatrixXd state_cov(int i) const;
};

struct MomentOptions {
    /// Integrator substeps are chosen so that the local rate bound
    /// (2||A|| + ||F||^2 + 1) dt_eff stays below this value.
    double stability_margin = 0.5;
    /// Moments above this magnitude are treated as numerical blow-up.
    double overflow = 1e150;
    /// Also fill out_mean / out_cov (the covariance floor costs an
    /// eigendecomposition per node).
    bool with_outputs = true;
};

/// First and second moments of the state under the Ito dynamics:
///   m'  = A m + B u,
///   Pi' = A Pi + Pi A^T + B u m^T + m u^T B^T + F Pi F^T
///         + rho (F m u^T G^T + G u m^T F^T) + G u u^T G^T,
/// integrated with classical RK4. Throws NonFiniteMoments on blow-up.
MomentTrajectory propagate_moments(const Ssm& s, const VectorXd& x0, const InputSignal& u,
                                   const TimeGrid& grid, const MomentOptions& opts = {});

/// Per-node mean and unbiased variance of outputs across sample paths,
/// one derived rng stream per path. The reduction is blockwise in a fixed
/// order, so results are independent of the worker count.
struct EnsembleSummary {
    TimeGrid grid;
    MatrixXd mean;  // q x size
    MatrixXd var;   // q x size
    int paths = 0;
};

EnsembleSummary simulate_ensemble(const Ssm& s, const VectorXd& x0, const InputSignal& u,
                                  const TimeGrid& grid, int paths, const RngStream& rng);

/// Record of measured input/output data from repeated experiments.
struct Dataset {
    int n = 0, l = 0, q = 0;
    VectorXd x0;
    double sigma = 0.0;                 // measurement noise std
    std::vector<double> meas_times;     // subset of simulation grid nodes
    MatrixXd inputs;                    // l x N at meas_times
    std::vector<MatrixXd> outputs;      // M entries, q x N noisy observations
    InputSignal input_signal = InputSignal::zero(1);
    TimeGrid sim_grid;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    int experiments() const { return static_cast<int>(outputs.size()); }
    int times() const { return static_cast<int>(meas_times.size()); }
};

/// M independent paths observed at meas_times with iid N(0, sigma^2 I_q)
/// measurement noise, all starting from the same x0.
Dataset make_dataset(const Ssm& s, const VectorXd& x0, const InputSignal& u,
                     const TimeGrid& grid, const std::vector<double>& meas_times, int m,
                     double sigma, const RngStream& rng);

/// Statistical lower bound on the input-output gain: the max over random
/// Fourier inputs of sqrt(sum_t E||y||^2 / sum_t ||u||^2), x0 = 0, with
/// expectations estimated over Monte-Carlo paths.
double empirical_gain(const Ssm& s, const TimeGrid& grid, int n_inputs, int n_paths,
                      const RngStream& rng, int harmonics = 6);

}  // namespace stabssm
