#include "stabssm/sdesim.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "stabssm/threading.hpp"

namespace stabssm {

TimeGrid::TimeGrid(double t0_, double t1_, double dt_) : t0(t0_), t1(t1_), dt(dt_) {
    if (!(dt > 0.0)) throw DomainError("TimeGrid: dt must be positive");
    if (!(t1 > t0)) throw DomainError("TimeGrid: t1 must exceed t0");
    steps_ = static_cast<int>(std::lround((t1 - t0) / dt));
    if (steps_ < 1) throw DomainError("TimeGrid: fewer than one step");
}

int TimeGrid::index_of(double t, double tol) const {
    const int i = static_cast<int>(std::lround((t - t0) / dt));
    if (i < 0 || i > steps_ || std::abs(time(i) - t) > tol)
        throw DomainError("TimeGrid: instant is not a grid node");
    return i;
}

InputSignal InputSignal::zero(int channels) {
    if (channels < 1) throw DimensionMismatch("InputSignal: channels must be positive");
    return InputSignal(channels, Zero{});
}

InputSignal InputSignal::fourier(MatrixXd a, MatrixXd b, double period) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionMismatch("InputSignal: coefficient shapes differ");
    if (!(period > 0.0)) throw DomainError("InputSignal: period must be positive");
    if (!a.allFinite() || !b.allFinite())
        throw DomainError("InputSignal: coefficients must be finite");
    const int channels = static_cast<int>(a.rows());
    return InputSignal(channels, Fourier{std::move(a), std::move(b), period});
}

InputSignal InputSignal::tabulated(TimeGrid grid, MatrixXd values) {
    if (values.cols() != grid.size())
        throw DimensionMismatch("InputSignal: tabulated length must match grid");
    const int channels = static_cast<int>(values.rows());
    return InputSignal(channels, Tabulated{grid, std::move(values)});
}

VectorXd InputSignal::eval(double t) const {
    if (std::holds_alternative<Zero>(kind_)) return VectorXd::Zero(channels_);
    if (const auto* f = std::get_if<Fourier>(&kind_)) {
        VectorXd u = VectorXd::Zero(channels_);
        const double w = 2.0 * std::numbers::pi / f->period;
        for (int h = 0; h < f->a.cols(); ++h) {
            const double sh = std::sin(w * (h + 1) * t);
            const double ch = std::cos(w * (h + 1) * t);
            u += sh * f->a.col(h) + ch * f->b.col(h);
        }
        return u;
    }
    const auto& tab = std::get<Tabulated>(kind_);
    const double pos = (t - tab.grid.t0) / tab.grid.dt;
    if (pos <= 0.0) return tab.values.col(0);
    if (pos >= tab.grid.steps()) return tab.values.col(tab.grid.steps());
    const int i = static_cast<int>(pos);
    const double w = pos - i;
    return (1.0 - w) * tab.values.col(i) + w * tab.values.col(i + 1);
}

InputSignal make_fourier_input(int channels, int harmonics, double period, RngStream& rng) {
    if (harmonics < 1) throw DomainError("make_fourier_input: need at least one harmonic");
    MatrixXd a(channels, harmonics), b(channels, harmonics);
    for (int j = 0; j < channels; ++j)
        for (int h = 0; h < harmonics; ++h) {
            a(j, h) = rng.normal();
            b(j, h) = rng.normal();
        }
    return InputSignal::fourier(std::move(a), std::move(b), period);
}

MatrixXd wiener_increments(double rho, double dt, int steps, RngStream& rng) {
    if (rho < -1.0 || rho > 1.0) throw DomainError("wiener_increments: rho outside [-1,1]");
    if (!(dt > 0.0)) throw DomainError("wiener_increments: dt must be positive");
    const double sq = std::sqrt(dt);
    const double c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    MatrixXd inc(2, steps);
    for (int k = 0; k < steps; ++k) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        inc(0, k) = sq * z1;
        inc(1, k) = sq * (rho * z1 + c * z2);
    }
    return inc;
}

namespace {

struct PreparedInputs {
    MatrixXd u;   // l x size
    MatrixXd bu;  // n x size
    MatrixXd gu;  // n x size
    MatrixXd du;  // q x size
};

PreparedInputs prepare_inputs(const Ssm& s, const InputSignal& u, const TimeGrid& grid) {
    if (u.channels() != s.l)
        throw DimensionMismatch("input channels do not match the model");
    PreparedInputs p;
    p.u.resize(s.l, grid.size());
    for (int k = 0; k < grid.size(); ++k) p.u.col(k) = u.eval(grid.time(k));
    p.bu = s.B * p.u;
    p.gu = s.G * p.u;
    p.du = s.D * p.u;
    return p;
}

PathResult em_core(const Ssm& s, const VectorXd& x0, const PreparedInputs& in,
                   const TimeGrid& grid, const MatrixXd& inc) {
    const int size = grid.size();
    PathResult res;
    res.states.resize(s.n, size);
    res.outputs.resize(s.q, size);
    VectorXd x = x0;
    const double dt = grid.dt;
    for (int k = 0; k < size; ++k) {
        res.states.col(k) = x;
        res.outputs.col(k) = s.C * x + in.du.col(k);
        if (k == size - 1) break;
        x += (s.A * x + in.bu.col(k)) * dt + (s.F * x) * inc(0, k) + in.gu.col(k) * inc(1, k);
        if (!x.allFinite())
            throw NonFiniteState("euler_maruyama: state became non-finite");
    }
    return res;
}

}  // namespace

PathResult euler_maruyama_with_increments(const Ssm& s, const VectorXd& x0,
                                          const InputSignal& u, const TimeGrid& grid,
                                          const MatrixXd& increments) {
    s.check_dims();
    if (x0.size() != s.n) throw DimensionMismatch("euler_maruyama: x0 size");
    if (increments.rows() != 2 || increments.cols() != grid.steps())
        throw DimensionMismatch("euler_maruyama: increments must be 2 x steps");
    return em_core(s, x0, prepare_inputs(s, u, grid), grid, increments);
}

PathResult euler_maruyama(const Ssm& s, const VectorXd& x0, const InputSignal& u,
                          const TimeGrid& grid, RngStream& rng) {
    return euler_maruyama_with_increments(
        s, x0, u, grid, wiener_increments(s.rho, grid.dt, grid.steps(), rng));
}

MatrixXd MomentTrajectory::state_cov(int i) const {
    MatrixXd cov = second[i] - mean.col(i) * mean.col(i).transpose();
    cov = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
    if (es.info() != Eigen::Success)
        throw NumericalFailure("MomentTrajectory: covariance eigensolver failed");
    VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

struct MomentState {
    VectorXd m;
    MatrixXd pi;
};

MomentState moment_rhs(const Ssm& s, const MomentState& st, const VectorXd& u) {
    const VectorXd bu = s.B * u;
    const VectorXd gu = s.G * u;
    MomentState d;
    d.m = s.A * st.m + bu;
    MatrixXd cross = bu * st.m.transpose();
    MatrixXd noise_cross = s.rho * (s.F * st.m) * gu.transpose();
    d.pi = s.A * st.pi + st.pi * s.A.transpose() + cross + cross.transpose() +
           s.F * st.pi * s.F.transpose() + noise_cross + noise_cross.transpose() +
           gu * gu.transpose();
    return d;
}

}  // namespace

MomentTrajectory propagate_moments(const Ssm& s, const VectorXd& x0, const InputSignal& u,
                                   const TimeGrid& grid, const MomentOptions& opts) {
    s.check_dims();
    if (x0.size() != s.n) throw DimensionMismatch("propagate_moments: x0 size");
    if (u.channels() != s.l)
        throw DimensionMismatch("propagate_moments: input channels");

    MomentTrajectory out;
    out.grid = grid;
    out.mean.resize(s.n, grid.size());
    out.second.resize(grid.size());

    // Keep the explicit integrator inside its stability region for fast
    // systems: substep so that (2||A|| + ||F||^2 + 1) dt_eff <= margin.
    const double rate = 2.0 * s.A.norm() + s.F.norm() * s.F.norm() + 1.0;
    const int substeps =
        std::max(1, static_cast<int>(std::ceil(grid.dt * rate / opts.stability_margin)));
    const double h = grid.dt / substeps;

    MomentState st{x0, x0 * x0.transpose()};
    for (int k = 0; k < grid.size(); ++k) {
        out.mean.col(k) = st.m;
        out.second[k] = st.pi;
        if (!st.m.allFinite() || !st.pi.allFinite() ||
            st.pi.cwiseAbs().maxCoeff() > opts.overflow)
            throw NonFiniteMoments("propagate_moments: moments diverged");
        if (k == grid.size() - 1) break;
        double t = grid.time(k);
        for (int sub = 0; sub < substeps; ++sub) {
            const VectorXd u0 = u.eval(t);
            const VectorXd uh = u.eval(t + 0.5 * h);
            const VectorXd u1 = u.eval(t + h);
            const MomentState k1 = moment_rhs(s, st, u0);
            const MomentState k2 =
                moment_rhs(s, {st.m + 0.5 * h * k1.m, st.pi + 0.5 * h * k1.pi}, uh);
            const MomentState k3 =
                moment_rhs(s, {st.m + 0.5 * h * k2.m, st.pi + 0.5 * h * k2.pi}, uh);
            const MomentState k4 = moment_rhs(s, {st.m + h * k3.m, st.pi + h * k3.pi}, u1);
            st.m += h / 6.0 * (k1.m + 2.0 * k2.m + 2.0 * k3.m + k4.m);
            st.pi += h / 6.0 * (k1.pi + 2.0 * k2.pi + 2.0 * k3.pi + k4.pi);
            st.pi = 0.5 * (st.pi + st.pi.transpose());
            t += h;
        }
    }

    if (opts.with_outputs) {
        out.out_mean.resize(s.q, grid.size());
        out.out_cov.resize(grid.size());
        for (int k = 0; k < grid.size(); ++k) {
            const VectorXd uk = u.eval(grid.time(k));
            out.out_mean.col(k) = s.C * out.mean.col(k) + s.D * uk;
            out.out_cov[k] = s.C * out.state_cov(k) * s.C.transpose();
        }
    }
    return out;
}

namespace {

// Blockwise Welford accumulation; blocks are combined in index order so
// the result does not depend on the worker count.
struct WelfordBlock {
    int count = 0;
    MatrixXd mean;
    MatrixXd m2;
};

void welford_add(WelfordBlock& blk, const MatrixXd& sample) {
    if (blk.count == 0) {
        blk.mean = MatrixXd::Zero(sample.rows(), sample.cols());
        blk.m2 = MatrixXd::Zero(sample.rows(), sample.cols());
    }
    blk.count += 1;
    const MatrixXd delta = sample - blk.mean;
    blk.mean += delta / blk.count;
    blk.m2 += delta.cwiseProduct(sample - blk.mean);
}

void welford_merge(WelfordBlock& into, const WelfordBlock& other) {
    if (other.count == 0) return;
    if (into.count == 0) {
        into = other;
        return;
    }
    const int total = into.count + other.count;
    const MatrixXd delta = other.mean - into.mean;
    into.m2 += other.m2 +
               delta.cwiseProduct(delta) * (double(into.count) * other.count / total);
    into.mean += delta * (double(other.count) / total);
    into.count = total;
}

constexpr int kEnsembleBlock = 64;

}  // namespace

EnsembleSummary simulate_ensemble(const Ssm& s, const VectorXd& x0, const InputSignal& u,
                                  const TimeGrid& grid, int paths, const RngStream& rng) {
    s.check_dims();
    if (paths < 2) throw DomainError("simulate_ensemble: need at least two paths");
    const PreparedInputs in = prepare_inputs(s, u, grid);

    const int blocks = (paths + kEnsembleBlock - 1) / kEnsembleBlock;
    std::vector<WelfordBlock> partial(blocks);
    parallel_for(blocks, [&](int b) {
        const int lo = b * kEnsembleBlock;
        const int hi = std::min(paths, lo + kEnsembleBlock);
        for (int p = lo; p < hi; ++p) {
            RngStream prng = rng.substream(p);
            const MatrixXd inc = wiener_increments(s.rho, grid.dt, grid.steps(), prng);
            welford_add(partial[b], em_core(s, x0, in, grid, inc).outputs);
        }
    });

    WelfordBlock acc;
    for (const auto& blk : partial) welford_merge(acc, blk);

    EnsembleSummary out;
    out.grid = grid;
    out.paths = paths;
    out.mean = acc.mean;
    out.var = acc.m2 / (paths - 1);
    return out;
}

Dataset make_dataset(const Ssm& s, const VectorXd& x0, const InputSignal& u,
                     const TimeGrid& grid, const std::vector<double>& meas_times, int m,
                     double sigma, const RngStream& rng) {
    s.check_dims();
    if (m < 1) throw DomainError("make_dataset: need at least one experiment");
    if (sigma < 0.0) throw DomainError("make_dataset: sigma must be nonnegative");
    std::vector<int> idx;
    idx.reserve(meas_times.size());
    for (double t : meas_times) idx.push_back(grid.index_of(t));

    Dataset ds;
    ds.n = s.n;
    ds.l = s.l;
    ds.q = s.q;
    ds.x0 = x0;
    ds.sigma = sigma;
    ds.meas_times = meas_times;
    ds.input_signal = u;
    ds.sim_grid = grid;
    ds.seed = rng.seed();
    ds.stream = rng.stream();

    const int nt = static_cast<int>(meas_times.size());
    ds.inputs.resize(s.l, nt);
    for (int i = 0; i < nt; ++i) ds.inputs.col(i) = u.eval(meas_times[i]);

    ds.outputs.assign(m, MatrixXd());
    parallel_for(m, [&](int exp_i) {
        RngStream path_rng = rng.substream(2 * exp_i);
        RngStream noise_rng = rng.substream(2 * exp_i + 1);
        const PathResult path = euler_maruyama(s, x0, u, grid, path_rng);
        MatrixXd obs(s.q, nt);
        for (int i = 0; i < nt; ++i)
            obs.col(i) = path.outputs.col(idx[i]) + sigma * noise_rng.normal_vector(s.q);
        ds.outputs[exp_i] = std::move(obs);
    });
    return ds;
}

double empirical_gain(const Ssm& s, const TimeGrid& grid, int n_inputs, int n_paths,
                      const RngStream& rng, int harmonics) {
    s.check_dims();
    if (n_inputs < 1 || n_paths < 1)
        throw DomainError("empirical_gain: need at least one input and one path");
    const VectorXd x0 = VectorXd::Zero(s.n);
    double best = 0.0;
    for (int i = 0; i < n_inputs; ++i) {
        RngStream input_rng = rng.substream(1'000'000 + i);
        const InputSignal u =
            make_fourier_input(s.l, harmonics, grid.t1 - grid.t0, input_rng);
        const PreparedInputs in = prepare_inputs(s, u, grid);
        double u_energy = 0.0;
        for (int k = 0; k < grid.size(); ++k) u_energy += in.u.col(k).squaredNorm() * grid.dt;
        if (u_energy <= 0.0) continue;

        std::vector<double> path_energy(n_paths, 0.0);
        parallel_for(n_paths, [&](int p) {
            RngStream prng = rng.substream(static_cast<std::uint64_t>(i) * n_paths + p);
            const MatrixXd inc = wiener_increments(s.rho, grid.dt, grid.steps(), prng);
            const PathResult path = em_core(s, x0, in, grid, inc);
            double e = 0.0;
            for (int k = 0; k < grid.size(); ++k)
                e += path.outputs.col(k).squaredNorm() * grid.dt;
            path_energy[p] = e;
        });
        double y_energy = 0.0;
        for (double e : path_energy) y_energy += e;
        y_energy /= n_paths;
        best = std::max(best, std::sqrt(y_energy / u_energy));
    }
    return best;
}

}  // namespace stabssm
