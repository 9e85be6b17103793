#pragma once

#include <filesystem>
#include <string>

#include "stabssm/config.hpp"
#include "stabssm/infer.hpp"

namespace stabssm::cli {

/// Fully materialized run configuration (schema "stable-ssm-config/v1").
/// Parsing rejects unknown keys; every omitted field takes its documented
/// default, and the effective config can be echoed back as JSON.
struct RunConfig {
    std::uint64_t seed = 20240101;
    int n = 3, l = 2, q = 1;

    // prior
    std::string family = "qwns";   // wns | qwns | alphap
    std::string orth = "cayley";   // cayley | acg
    std::string gain = "zball";    // zball | dirichlet
    double k_p = 4.0;
    double sigma_p = 1.0;
    double q_fixed = 1.0;
    double k_q = 4.0;
    double sigma_q = 1.0;
    double k_alpha = 2.0;
    double theta_alpha = 0.5;
    double mu_f = 0.0;
    double sigma_f = 2.0;
    double mu_s = 0.0;
    double sigma_s = 1.0;
    double mu_c = 0.0;
    double sigma_c = 2.0;
    double sigma_u = 1.0;
    double sigma_v = 1.0;
    double dirichlet_b = 1.0, dirichlet_g = 1.0, dirichlet_d = 1.0;
    double epsilon = 1e-4;
    double rho = 0.3;
    double gamma = 3.0;
    bool random_signs = true;

    // simulation horizon: inference window [t0, t_inference], full horizon t1
    double t0 = 0.0;
    double t_inference = 2.0;
    double t1 = 6.0;
    double dt = 1e-3;
    double predictive_dt = 2e-3;
    int sim_paths = 100;

    // dataset
    int data_m = 10;
    int data_n = 50;
    double data_sigma = 0.15;
    int fourier_terms = 6;
    double x0_value = 1.0;

    // inference
    std::string kernel = "hmc";
    int iterations = 4000;
    double step_size = 0.01;
    int leapfrog = 3;
    double proposal_scale = 0.05;
    double fd_step = 1e-5;
    int keep_last = 500;
    int paths_per_draw = 100;
    double likelihood_dt = 0.04;
    bool infer_rho = true;
    double rho_lo = -0.95, rho_hi = 0.95;
    bool infer_gamma = true;
    double gamma_shape = 1.0, gamma_scale = 1.0;
    bool prior_only = false;
    bool baseline = false;
    double baseline_entry_std = 1.0;

    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_file(const std::filesystem::path& file);
    std::string to_json_text() const;
    void echo(const std::filesystem::path& out_dir) const;

    WnsBrlConfig prior_config() const;
    HyperPriors hyper_priors() const;
    KernelConfig kernel_config() const;
    LikelihoodOptions likelihood_options() const;
    VectorXd x0() const { return VectorXd::Constant(n, x0_value); }
    TimeGrid full_grid() const { return TimeGrid(t0, t1, dt); }
    TimeGrid inference_grid() const { return TimeGrid(t0, t_inference, dt); }
    std::vector<double> measurement_times() const;
};

/// Applies the desk- or paper-scale preset on top of the defaults.
RunConfig preset_config(const std::string& name);

}  // namespace stabssm::cli
