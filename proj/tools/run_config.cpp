#include "run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace stabssm::cli {

namespace {

using nlohmann::json;

constexpr const char* kConfigSchema = "stable-ssm-config/v1";

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw ConfigError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config JSON parse error: ") + e.what());
    }
    RunConfig cfg;
    try {
        reject_unknown(j, {"schema", "seed", "dims", "prior", "sim", "dataset", "inference"},
                       "top level");
        if (j.contains("schema") && j.at("schema").get<std::string>() != kConfigSchema)
            throw ConfigError("config: schema must be 'stable-ssm-config/v1'");
        read(j, "seed", cfg.seed);
        if (j.contains("dims")) {
            const json& d = j.at("dims");
            reject_unknown(d, {"n", "l", "q"}, "dims");
            read(d, "n", cfg.n);
            read(d, "l", cfg.l);
            read(d, "q", cfg.q);
        }
        if (j.contains("prior")) {
            const json& p = j.at("prior");
            reject_unknown(p,
                           {"family", "orth", "gain", "k_p", "sigma_p", "q_fixed", "k_q",
                            "sigma_q", "k_alpha", "theta_alpha", "mu_f", "sigma_f", "mu_s",
                            "sigma_s", "mu_c", "sigma_c", "sigma_u", "sigma_v", "dirichlet",
                            "epsilon", "rho", "gamma", "random_signs"},
                           "prior");
            read(p, "family", cfg.family);
            read(p, "orth", cfg.orth);
            read(p, "gain", cfg.gain);
            read(p, "k_p", cfg.k_p);
            read(p, "sigma_p", cfg.sigma_p);
            read(p, "q_fixed", cfg.q_fixed);
            read(p, "k_q", cfg.k_q);
            read(p, "sigma_q", cfg.sigma_q);
            read(p, "k_alpha", cfg.k_alpha);
            read(p, "theta_alpha", cfg.theta_alpha);
            read(p, "mu_f", cfg.mu_f);
            read(p, "sigma_f", cfg.sigma_f);
            read(p, "mu_s", cfg.mu_s);
            read(p, "sigma_s", cfg.sigma_s);
            read(p, "mu_c", cfg.mu_c);
            read(p, "sigma_c", cfg.sigma_c);
            read(p, "sigma_u", cfg.sigma_u);
            read(p, "sigma_v", cfg.sigma_v);
            read(p, "epsilon", cfg.epsilon);
            read(p, "rho", cfg.rho);
            read(p, "gamma", cfg.gamma);
            read(p, "random_signs", cfg.random_signs);
            if (p.contains("dirichlet")) {
                const auto v = p.at("dirichlet").get<std::vector<double>>();
                if (v.size() != 3)
                    throw ConfigError("config: prior.dirichlet must have 3 entries");
                cfg.dirichlet_b = v[0];
                cfg.dirichlet_g = v[1];
                cfg.dirichlet_d = v[2];
            }
        }
        if (j.contains("sim")) {
            const json& s = j.at("sim");
            reject_unknown(s, {"t0", "t_inference", "t1", "dt", "predictive_dt", "paths"},
                           "sim");
            read(s, "t0", cfg.t0);
            read(s, "t_inference", cfg.t_inference);
            read(s, "t1", cfg.t1);
            read(s, "dt", cfg.dt);
            read(s, "predictive_dt", cfg.predictive_dt);
            read(s, "paths", cfg.sim_paths);
        }
        if (j.contains("dataset")) {
            const json& d = j.at("dataset");
            reject_unknown(d, {"M", "N", "sigma", "fourier_terms", "x0"}, "dataset");
            read(d, "M", cfg.data_m);
            read(d, "N", cfg.data_n);
            read(d, "sigma", cfg.data_sigma);
            read(d, "fourier_terms", cfg.fourier_terms);
            read(d, "x0", cfg.x0_value);
        }
        if (j.contains("inference")) {
            const json& i = j.at("inference");
            reject_unknown(i,
                           {"kernel", "iterations", "step_size", "leapfrog",
                            "proposal_scale", "fd_step", "keep_last", "paths_per_draw",
                            "likelihood_dt", "infer_rho", "rho_lo", "rho_hi", "infer_gamma",
                            "gamma_shape", "gamma_scale", "prior_only", "baseline",
                            "baseline_entry_std"},
                           "inference");
            read(i, "kernel", cfg.kernel);
            read(i, "iterations", cfg.iterations);
            read(i, "step_size", cfg.step_size);
            read(i, "leapfrog", cfg.leapfrog);
            read(i, "proposal_scale", cfg.proposal_scale);
            read(i, "fd_step", cfg.fd_step);
            read(i, "keep_last", cfg.keep_last);
            read(i, "paths_per_draw", cfg.paths_per_draw);
            read(i, "likelihood_dt", cfg.likelihood_dt);
            read(i, "infer_rho", cfg.infer_rho);
            read(i, "rho_lo", cfg.rho_lo);
            read(i, "rho_hi", cfg.rho_hi);
            read(i, "infer_gamma", cfg.infer_gamma);
            read(i, "gamma_shape", cfg.gamma_shape);
            read(i, "gamma_scale", cfg.gamma_scale);
            read(i, "prior_only", cfg.prior_only);
            read(i, "baseline", cfg.baseline);
            read(i, "baseline_entry_std", cfg.baseline_entry_std);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    // structural validation happens when building the library configs
    cfg.prior_config().validate();
    if (cfg.kernel != "hmc" && cfg.kernel != "rwm")
        throw ConfigError("config: inference.kernel must be 'hmc' or 'rwm'");
    if (cfg.keep_last > cfg.iterations)
        throw ConfigError("config: inference.keep_last exceeds iterations");
    if (!(cfg.t0 < cfg.t_inference && cfg.t_inference <= cfg.t1))
        throw ConfigError("config: require t0 < t_inference <= t1");
    if (cfg.data_n < 1 || cfg.data_m < 1) throw ConfigError("config: dataset.M and N >= 1");
    return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("config: cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string RunConfig::to_json_text() const {
    json j;
    j["schema"] = kConfigSchema;
    j["seed"] = seed;
    j["dims"] = {{"n", n}, {"l", l}, {"q", q}};
    j["prior"] = {{"family", family},
                  {"orth", orth},
                  {"gain", gain},
                  {"k_p", k_p},
                  {"sigma_p", sigma_p},
                  {"q_fixed", q_fixed},
                  {"k_q", k_q},
                  {"sigma_q", sigma_q},
                  {"k_alpha", k_alpha},
                  {"theta_alpha", theta_alpha},
                  {"mu_f", mu_f},
                  {"sigma_f", sigma_f},
                  {"mu_s", mu_s},
                  {"sigma_s", sigma_s},
                  {"mu_c", mu_c},
                  {"sigma_c", sigma_c},
                  {"sigma_u", sigma_u},
                  {"sigma_v", sigma_v},
                  {"dirichlet", {dirichlet_b, dirichlet_g, dirichlet_d}},
                  {"epsilon", epsilon},
                  {"rho", rho},
                  {"gamma", gamma},
                  {"random_signs", random_signs}};
    j["sim"] = {{"t0", t0},         {"t_inference", t_inference},
                {"t1", t1},         {"dt", dt},
                {"predictive_dt", predictive_dt}, {"paths", sim_paths}};
    j["dataset"] = {{"M", data_m},
                    {"N", data_n},
                    {"sigma", data_sigma},
                    {"fourier_terms", fourier_terms},
                    {"x0", x0_value}};
    j["inference"] = {{"kernel", kernel},
                      {"iterations", iterations},
                      {"step_size", step_size},
                      {"leapfrog", leapfrog},
                      {"proposal_scale", proposal_scale},
                      {"fd_step", fd_step},
                      {"keep_last", keep_last},
                      {"paths_per_draw", paths_per_draw},
                      {"likelihood_dt", likelihood_dt},
                      {"infer_rho", infer_rho},
                      {"rho_lo", rho_lo},
                      {"rho_hi", rho_hi},
                      {"infer_gamma", infer_gamma},
                      {"gamma_shape", gamma_shape},
                      {"gamma_scale", gamma_scale},
                      {"prior_only", prior_only},
                      {"baseline", baseline},
                      {"baseline_entry_std", baseline_entry_std}};
    return j.dump(2) + "\n";
}

void RunConfig::echo(const std::filesystem::path& out_dir) const {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir / "effective_config.json");
    out << to_json_text();
}

WnsBrlConfig RunConfig::prior_config() const {
    WnsBrlConfig cfg;
    cfg.base.n = n;
    cfg.base.k_p = k_p;
    cfg.base.sigma_p = SpdMatrix::scaled_identity(n, sigma_p);
    if (family == "wns") {
        cfg.base.qmode = FixedQSpec{SpdMatrix::scaled_identity(n, q_fixed)};
    } else if (family == "qwns") {
        cfg.base.qmode = WishartQSpec{k_q, SpdMatrix::scaled_identity(n, sigma_q)};
    } else if (family == "alphap") {
        cfg.base.qmode = GammaAlphaSpec{k_alpha, theta_alpha};
    } else {
        throw ConfigError("config: prior.family must be wns | qwns | alphap");
    }
    cfg.base.ftil = GaussianBlock{VectorXd::Constant(n * n, mu_f),
                                  SpdMatrix::scaled_identity(n * n, sigma_f)};
    const int sk = n * (n - 1) / 2;
    cfg.base.skew = sk > 0 ? GaussianBlock{VectorXd::Constant(sk, mu_s),
                                           SpdMatrix::scaled_identity(sk, sigma_s)}
                           : GaussianBlock{};
    cfg.l = l;
    cfg.q = q;
    cfg.c = GaussianBlock{VectorXd::Constant(q * n, mu_c),
                          SpdMatrix::scaled_identity(q * n, sigma_c)};
    cfg.gamma = gamma;
    cfg.rho = rho;
    cfg.epsilon = epsilon;
    const int m = cfg.zdim();
    if (orth == "acg") {
        cfg.orth = AcgOrthSpec{SpdMatrix::scaled_identity(m, sigma_u),
                               SpdMatrix::scaled_identity(l, sigma_v)};
    } else if (orth == "cayley") {
        CayleyOrthSpec spec;
        const int mu_sz = m * (m - 1) / 2;
        const int mv_sz = l * (l - 1) / 2;
        spec.su = GaussianBlock{VectorXd::Zero(mu_sz),
                                SpdMatrix::scaled_identity(mu_sz, sigma_u)};
        spec.sv = mv_sz > 0 ? GaussianBlock{VectorXd::Zero(mv_sz),
                                            SpdMatrix::scaled_identity(mv_sz, sigma_v)}
                            : GaussianBlock{};
        spec.random_signs = random_signs;
        cfg.orth = spec;
    } else {
        throw ConfigError("config: prior.orth must be cayley | acg");
    }
    if (gain == "zball") {
        cfg.gain = ZBallGainSpec{};
    } else if (gain == "dirichlet") {
        cfg.gain = DirichletGainSpec{dirichlet_b, dirichlet_g, dirichlet_d};
    } else {
        throw ConfigError("config: prior.gain must be zball | dirichlet");
    }
    return cfg;
}

HyperPriors RunConfig::hyper_priors() const {
    HyperPriors h;
    h.infer_rho = infer_rho;
    h.rho_lo = rho_lo;
    h.rho_hi = rho_hi;
    h.infer_gamma = infer_gamma;
    h.gamma_shape = gamma_shape;
    h.gamma_scale = gamma_scale;
    return h;
}

KernelConfig RunConfig::kernel_config() const {
    KernelConfig k;
    k.kind = kernel;
    k.step_size = step_size;
    k.n_leapfrog = leapfrog;
    k.proposal_scale = proposal_scale;
    k.fd_step = fd_step;
    return k;
}

LikelihoodOptions RunConfig::likelihood_options() const {
    LikelihoodOptions like;
    like.dt = likelihood_dt;
    return like;
}

std::vector<double> RunConfig::measurement_times() const {
    std::vector<double> meas;
    const double spacing = (t_inference - t0) / data_n;
    // keep instants on the dt grid exactly
    const int stride = static_cast<int>(std::lround(spacing / dt));
    if (stride < 1 || std::abs(stride * dt - spacing) > 1e-9)
        throw ConfigError("config: (t_inference - t0) / N must be a multiple of dt");
    for (int i = 1; i <= data_n; ++i) meas.push_back(t0 + i * stride * dt);
    return meas;
}

RunConfig preset_config(const std::string& name) {
    RunConfig cfg;  // defaults are the desk preset
    if (name == "desk") return cfg;
    if (name == "paper") {
        cfg.n = 4;
        cfg.iterations = 20000;
        cfg.keep_last = 1000;
        return cfg;
    }
    throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
}

}  // namespace stabssm::cli
