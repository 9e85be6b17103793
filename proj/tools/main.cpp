#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"

using namespace stabssm;
using namespace stabssm::cli;

namespace {

RunConfig resolve_config(const std::string& config_file, const std::string& preset,
                         std::optional<std::uint64_t> seed) {
    RunConfig cfg = config_file.empty() ? preset_config(preset)
                                        : RunConfig::from_file(config_file);
    if (seed) cfg.seed = *seed;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stable-ssm: stability-enforcing priors and inference for "
                 "continuous-time stochastic state-space models"};
    app.require_subcommand(1);

    std::string config_file;
    std::string preset = "desk";
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::string model_file;
    std::string dataset_dir;
    std::string certificate_file;
    int count = 1;
    std::optional<double> gamma;

    auto add_common = [&](CLI::App* sub, bool with_config = true) {
        if (with_config) {
            sub->add_option("--config", config_file, "run configuration JSON");
            sub->add_option("--preset", preset, "defaults preset: desk | paper")
                ->check(CLI::IsMember({"desk", "paper"}));
        }
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--out", out, "output directory");
    };

    auto* sample = app.add_subcommand("sample", "draw models from the prior");
    add_common(sample);
    sample->add_option("--count", count, "number of models");

    auto* verify = app.add_subcommand("verify", "check stability certificates of a model");
    verify->add_option("model", model_file, "model JSON file")->required();
    verify->add_option("--certificate", certificate_file, "external certificate JSON");
    verify->add_option("--gamma", gamma, "gain bound to test");

    auto* simulate = app.add_subcommand("simulate", "sample paths of a model");
    add_common(simulate);
    simulate->add_option("--model", model_file, "model JSON file")->required();

    auto* moments = app.add_subcommand("moments", "propagate first/second moments");
    add_common(moments);
    moments->add_option("--model", model_file, "model JSON file")->required();

    auto* make_data = app.add_subcommand("make-data", "generate a measurement dataset");
    add_common(make_data);
    make_data->add_option("--model", model_file, "model JSON file")->required();

    auto* infer = app.add_subcommand("infer", "run MCMC inference on a dataset");
    add_common(infer);
    infer->add_option("--dataset", dataset_dir, "dataset bundle directory")->required();

    auto* reproduce =
        app.add_subcommand("reproduce", "end-to-end experiment at desk scale");
    add_common(reproduce);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sample) return cmd_sample(resolve_config(config_file, preset, seed), count, out);
        if (*verify) {
            std::optional<std::filesystem::path> cert;
            if (!certificate_file.empty()) cert = certificate_file;
            return cmd_verify(model_file, cert, gamma);
        }
        if (*simulate)
            return cmd_simulate(resolve_config(config_file, preset, seed), model_file, out);
        if (*moments)
            return cmd_moments(resolve_config(config_file, preset, seed), model_file, out);
        if (*make_data)
            return cmd_make_data(resolve_config(config_file, preset, seed), model_file, out);
        if (*infer)
            return cmd_infer(resolve_config(config_file, preset, seed), dataset_dir, out);
        if (*reproduce)
            return cmd_reproduce(resolve_config(config_file, preset, seed), out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NonFiniteState& e) {
        std::cerr << "simulation diverged: " << e.what() << "\n";
        return kExitNonFinite;
    } catch (const NonFiniteMoments& e) {
        std::cerr << "moment propagation diverged: " << e.what() << "\n";
        return kExitNonFinite;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
