#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "run_config.hpp"

namespace stabssm::cli {

// Exit codes shared by the subcommands:
//   0 success / all checks passed
//   2 config or input validation failure
//   3 internal certificate failure (indicates a bug)
//   4 verification check failed
//   5 simulation produced a non-finite state
//   6 inference accepted nothing (pathological settings)
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCertificate = 3;
inline constexpr int kExitCheckFailed = 4;
inline constexpr int kExitNonFinite = 5;
inline constexpr int kExitNoAcceptance = 6;

int cmd_sample(const RunConfig& cfg, int count, const std::filesystem::path& out);

int cmd_verify(const std::filesystem::path& model_file,
               const std::optional<std::filesystem::path>& certificate_file,
               std::optional<double> gamma);

int cmd_simulate(const RunConfig& cfg, const std::filesystem::path& model_file,
                 const std::filesystem::path& out);

int cmd_moments(const RunConfig& cfg, const std::filesystem::path& model_file,
                const std::filesystem::path& out);

int cmd_make_data(const RunConfig& cfg, const std::filesystem::path& model_file,
                  const std::filesystem::path& out);

int cmd_infer(const RunConfig& cfg, const std::filesystem::path& dataset_dir,
              const std::filesystem::path& out);

int cmd_reproduce(const RunConfig& cfg, const std::filesystem::path& out);

}  // namespace stabssm::cli
