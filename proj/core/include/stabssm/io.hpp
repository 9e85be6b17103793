#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "stabssm/infer.hpp"
#include "stabssm/param.hpp"
#include "stabssm/sdesim.hpp"

namespace stabssm {

/// Serialized model document (schema "stable-ssm/v1"): dimensions, the six
/// matrices in row-major arrays, rho, and optionally gamma, the certificate
/// P and the generating parameter block.
struct ModelDocument {
    Ssm ssm;
    std::optional<double> gamma;
    std::optional<SpdMatrix> certificate;
    std::optional<BrlParams> params;
};

std::string model_to_json(const ModelDocument& doc);
ModelDocument model_from_json(const std::string& text);
void save_model(const std::filesystem::path& file, const ModelDocument& doc);
ModelDocument load_model(const std::filesystem::path& file);

/// Certificate documents hold a single SPD matrix.
void save_certificate(const std::filesystem::path& file, const SpdMatrix& p);
SpdMatrix load_certificate(const std::filesystem::path& file);

// CSV artifacts share the header `t,channel,stat,value`.
void write_path_csv(const std::filesystem::path& file, const TimeGrid& grid,
                    const MatrixXd& outputs, const std::string& stat = "y");
void write_ensemble_csv(const std::filesystem::path& file, const EnsembleSummary& summary);
void write_moments_csv(const std::filesystem::path& file, const MomentTrajectory& traj);

/// Dataset bundle: `dataset.json` (metadata, input spec, seed record) plus
/// `inputs.csv` and `outputs.csv` under the given directory.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

/// Chain artifacts: CSV of draws (iteration, log_post, coordinates) and a
/// JSON sidecar with kernel settings, seeds and rejection statistics.
void save_chain_csv(const std::filesystem::path& file, const Chain& chain);
void save_chain_metadata(const std::filesystem::path& file, const Chain& chain,
                         int n_iters);

}  // namespace stabssm
