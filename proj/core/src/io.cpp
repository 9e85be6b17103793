#include "stabssm/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace stabssm {

namespace {

using nlohmann::json;

constexpr const char* kModelSchema = "stable-ssm/v1";
constexpr const char* kDatasetSchema = "stable-ssm-dataset/v1";

json matrix_to_json(const MatrixXd& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(m.size());
    for (int i = 0; i < m.rows(); ++i)
        for (int k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
    j["data"] = std::move(data);
    return j;
}

MatrixXd matrix_from_json(const json& j) {
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();
    const auto& data = j.at("data");
    if (static_cast<int>(data.size()) != rows * cols)
        throw IoError("matrix: data length does not match rows*cols");
    MatrixXd m(rows, cols);
    int idx = 0;
    for (int i = 0; i < rows; ++i)
        for (int k = 0; k < cols; ++k) m(i, k) = data[idx++].get<double>();
    return m;
}

json vector_to_json(const VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

VectorXd vector_from_json(const json& j) {
    VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

json params_to_json(const BrlParams& p) {
    json j;
    j["P"] = matrix_to_json(p.p.matrix());
    j["Q"] = matrix_to_json(p.q.matrix());
    j["S_packed"] = vector_to_json(p.s.packed());
    j["Ftil"] = matrix_to_json(p.ftil);
    j["C"] = matrix_to_json(p.c);
    j["gamma"] = p.gamma;
    j["rho"] = p.rho;
    json gain;
    if (const auto* zf = std::get_if<ZFormGain>(&p.gain)) {
        gain["kind"] = "z";
        gain["Z"] = matrix_to_json(zf->z);
        if (zf->u) gain["U"] = matrix_to_json(*zf->u);
        if (zf->v) gain["V"] = matrix_to_json(*zf->v);
        if (zf->sigma) gain["sigma"] = vector_to_json(*zf->sigma);
    } else {
        const auto& sg = std::get<SplitGain>(p.gain);
        gain["kind"] = "split";
        gain["Btil"] = matrix_to_json(sg.btil);
        gain["D"] = matrix_to_json(sg.d);
        gain["Gtil"] = matrix_to_json(sg.gtil);
    }
    j["gain"] = std::move(gain);
    return j;
}

BrlParams params_from_json(const json& j) {
    SpdMatrix p = SpdMatrix::from_matrix(matrix_from_json(j.at("P")));
    SpdMatrix q = SpdMatrix::from_matrix(matrix_from_json(j.at("Q")));
    VectorXd s_packed = vector_from_json(j.at("S_packed"));
    SkewMatrix s(p.dim(), std::move(s_packed));
    MatrixXd ftil = matrix_from_json(j.at("Ftil"));
    MatrixXd c = matrix_from_json(j.at("C"));
    const json& gain = j.at("gain");
    GainBlock block = [&]() -> GainBlock {
        if (gain.at("kind").get<std::string>() == "z") {
            ZFormGain zf;
            zf.z = matrix_from_json(gain.at("Z"));
            if (gain.contains("U")) zf.u = matrix_from_json(gain.at("U"));
            if (gain.contains("V")) zf.v = matrix_from_json(gain.at("V"));
            if (gain.contains("sigma")) zf.sigma = vector_from_json(gain.at("sigma"));
            return zf;
        }
        return SplitGain{matrix_from_json(gain.at("Btil")), matrix_from_json(gain.at("D")),
                         matrix_from_json(gain.at("Gtil"))};
    }();
    return BrlParams{std::move(p),    std::move(q), std::move(s),
                     std::move(ftil), std::move(c), std::move(block),
                     j.at("gamma").get<double>(),   j.at("rho").get<double>()};
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot open for writing: " + file.string());
    out << text;
    if (!out) throw IoError("write failed: " + file.string());
}

std::string read_text(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open: " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Fixed-width round-trip formatting keeps CSV artifacts byte-identical
// across reruns.
std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

json input_to_json(const InputSignal& u) {
    json j;
    if (const auto* f = u.as_fourier()) {
        j["kind"] = "fourier";
        j["period"] = f->period;
        j["a"] = matrix_to_json(f->a);
        j["b"] = matrix_to_json(f->b);
    } else if (const auto* t = u.as_tabulated()) {
        j["kind"] = "tabulated";
        j["t0"] = t->grid.t0;
        j["t1"] = t->grid.t1;
        j["dt"] = t->grid.dt;
        j["values"] = matrix_to_json(t->values);
    } else {
        j["kind"] = "zero";
        j["channels"] = u.channels();
    }
    return j;
}

InputSignal input_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "fourier")
        return InputSignal::fourier(matrix_from_json(j.at("a")), matrix_from_json(j.at("b")),
                                    j.at("period").get<double>());
    if (kind == "tabulated")
        return InputSignal::tabulated(
            TimeGrid(j.at("t0").get<double>(), j.at("t1").get<double>(),
                     j.at("dt").get<double>()),
            matrix_from_json(j.at("values")));
    if (kind == "zero") return InputSignal::zero(j.at("channels").get<int>());
    throw IoError("unknown input kind: " + kind);
}

}  // namespace

std::string model_to_json(const ModelDocument& doc) {
    doc.ssm.check_dims();
    json j;
    j["schema"] = kModelSchema;
    j["dims"] = {{"n", doc.ssm.n}, {"l", doc.ssm.l}, {"q", doc.ssm.q}};
    j["rho"] = doc.ssm.rho;
    if (doc.gamma) j["gamma"] = *doc.gamma;
    json mats;
    mats["A"] = matrix_to_json(doc.ssm.A);
    mats["B"] = matrix_to_json(doc.ssm.B);
    mats["C"] = matrix_to_json(doc.ssm.C);
    mats["D"] = matrix_to_json(doc.ssm.D);
    mats["F"] = matrix_to_json(doc.ssm.F);
    mats["G"] = matrix_to_json(doc.ssm.G);
    j["matrices"] = std::move(mats);
    if (doc.certificate) j["certificate"] = matrix_to_json(doc.certificate->matrix());
    if (doc.params) j["params"] = params_to_json(*doc.params);
    return j.dump(2);
}

ModelDocument model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("model JSON parse error: ") + e.what());
    }
    try {
        if (j.at("schema").get<std::string>() != kModelSchema)
            throw IoError("model JSON: unexpected schema field");
        ModelDocument doc;
        doc.ssm.n = j.at("dims").at("n").get<int>();
        doc.ssm.l = j.at("dims").at("l").get<int>();
        doc.ssm.q = j.at("dims").at("q").get<int>();
        doc.ssm.rho = j.at("rho").get<double>();
        const json& mats = j.at("matrices");
        doc.ssm.A = matrix_from_json(mats.at("A"));
        doc.ssm.B = matrix_from_json(mats.at("B"));
        doc.ssm.C = matrix_from_json(mats.at("C"));
        doc.ssm.D = matrix_from_json(mats.at("D"));
        doc.ssm.F = matrix_from_json(mats.at("F"));
        doc.ssm.G = matrix_from_json(mats.at("G"));
        doc.ssm.check_dims();
        if (j.contains("gamma")) doc.gamma = j.at("gamma").get<double>();
        if (j.contains("certificate"))
            doc.certificate = SpdMatrix::from_matrix(matrix_from_json(j.at("certificate")));
        if (j.contains("params")) doc.params = params_from_json(j.at("params"));
        return doc;
    } catch (const json::exception& e) {
        throw IoError(std::string("model JSON: ") + e.what());
    }
}

void save_model(const std::filesystem::path& file, const ModelDocument& doc) {
    write_text(file, model_to_json(doc) + "\n");
}

ModelDocument load_model(const std::filesystem::path& file) {
    return model_from_json(read_text(file));
}

void save_certificate(const std::filesystem::path& file, const SpdMatrix& p) {
    json j;
    j["schema"] = kModelSchema;
    j["P"] = matrix_to_json(p.matrix());
    write_text(file, j.dump(2) + "\n");
}

SpdMatrix load_certificate(const std::filesystem::path& file) {
    try {
        json j = json::parse(read_text(file));
        return SpdMatrix::from_matrix(matrix_from_json(j.at("P")));
    } catch (const json::exception& e) {
        throw IoError(std::string("certificate JSON: ") + e.what());
    }
}

void write_path_csv(const std::filesystem::path& file, const TimeGrid& grid,
                    const MatrixXd& outputs, const std::string& stat) {
    if (outputs.cols() != grid.size())
        throw DimensionMismatch("write_path_csv: columns must match grid size");
    std::ostringstream out;
    out << "t,channel,stat,value\n";
    for (int k = 0; k < grid.size(); ++k)
        for (int c = 0; c < outputs.rows(); ++c)
            out << fmt(grid.time(k)) << ',' << c << ',' << stat << ','
                << fmt(outputs(c, k)) << '\n';
    write_text(file, out.str());
}

void write_ensemble_csv(const std::filesystem::path& file, const EnsembleSummary& summary) {
    std::ostringstream out;
    out << "t,channel,stat,value\n";
    for (int k = 0; k < summary.grid.size(); ++k)
        for (int c = 0; c < summary.mean.rows(); ++c) {
            out << fmt(summary.grid.time(k)) << ',' << c << ",mean,"
                << fmt(summary.mean(c, k)) << '\n';
            out << fmt(summary.grid.time(k)) << ',' << c << ",var,"
                << fmt(summary.var(c, k)) << '\n';
        }
    write_text(file, out.str());
}

void write_moments_csv(const std::filesystem::path& file, const MomentTrajectory& traj) {
    if (traj.out_mean.size() == 0)
        throw DomainError("write_moments_csv: trajectory lacks output moments");
    std::ostringstream out;
    out << "t,channel,stat,value\n";
    for (int k = 0; k < traj.grid.size(); ++k)
        for (int c = 0; c < traj.out_mean.rows(); ++c) {
            out << fmt(traj.grid.time(k)) << ',' << c << ",mean,"
                << fmt(traj.out_mean(c, k)) << '\n';
            out << fmt(traj.grid.time(k)) << ',' << c << ",var,"
                << fmt(traj.out_cov[k](c, c)) << '\n';
        }
    write_text(file, out.str());
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    std::filesystem::create_directories(dir);
    json j;
    j["schema"] = kDatasetSchema;
    j["dims"] = {{"n", ds.n}, {"l", ds.l}, {"q", ds.q}};
    j["x0"] = vector_to_json(ds.x0);
    j["sigma"] = ds.sigma;
    j["meas_times"] = ds.meas_times;
    j["experiments"] = ds.experiments();
    j["seed"] = ds.seed;
    j["stream"] = ds.stream;
    j["sim"] = {{"t0", ds.sim_grid.t0}, {"t1", ds.sim_grid.t1}, {"dt", ds.sim_grid.dt}};
    j["input"] = input_to_json(ds.input_signal);
    write_text(dir / "dataset.json", j.dump(2) + "\n");

    std::ostringstream in_csv;
    in_csv << "t,channel,value\n";
    for (int i = 0; i < ds.times(); ++i)
        for (int c = 0; c < ds.l; ++c)
            in_csv << fmt(ds.meas_times[i]) << ',' << c << ',' << fmt(ds.inputs(c, i))
                   << '\n';
    write_text(dir / "inputs.csv", in_csv.str());

    std::ostringstream out_csv;
    out_csv << "t,realization,channel,value\n";
    for (int m = 0; m < ds.experiments(); ++m)
        for (int i = 0; i < ds.times(); ++i)
            for (int c = 0; c < ds.q; ++c)
                out_csv << fmt(ds.meas_times[i]) << ',' << m << ',' << c << ','
                        << fmt(ds.outputs[m](c, i)) << '\n';
    write_text(dir / "outputs.csv", out_csv.str());
}

Dataset load_dataset(const std::filesystem::path& dir) {
    json j;
    try {
        j = json::parse(read_text(dir / "dataset.json"));
        if (j.at("schema").get<std::string>() != kDatasetSchema)
            throw IoError("dataset JSON: unexpected schema field");
        Dataset ds;
        ds.n = j.at("dims").at("n").get<int>();
        ds.l = j.at("dims").at("l").get<int>();
        ds.q = j.at("dims").at("q").get<int>();
        ds.x0 = vector_from_json(j.at("x0"));
        ds.sigma = j.at("sigma").get<double>();
        ds.meas_times = j.at("meas_times").get<std::vector<double>>();
        ds.seed = j.at("seed").get<std::uint64_t>();
        ds.stream = j.at("stream").get<std::uint64_t>();
        ds.sim_grid = TimeGrid(j.at("sim").at("t0").get<double>(),
                               j.at("sim").at("t1").get<double>(),
                               j.at("sim").at("dt").get<double>());
        ds.input_signal = input_from_json(j.at("input"));
        const int m = j.at("experiments").get<int>();
        const int nt = ds.times();

        ds.inputs = MatrixXd::Zero(ds.l, nt);
        ds.outputs.assign(m, MatrixXd::Zero(ds.q, nt));
        std::ifstream in(dir / "inputs.csv");
        if (!in) throw IoError("dataset: missing inputs.csv");
        std::string line;
        std::getline(in, line);  // header
        int row = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            double t, value;
            int c;
            if (std::sscanf(line.c_str(), "%lf,%d,%lf", &t, &c, &value) != 3)
                throw IoError("dataset: malformed inputs.csv row");
            ds.inputs(c, row / ds.l) = value;
            ++row;
        }
        std::ifstream outf(dir / "outputs.csv");
        if (!outf) throw IoError("dataset: missing outputs.csv");
        std::getline(outf, line);
        while (std::getline(outf, line)) {
            if (line.empty()) continue;
            double t, value;
            int r, c;
            if (std::sscanf(line.c_str(), "%lf,%d,%d,%lf", &t, &r, &c, &value) != 4)
                throw IoError("dataset: malformed outputs.csv row");
            int col = -1;
            for (int idx = 0; idx < nt; ++idx)
                if (std::abs(ds.meas_times[idx] - t) < 1e-9) {
                    col = idx;
                    break;
                }
            if (col < 0 || r < 0 || r >= m) throw IoError("dataset: row out of range");
            ds.outputs[r](c, col) = value;
        }
        return ds;
    } catch (const json::exception& e) {
        throw IoError(std::string("dataset JSON: ") + e.what());
    }
}

void save_chain_csv(const std::filesystem::path& file, const Chain& chain) {
    std::ostringstream out;
    out << "iteration,log_post";
    const int dim = chain.draws.empty() ? 0 : static_cast<int>(chain.draws.front().size());
    for (int c = 0; c < dim; ++c) out << ",c" << c;
    out << '\n';
    for (int it = 0; it < chain.length(); ++it) {
        out << it << ',' << fmt(chain.log_posts[it]);
        for (int c = 0; c < dim; ++c) out << ',' << fmt(chain.draws[it](c));
        out << '\n';
    }
    write_text(file, out.str());
}

void save_chain_metadata(const std::filesystem::path& file, const Chain& chain,
                         int n_iters) {
    json j;
    j["kernel"] = chain.kernel;
    j["iterations"] = n_iters;
    j["step_size"] = chain.step_size;
    j["n_leapfrog"] = chain.n_leapfrog;
    j["proposal_scale"] = chain.proposal_scale;
    j["acceptance_rate"] = chain.acceptance_rate;
    j["forced_rejections"] = chain.forced_rejections;
    j["divergences"] = chain.divergences;
    j["max_abs_dh"] = chain.max_abs_dh;
    j["seed"] = chain.seed;
    j["stream"] = chain.stream;
    write_text(file, j.dump(2) + "\n");
}

}  // namespace stabssm
