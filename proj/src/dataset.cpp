#include "divide/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace divide {

bool MultiViewDataset::all_present() const {
    if (present.empty()) return true;
    for (const auto& row : present)
        for (bool p : row)
            if (!p) return false;
    return true;
}

std::size_t MultiViewDataset::complete_count() const {
    if (present.empty()) return samples();
    std::size_t n = 0;
    for (const auto& row : present)
        if (std::all_of(row.begin(), row.end(), [](bool p) { return p; })) ++n;
    return n;
}

int MultiViewDataset::num_classes() const {
    int mx = -1;
    for (int l : labels) mx = std::max(mx, l);
    return mx + 1;
}

void MultiViewDataset::validate() const {
    if (views.empty()) throw DataError("dataset: no views");
    const std::size_t n = views[0].rows();
    for (std::size_t v = 0; v < views.size(); ++v)
        if (views[v].rows() != n)
            throw DataError("dataset: view " + std::to_string(v) + " has " +
                            std::to_string(views[v].rows()) + " rows, expected " + std::to_string(n));
    if (!labels.empty()) {
        if (labels.size() != n) throw DataError("dataset: label count does not match sample count");
        for (int l : labels)
            if (l < 0) throw DataError("dataset: negative class label");
    }
    if (!present.empty()) {
        if (present.size() != n) throw DataError("dataset: mask row count mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            if (present[i].size() != views.size()) throw DataError("dataset: mask width mismatch");
            if (std::none_of(present[i].begin(), present[i].end(), [](bool p) { return p; }))
                throw DataError("dataset: sample " + std::to_string(i) + " has no present view");
        }
    }
    for (const auto& v : views) check_finite(v, "dataset view");
}

void SyntheticSpec::validate() const {
    if (n == 0 || clusters == 0 || latent_dim == 0)
        throw InvalidParameterError("synthetic spec: sizes must be positive");
    if (clusters > n) throw InvalidParameterError("synthetic spec: clusters exceed sample count");
    if (clusters > latent_dim)
        throw InvalidParameterError("synthetic spec: latent_dim must be >= clusters (simplex means)");
    if (view_dims.empty() || view_dims.size() != view_noise.size())
        throw InvalidParameterError("synthetic spec: view_dims/view_noise length mismatch");
    for (std::size_t d : view_dims)
        if (d == 0) throw InvalidParameterError("synthetic spec: zero view dim");
    for (double s : view_noise)
        if (!(s >= 0.0)) throw InvalidParameterError("synthetic spec: negative view noise");
    if (!(separation > 0.0) || !(latent_noise >= 0.0))
        throw InvalidParameterError("synthetic spec: separation/noise out of range");
}

MultiViewDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    // Fixed linear map per view, drawn before any sample data.
    std::vector<Matrix> maps;
    for (std::size_t d : spec.view_dims) {
        Matrix w(spec.latent_dim, d);
        const double scale = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));
        for (double& x : w.data()) x = rng.normal() * scale;
        maps.push_back(std::move(w));
    }

    // Balanced labels, shuffled.
    std::vector<int> labels(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) labels[i] = static_cast<int>(i % spec.clusters);
    rng.shuffle(labels);

    // Cluster means on a scaled simplex: separation * e_c in latent space.
    Matrix latent(spec.n, spec.latent_dim);
    for (std::size_t i = 0; i < spec.n; ++i) {
        double* zi = latent.row_ptr(i);
        for (std::size_t j = 0; j < spec.latent_dim; ++j) zi[j] = rng.normal() * spec.latent_noise;
        zi[static_cast<std::size_t>(labels[i])] += spec.separation;
    }

    MultiViewDataset ds;
    for (std::size_t v = 0; v < spec.view_dims.size(); ++v) {
        Matrix x = matmul(latent, maps[v]);
        for (double& val : x.data()) val += rng.normal() * spec.view_noise[v];
        ds.views.push_back(std::move(x));
    }
    ds.labels = std::move(labels);
    ds.validate();
    return ds;
}

MultiViewDataset simulate_missing(const MultiViewDataset& ds, double eta, std::uint64_t seed) {
    if (!(eta >= 0.0 && eta < 1.0))
        throw InvalidParameterError("simulate_missing: eta must be in [0, 1)");
    if (!ds.all_present()) throw DataError("simulate_missing: dataset already has missing views");
    if (ds.view_count() < 2) throw DataError("simulate_missing: need at least two views");
    const std::size_t n = ds.samples();
    const std::size_t m = static_cast<std::size_t>(std::llround(eta * static_cast<double>(n)));

    MultiViewDataset out = ds;
    out.present.assign(n, std::vector<bool>(ds.view_count(), true));
    if (m == 0) return out;

    Rng rng(seed);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    for (std::size_t s = 0; s < m; ++s) {
        const std::size_t i = idx[s];
        const std::size_t v = static_cast<std::size_t>(rng.uniform_index(ds.view_count()));
        out.present[i][v] = false;
        // Zero the hidden features so they can never leak through a bug.
        for (std::size_t j = 0; j < out.views[v].cols(); ++j) out.views[v](i, j) = 0.0;
    }
    return out;
}

Matrix read_matrix_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw DataError("non-numeric cell in " + path + ": '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError("ragged rows in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("empty matrix file " + path);
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].begin(), rows[i].end(), m.row_ptr(i));
    return m;
}

void write_matrix_csv_file(const std::string& path, const Matrix& m) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path + " for writing");
    char buf[32];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
            os << buf << (j + 1 < m.cols() ? "," : "");
        }
        os << "\n";
    }
}

namespace {
constexpr char kMatrixMagic[8] = {'D', 'I', 'V', 'M', 'A', 'T', '1', '\0'};
}

Matrix read_matrix_bin(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMatrixMagic, 8) != 0)
        throw DataError(path + " is not a packed matrix file");
    std::uint64_t r = 0, c = 0;
    is.read(reinterpret_cast<char*>(&r), 8);
    is.read(reinterpret_cast<char*>(&c), 8);
    Matrix m(r, c);
    is.read(reinterpret_cast<char*>(m.data().data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) throw DataError(path + " truncated");
    return m;
}

void write_matrix_bin(const std::string& path, const Matrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os.write(kMatrixMagic, 8);
    const std::uint64_t r = m.rows(), c = m.cols();
    os.write(reinterpret_cast<const char*>(&r), 8);
    os.write(reinterpret_cast<const char*>(&c), 8);
    os.write(reinterpret_cast<const char*>(m.data().data()),
             static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix read_matrix_file(const std::string& path) {
    return fs::path(path).extension() == ".bin" ? read_matrix_bin(path) : read_matrix_csv(path);
}

void write_matrix_file(const std::string& path, const Matrix& m) {
    if (fs::path(path).extension() == ".bin")
        write_matrix_bin(path, m);
    else
        write_matrix_csv_file(path, m);
}

MultiViewDataset load_dataset(const std::string& dir) {
    const fs::path root(dir);
    const fs::path manifest_path = root / "manifest.json";
    std::ifstream is(manifest_path);
    if (!is) throw DataError("missing manifest: " + manifest_path.string());
    json manifest;
    try {
        is >> manifest;
    } catch (const json::exception& e) {
        throw DataError("bad manifest " + manifest_path.string() + ": " + e.what());
    }

    MultiViewDataset ds;
    const std::size_t n = manifest.at("n").get<std::size_t>();
    for (const auto& view : manifest.at("views")) {
        const std::string file = view.at("file").get<std::string>();
        Matrix m = read_matrix_file((root / file).string());
        if (m.rows() != n)
            throw DataError(file + " has " + std::to_string(m.rows()) + " rows, manifest says " +
                            std::to_string(n));
        if (view.contains("dim") && m.cols() != view.at("dim").get<std::size_t>())
            throw DataError(file + " has " + std::to_string(m.cols()) +
                            " columns, manifest disagrees");
        ds.views.push_back(std::move(m));
    }
    if (manifest.contains("labels") && !manifest.at("labels").is_null()) {
        const Matrix lm = read_matrix_csv((root / manifest.at("labels").get<std::string>()).string());
        if (lm.cols() != 1 || lm.rows() != n) throw DataError("labels file shape mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            const double v = lm(i, 0);
            if (v != std::floor(v)) throw DataError("non-integer class label at row " + std::to_string(i));
            ds.labels.push_back(static_cast<int>(v));
        }
    }
    if (manifest.contains("mask") && !manifest.at("mask").is_null()) {
        const Matrix mm = read_matrix_csv((root / manifest.at("mask").get<std::string>()).string());
        if (mm.rows() != n || mm.cols() != ds.views.size()) throw DataError("mask file shape mismatch");
        ds.present.assign(n, std::vector<bool>(ds.views.size(), true));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t v = 0; v < ds.views.size(); ++v) ds.present[i][v] = mm(i, v) != 0.0;
    }
    ds.validate();
    return ds;
}

void save_dataset(const std::string& dir, const MultiViewDataset& ds) {
    ds.validate();
    const fs::path root(dir);
    fs::create_directories(root);
    json manifest;
    manifest["n"] = ds.samples();
    manifest["views"] = json::array();
    for (std::size_t v = 0; v < ds.view_count(); ++v) {
        const std::string file = "view" + std::to_string(v) + ".csv";
        write_matrix_csv_file((root / file).string(), ds.views[v]);
        manifest["views"].push_back({{"file", file}, {"dim", ds.views[v].cols()}});
    }
    if (ds.has_labels()) {
        Matrix lm(ds.samples(), 1);
        for (std::size_t i = 0; i < ds.samples(); ++i) lm(i, 0) = ds.labels[i];
        write_matrix_csv_file((root / "labels.csv").string(), lm);
        manifest["labels"] = "labels.csv";
    }
    if (!ds.present.empty()) {
        Matrix mm(ds.samples(), ds.view_count());
        for (std::size_t i = 0; i < ds.samples(); ++i)
            for (std::size_t v = 0; v < ds.view_count(); ++v) mm(i, v) = ds.present[i][v] ? 1.0 : 0.0;
        write_matrix_csv_file((root / "mask.csv").string(), mm);
        manifest["mask"] = "mask.csv";
    }
    std::ofstream os(root / "manifest.json");
    os << manifest.dump(2) << "\n";
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open spec file " + path);
    SyntheticSpec spec;
    std::string line;
    std::size_t lineno = 0;
    auto parse_list_sz = [](const std::string& s) {
        std::vector<std::size_t> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(std::stoul(cell));
        return out;
    };
    auto parse_list_d = [](const std::string& s) {
        std::vector<double> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
        return out;
    };
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "n") spec.n = std::stoul(val);
            else if (key == "clusters") spec.clusters = std::stoul(val);
            else if (key == "latent_dim") spec.latent_dim = std::stoul(val);
            else if (key == "view_dims") spec.view_dims = parse_list_sz(val);
            else if (key == "view_noise") spec.view_noise = parse_list_d(val);
            else if (key == "latent_noise") spec.latent_noise = std::stod(val);
            else if (key == "separation") spec.separation = std::stod(val);
            else if (key == "seed") spec.seed = std::stoull(val);
            else throw ConfigError(path + ": unknown key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": bad value for " + key);
        }
    }
    spec.validate();
    return spec;
}

}  // namespace divide
