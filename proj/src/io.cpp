#include "podnet/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "podnet/common.hpp"

namespace podnet {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kNetMagic[8] = {'P', 'O', 'D', 'N', 'N', 'E', 'T', '1'};
constexpr const char* kBasisMagic = "podnet-basis v1";

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<double> parse_csv_doubles(const std::string& line) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str()) throw Error("parse: bad number '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    if (!os) throw Error("cannot open for writing: " + path);
    return os;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
    std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
    if (!is) throw Error("cannot open for reading: " + path);
    return is;
}

void finish(std::ofstream& os, const std::string& path) {
    os.flush();
    if (!os) throw Error("write failed: " + path);
}

template <typename T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is, const std::string& path) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw Error("truncated file: " + path);
    return v;
}

}  // namespace

void write_field_csv(const std::string& path, const StructuredMesh& mesh,
                     const Eigen::VectorXd& full) {
    if (full.size() != mesh.n_nodes()) throw Error("write_field_csv: size mismatch");
    std::ofstream os = open_out(path);
    os << "x,y,value\n";
    for (int k = 0; k < mesh.n_nodes(); ++k) {
        const auto [x, y] = mesh.node_coord(k);
        os << fmt(x) << ',' << fmt(y) << ',' << fmt(full[k]) << '\n';
    }
    finish(os, path);
}

Eigen::VectorXd read_field_csv(const std::string& path, const StructuredMesh& mesh) {
    std::ifstream is = open_in(path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("x,y,value", 0) != 0)
        throw Error("read_field_csv: missing header in " + path);
    Eigen::VectorXd out(mesh.n_nodes());
    for (int k = 0; k < mesh.n_nodes(); ++k) {
        if (!std::getline(is, line)) throw Error("read_field_csv: truncated " + path);
        const auto vals = parse_csv_doubles(line);
        if (vals.size() != 3) throw Error("read_field_csv: bad row in " + path);
        out[k] = vals[2];
    }
    while (std::getline(is, line))
        if (!line.empty()) throw Error("read_field_csv: row count does not match mesh in " + path);
    return out;
}

void write_field_pgm(const std::string& path, const StructuredMesh& mesh,
                     const Eigen::VectorXd& full) {
    if (full.size() != mesh.n_nodes()) throw Error("write_field_pgm: size mismatch");
    const double lo = full.minCoeff();
    const double hi = full.maxCoeff();
    const double span = hi - lo;
    std::ofstream os = open_out(path, true);
    os << "P5\n" << (mesh.nx + 1) << ' ' << (mesh.ny + 1) << "\n255\n";
    for (int j = mesh.ny; j >= 0; --j)
        for (int i = 0; i <= mesh.nx; ++i) {
            const double v = full[mesh.node_id(i, j)];
            const int g = span > 0.0 ? static_cast<int>(255.0 * (v - lo) / span + 0.5) : 0;
            os.put(static_cast<char>(g < 0 ? 0 : (g > 255 ? 255 : g)));
        }
    finish(os, path);
}

void write_perm_csv(const std::string& path, const PermField& field) {
    std::ofstream os = open_out(path);
    for (int j = 0; j < field.ny; ++j) {
        for (int i = 0; i < field.nx; ++i) {
            if (i) os << ',';
            os << fmt(field.values[static_cast<std::size_t>(j) * field.nx + i]);
        }
        os << '\n';
    }
    finish(os, path);
}

void write_perm_sidecar(const std::string& path, const PermField& field) {
    ordered_json j;
    j["nx"] = field.nx;
    j["ny"] = field.ny;
    j["contrast"] = field.contrast;
    j["seed"] = field.seed;
    j["channels"] = ordered_json::array();
    for (const ChannelSpec& c : field.channels)
        j["channels"].push_back({{"entry_y", c.entry_y},
                                 {"amplitude", c.amplitude},
                                 {"frequency", c.frequency},
                                 {"thickness", c.thickness},
                                 {"phase", c.phase}});
    write_text_file(path, j.dump(2) + "\n");
}

PermField read_perm(const std::string& csv_path, const std::string& sidecar_path) {
    ordered_json j = ordered_json::parse(read_text_file(sidecar_path));
    PermField field;
    field.nx = j.at("nx").get<int>();
    field.ny = j.at("ny").get<int>();
    field.contrast = j.at("contrast").get<double>();
    field.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& c : j.at("channels")) {
        ChannelSpec spec;
        spec.entry_y = c.at("entry_y").get<double>();
        spec.amplitude = c.at("amplitude").get<double>();
        spec.frequency = c.at("frequency").get<double>();
        spec.thickness = c.at("thickness").get<double>();
        spec.phase = c.at("phase").get<double>();
        field.channels.push_back(spec);
    }

    std::ifstream is = open_in(csv_path);
    field.values.reserve(static_cast<std::size_t>(field.nx) * field.ny);
    std::string line;
    for (int j2 = 0; j2 < field.ny; ++j2) {
        if (!std::getline(is, line)) throw Error("read_perm: truncated " + csv_path);
        const auto vals = parse_csv_doubles(line);
        if (static_cast<int>(vals.size()) != field.nx)
            throw Error("read_perm: bad row width in " + csv_path);
        field.values.insert(field.values.end(), vals.begin(), vals.end());
    }
    return field;
}

void write_basis_bundle(const std::string& path, const PodBasis& pod, const NodalBasis& basis,
                        const StructuredMesh& mesh) {
    if (basis.psi.rows() != mesh.n_interior())
        throw Error("write_basis_bundle: basis does not match mesh");
    const int m = basis.n_modes();
    std::ofstream os = open_out(path);
    os << kBasisMagic << '\n';
    os << mesh.nx << ' ' << mesh.ny << ' ' << mesh.n_interior() << ' ' << m << '\n';
    for (int j = 0; j < pod.sigma.size(); ++j) os << (j ? "," : "") << fmt(pod.sigma[j]);
    os << '\n';
    for (std::size_t k = 0; k < basis.nodes.size(); ++k)
        os << (k ? "," : "") << basis.nodes[k];
    os << '\n';
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c)
            os << ((r + c) ? "," : "") << fmt(basis.alpha(r, c));
    os << '\n';
    for (int c = 0; c < m; ++c) {
        for (Eigen::Index r = 0; r < basis.psi.rows(); ++r)
            os << (r ? "," : "") << fmt(basis.psi(r, c));
        os << '\n';
    }
    finish(os, path);
}

BasisBundle read_basis_bundle(const std::string& path, const StructuredMesh& mesh) {
    std::ifstream is = open_in(path);
    std::string line;
    if (!std::getline(is, line) || line != kBasisMagic)
        throw Error("read_basis_bundle: bad header in " + path);
    if (!std::getline(is, line)) throw Error("read_basis_bundle: truncated " + path);
    int nx, ny, n_int, m;
    {
        std::stringstream ss(line);
        if (!(ss >> nx >> ny >> n_int >> m))
            throw Error("read_basis_bundle: bad dimensions in " + path);
    }
    if (nx != mesh.nx || ny != mesh.ny || n_int != mesh.n_interior())
        throw Error("read_basis_bundle: bundle does not match mesh");

    BasisBundle out;
    out.nx = nx;
    out.ny = ny;
    if (!std::getline(is, line)) throw Error("read_basis_bundle: truncated " + path);
    {
        const auto vals = parse_csv_doubles(line);
        if (static_cast<int>(vals.size()) != m)
            throw Error("read_basis_bundle: sigma count mismatch");
        out.sigma = Eigen::Map<const Eigen::VectorXd>(vals.data(), m);
    }
    if (!std::getline(is, line)) throw Error("read_basis_bundle: truncated " + path);
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.basis.nodes.push_back(std::stoi(tok));
        if (static_cast<int>(out.basis.nodes.size()) != m)
            throw Error("read_basis_bundle: node count mismatch");
    }
    if (!std::getline(is, line)) throw Error("read_basis_bundle: truncated " + path);
    {
        const auto vals = parse_csv_doubles(line);
        if (static_cast<int>(vals.size()) != m * m)
            throw Error("read_basis_bundle: alpha size mismatch");
        out.basis.alpha.resize(m, m);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c)
                out.basis.alpha(r, c) = vals[static_cast<std::size_t>(r) * m + c];
    }
    out.basis.psi.resize(n_int, m);
    for (int c = 0; c < m; ++c) {
        if (!std::getline(is, line)) throw Error("read_basis_bundle: truncated " + path);
        const auto vals = parse_csv_doubles(line);
        if (static_cast<int>(vals.size()) != n_int)
            throw Error("read_basis_bundle: basis column size mismatch");
        for (int r = 0; r < n_int; ++r) out.basis.psi(r, c) = vals[static_cast<std::size_t>(r)];
    }
    for (int node : out.basis.nodes) {
        if (node < 0 || node >= mesh.n_nodes() ||
            mesh.interior_index[static_cast<std::size_t>(node)] < 0)
            throw Error("read_basis_bundle: invalid observation node");
        out.basis.node_rows.push_back(mesh.interior_index[static_cast<std::size_t>(node)]);
    }
    return out;
}

void write_network_bundle(const std::string& path, const Network& net) {
    std::ofstream os = open_out(path, true);
    os.write(kNetMagic, sizeof(kNetMagic));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(net.dims.size()));
    for (int d : net.dims) put<std::int32_t>(os, d);
    put<std::uint8_t>(os, net.leaky_output ? 1 : 0);
    put<double>(os, net.hidden_slope);
    put<std::uint64_t>(os, net.seed);
    put<std::uint8_t>(os, net.has_stats() ? 1 : 0);
    auto put_vec = [&os](const Eigen::VectorXd& v) {
        os.write(reinterpret_cast<const char*>(v.data()),
                 static_cast<std::streamsize>(sizeof(double)) * v.size());
    };
    if (net.has_stats()) {
        put_vec(net.x_mean);
        put_vec(net.x_scale);
        put_vec(net.y_mean);
        put_vec(net.y_scale);
    }
    for (int l = 0; l < net.n_layers(); ++l) {
        const auto& W = net.W[static_cast<std::size_t>(l)];
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c) put<double>(os, W(r, c));
        put_vec(net.b[static_cast<std::size_t>(l)]);
    }
    finish(os, path);
}

Network read_network_bundle(const std::string& path) {
    std::ifstream is = open_in(path, true);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kNetMagic, sizeof(kNetMagic)) != 0)
        throw Error("read_network_bundle: bad magic in " + path);
    const auto ndims = get<std::uint32_t>(is, path);
    if (ndims < 2 || ndims > 64) throw Error("read_network_bundle: bad layer count");
    Network net;
    for (std::uint32_t i = 0; i < ndims; ++i) {
        const auto d = get<std::int32_t>(is, path);
        if (d < 1) throw Error("read_network_bundle: bad dimension");
        net.dims.push_back(d);
    }
    net.leaky_output = get<std::uint8_t>(is, path) != 0;
    net.hidden_slope = get<double>(is, path);
    net.seed = get<std::uint64_t>(is, path);
    const bool has_stats = get<std::uint8_t>(is, path) != 0;
    auto get_vec = [&is, &path](Eigen::Index n) {
        Eigen::VectorXd v(n);
        is.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(sizeof(double)) * n);
        if (!is) throw Error("truncated file: " + path);
        return v;
    };
    if (has_stats) {
        net.x_mean = get_vec(net.dims.front());
        net.x_scale = get_vec(net.dims.front());
        net.y_mean = get_vec(net.dims.back());
        net.y_scale = get_vec(net.dims.back());
    }
    for (std::size_t l = 0; l + 1 < net.dims.size(); ++l) {
        Eigen::MatrixXd W(net.dims[l + 1], net.dims[l]);
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = get<double>(is, path);
        net.W.push_back(std::move(W));
        net.b.push_back(get_vec(net.dims[l + 1]));
        if (!net.W.back().allFinite() || !net.b.back().allFinite())
            throw Error("read_network_bundle: non-finite parameters in " + path);
    }
    return net;
}

std::string network_to_json(const Network& net) {
    ordered_json j;
    j["format"] = "podnet-net";
    j["version"] = 1;
    j["dims"] = net.dims;
    j["hidden_slope"] = net.hidden_slope;
    j["leaky_output"] = net.leaky_output;
    j["seed"] = net.seed;
    if (net.has_stats()) {
        auto vec = [](const Eigen::VectorXd& v) {
            return std::vector<double>(v.data(), v.data() + v.size());
        };
        j["normalization"] = {{"x_mean", vec(net.x_mean)},
                              {"x_scale", vec(net.x_scale)},
                              {"y_mean", vec(net.y_mean)},
                              {"y_scale", vec(net.y_scale)}};
    } else {
        j["normalization"] = nullptr;
    }
    j["layers"] = ordered_json::array();
    for (int l = 0; l < net.n_layers(); ++l) {
        const auto& W = net.W[static_cast<std::size_t>(l)];
        ordered_json rows = ordered_json::array();
        for (Eigen::Index r = 0; r < W.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(W.cols()));
            for (Eigen::Index c = 0; c < W.cols(); ++c) row[static_cast<std::size_t>(c)] = W(r, c);
            rows.push_back(row);
        }
        const auto& b = net.b[static_cast<std::size_t>(l)];
        j["layers"].push_back(
            {{"W", rows}, {"b", std::vector<double>(b.data(), b.data() + b.size())}});
    }
    return j.dump(2) + "\n";
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
    data.validate();
    std::ofstream os = open_out(path);
    os << "provenance,run,step";
    for (Eigen::Index i = 0; i < data.X.rows(); ++i) os << ",x" << i;
    for (Eigen::Index i = 0; i < data.Y.rows(); ++i) os << ",y" << i;
    os << '\n';
    for (int j = 0; j < data.size(); ++j) {
        const bool obs =
            !data.tags.empty() && data.tags[static_cast<std::size_t>(j)] == Provenance::observation;
        os << (obs ? "observation" : "simulation");
        os << ',' << (data.run_ids.empty() ? -1 : data.run_ids[static_cast<std::size_t>(j)]);
        os << ',' << (data.step_ids.empty() ? -1 : data.step_ids[static_cast<std::size_t>(j)]);
        for (Eigen::Index i = 0; i < data.X.rows(); ++i) os << ',' << fmt(data.X(i, j));
        for (Eigen::Index i = 0; i < data.Y.rows(); ++i) os << ',' << fmt(data.Y(i, j));
        os << '\n';
    }
    finish(os, path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream is = open_in(path, true);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os = open_out(path, true);
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    finish(os, path);
}

}  // namespace podnet
