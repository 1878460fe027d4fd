#include "podnet/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "podnet/common.hpp"
#include "podnet/io.hpp"

namespace podnet {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kSaltField = 0x6578702e666c6400ULL;
constexpr std::uint64_t kSaltPerturbField = 0x6578702e70727400ULL;
constexpr std::uint64_t kSaltIcs = 0x6578702e69637300ULL;
constexpr std::uint64_t kSaltSplit = 0x6578702e73706c00ULL;
constexpr std::uint64_t kSaltHoldout = 0x6578702e686f6c64ULL;
constexpr std::uint64_t kSaltPhase = 0x6578702e70687300ULL;
constexpr std::uint64_t kSaltNetInit = 0x6578702e6e657400ULL;
constexpr std::uint64_t kSaltShuffle = 0x6578702e73686600ULL;

constexpr double kIcBumpWidth = 0.12;  ///< lift width for snapshot initial states
constexpr double kHuge = 1e300;        ///< stands in for non-finite error values
constexpr double kDivergedPct = 1e3;

std::uint64_t chain(std::uint64_t seed, std::uint64_t salt, std::uint64_t a = 0,
                    std::uint64_t b = 0) {
    std::uint64_t s = mix_seed(seed, salt);
    s = mix_seed(s, 0x9e3779b97f4a7c15ULL + a);
    return mix_seed(s, 0x517cc1b727220a95ULL + b);
}

template <typename Fn>
void stage(const std::string& name, const std::string& ctx, Fn&& fn) {
    try {
        std::forward<Fn>(fn)();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, ctx, e.what());
    }
}

double median(std::vector<double> v) {
    if (v.empty()) throw Error("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v, const char* spec = "%.17g") {
    char buf[40];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

// ---------------------------------------------------------------------------
// configuration

void check_keys(const ordered_json& j, std::initializer_list<const char*> known,
                const std::string& where) {
    if (!j.is_object()) throw Error("config: expected an object for " + where);
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : known)
            if (item.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw Error("config: unknown key '" + item.key() + "' in " + where);
    }
}

template <typename T>
void read_key(const ordered_json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    ExperimentConfig c;
    try {
        check_keys(j,
                   {"experiment", "seed", "output", "nx", "ny", "alpha", "dt", "n_steps", "modes",
                    "ic_scale", "observation_points", "field_channels", "field_contrast",
                    "perturbation",
                    "realizations", "train_realizations", "configurations",
                    "holdout_configuration", "observation_test_realizations", "source", "sweep",
                    "training", "network_mode"},
                   "config");
        read_key(j, "experiment", c.experiment);
        read_key(j, "seed", c.seed);
        read_key(j, "output", c.output);
        read_key(j, "nx", c.nx);
        read_key(j, "ny", c.ny);
        read_key(j, "alpha", c.alpha);
        read_key(j, "dt", c.dt);
        read_key(j, "n_steps", c.n_steps);
        read_key(j, "modes", c.modes);
        read_key(j, "ic_scale", c.ic_scale);
        if (j.contains("observation_points")) {
            c.observation_points.clear();
            for (const auto& p : j.at("observation_points")) {
                if (!p.is_array() || p.size() != 2)
                    throw Error("config: observation_points entries must be [x, y]");
                c.observation_points.push_back({p[0].get<double>(), p[1].get<double>()});
            }
        }
        read_key(j, "field_channels", c.field_channels);
        read_key(j, "field_contrast", c.field_contrast);
        read_key(j, "perturbation", c.perturbation);
        read_key(j, "realizations", c.realizations);
        read_key(j, "train_realizations", c.train_realizations);
        read_key(j, "configurations", c.configurations);
        read_key(j, "holdout_configuration", c.holdout_configuration);
        read_key(j, "observation_test_realizations", c.observation_test_realizations);
        if (j.contains("source")) {
            const auto& s = j.at("source");
            check_keys(s, {"width", "base_lo", "base_hi", "modulation"}, "source");
            read_key(s, "width", c.source.width);
            read_key(s, "base_lo", c.source.base_lo);
            read_key(s, "base_hi", c.source.base_hi);
            read_key(s, "modulation", c.source.modulation);
        }
        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            check_keys(s, {"layers", "neurons"}, "sweep");
            read_key(s, "layers", c.sweep.layers);
            read_key(s, "neurons", c.sweep.neurons);
        }
        if (j.contains("training")) {
            const auto& t = j.at("training");
            check_keys(t, {"epochs", "batch", "lr", "beta1", "beta2", "trials", "w1_ratio"},
                       "training");
            read_key(t, "epochs", c.training.epochs);
            read_key(t, "batch", c.training.batch);
            read_key(t, "lr", c.training.lr);
            read_key(t, "beta1", c.training.beta1);
            read_key(t, "beta2", c.training.beta2);
            read_key(t, "trials", c.training.trials);
            read_key(t, "w1_ratio", c.training.w1_ratio);
        }
        read_key(j, "network_mode", c.network_mode);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    try {
        return config_from_json(read_text_file(path));
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

std::string config_to_json(const ExperimentConfig& c) {
    ordered_json j;
    j["experiment"] = c.experiment;
    j["seed"] = c.seed;
    j["output"] = c.output;
    j["nx"] = c.nx;
    j["ny"] = c.ny;
    j["alpha"] = c.alpha;
    j["dt"] = c.dt;
    j["n_steps"] = c.n_steps;
    j["modes"] = c.modes;
    j["ic_scale"] = c.ic_scale;
    j["observation_points"] = ordered_json::array();
    for (const auto& p : c.observation_points)
        j["observation_points"].push_back(ordered_json::array({p[0], p[1]}));
    j["field_channels"] = c.field_channels;
    j["field_contrast"] = c.field_contrast;
    j["perturbation"] = c.perturbation;
    j["realizations"] = c.realizations;
    j["train_realizations"] = c.train_realizations;
    j["configurations"] = c.configurations;
    j["holdout_configuration"] = c.holdout_configuration;
    j["observation_test_realizations"] = c.observation_test_realizations;
    j["source"] = {{"width", c.source.width},
                   {"base_lo", c.source.base_lo},
                   {"base_hi", c.source.base_hi},
                   {"modulation", c.source.modulation}};
    j["sweep"] = {{"layers", c.sweep.layers}, {"neurons", c.sweep.neurons}};
    j["training"] = {{"epochs", c.training.epochs},   {"batch", c.training.batch},
                     {"lr", c.training.lr},           {"beta1", c.training.beta1},
                     {"beta2", c.training.beta2},     {"trials", c.training.trials},
                     {"w1_ratio", c.training.w1_ratio}};
    j["network_mode"] = c.network_mode;
    return j.dump(2) + "\n";
}

namespace {

// ---------------------------------------------------------------------------
// shared experiment pieces

SweepSpec resolved_sweep(const ExperimentConfig& c) {
    SweepSpec s = c.sweep;
    if (s.layers.empty())
        s.layers = c.experiment == 1   ? std::vector<int>{3, 5, 10}
                   : c.experiment == 4 ? std::vector<int>{5}
                                       : std::vector<int>{2, 3, 4, 5, 10};
    if (s.neurons.empty())
        s.neurons = c.experiment == 1 ? std::vector<int>{20, 100, 400} : std::vector<int>{100};
    return s;
}

void validate_config(const ExperimentConfig& c) {
    auto req = [](bool ok, const char* msg) {
        if (!ok) throw Error(std::string("config: ") + msg);
    };
    req(c.experiment >= 1 && c.experiment <= 4, "experiment must be 1..4");
    req(c.nx >= 2 && c.ny >= 2, "mesh must be at least 2x2");
    req(c.dt > 0.0, "dt must be positive");
    req(c.n_steps >= 1, "n_steps must be at least 1");
    req(c.modes >= 1, "modes must be at least 1");
    req(c.ic_scale > 0.0, "ic_scale must be positive");
    req(c.observation_points.empty() ||
            static_cast<int>(c.observation_points.size()) == c.modes,
        "observation_points must match the mode count");
    req(c.modes == 5 || !c.observation_points.empty(),
        "the default observation layout has 5 points; other mode counts need "
        "explicit observation_points");
    req(c.field_channels >= 1, "field_channels must be at least 1");
    req(c.field_contrast >= 1.0, "field_contrast must be at least 1");
    req(c.perturbation >= 0.0, "perturbation must be nonnegative");
    req(c.realizations >= 2, "need at least 2 realizations");
    if (c.experiment <= 3) {
        req(c.train_realizations >= 1 && c.train_realizations < c.realizations,
            "train_realizations must be positive and below realizations");
    }
    if (c.experiment == 2 || c.experiment == 3) {
        req(c.configurations >= 2, "need at least 2 field configurations");
        req(c.realizations % c.configurations == 0,
            "realizations must divide evenly over configurations");
        if (!c.holdout_configuration)
            req(c.train_realizations % c.configurations == 0,
                "train_realizations must divide evenly over configurations");
    }
    if (c.experiment == 4) {
        req(c.observation_test_realizations >= 1, "need held-out observation runs");
        req(c.realizations >= 20, "experiment 4 needs at least 20 realizations");
        req(c.realizations % 10 == 0, "experiment 4 realization count must be a multiple of 10");
    }
    req(c.source.width > 0.0, "source width must be positive");
    req(c.source.base_lo > 0.0 && c.source.base_hi >= c.source.base_lo,
        "well rates must satisfy 0 < base_lo <= base_hi");
    req(c.source.modulation >= 0.0 && c.source.modulation <= 1.0,
        "modulation must lie in [0, 1]");
    const SweepSpec s = resolved_sweep(c);
    for (int l : s.layers) req(l >= 1, "sweep layer counts must be positive");
    for (int n : s.neurons) req(n >= 1, "sweep neuron counts must be positive");
    req(c.training.epochs >= 0, "epochs must be nonnegative");
    req(c.training.batch >= 1, "batch must be positive");
    req(c.training.lr > 0.0, "learning rate must be positive");
    req(c.training.beta1 > 0.0 && c.training.beta1 < 1.0, "beta1 must lie in (0, 1)");
    req(c.training.beta2 > 0.0 && c.training.beta2 < 1.0, "beta2 must lie in (0, 1)");
    req(c.training.trials >= 1, "trials must be positive");
    req(c.training.w1_ratio > 1.0, "w1_ratio must exceed 1");
    req(c.network_mode == "universal" || c.network_mode == "per_step",
        "network_mode must be 'universal' or 'per_step'");
}

Eigen::VectorXd base_rates(const SourceModel& sm, int m) {
    Eigen::VectorXd r(m);
    for (int k = 0; k < m; ++k)
        r[k] = sm.base_lo + (sm.base_hi - sm.base_lo) * (m == 1 ? 0.0 : k / (m - 1.0));
    return r;
}

SourceSpec make_static_source(const SourceModel& sm,
                              const std::vector<std::array<double, 2>>& centers) {
    SourceSpec s;
    s.centers = centers;
    s.width = sm.width;
    s.schedule = base_rates(sm, static_cast<int>(centers.size())).transpose();
    return s;
}

/// Rates r_k(n) = base_k (1 + modulation sin(2 pi n / n_steps + 2 pi k / m + phase)),
/// one schedule row per time level 0..n_steps.
SourceSpec make_scheduled_source(const SourceModel& sm,
                                 const std::vector<std::array<double, 2>>& centers, double dt,
                                 int n_steps, double phase) {
    SourceSpec s;
    s.centers = centers;
    s.width = sm.width;
    s.schedule_dt = dt;
    const int m = static_cast<int>(centers.size());
    const Eigen::VectorXd base = base_rates(sm, m);
    s.schedule.resize(n_steps + 1, m);
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (int n = 0; n <= n_steps; ++n)
        for (int k = 0; k < m; ++k)
            s.schedule(n, k) =
                base[k] * (1.0 + sm.modulation *
                                     std::sin(two_pi * n / n_steps + two_pi * k / m + phase));
    return s;
}

/// Full-node initial state whose value near observation node k is about c0_k:
/// a Gaussian bump per node, zeroed on the boundary. Used only to seed the
/// snapshot runs before any basis exists.
Eigen::VectorXd lift_ic_bumps(const StructuredMesh& mesh,
                              const std::vector<std::array<double, 2>>& centers,
                              const Eigen::VectorXd& c0) {
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(mesh.n_nodes());
    const double inv = 1.0 / (2.0 * kIcBumpWidth * kIcBumpWidth);
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        if (mesh.boundary[static_cast<std::size_t>(n)]) continue;
        const auto [x, y] = mesh.node_coord(n);
        double v = 0.0;
        for (std::size_t k = 0; k < centers.size(); ++k) {
            const double dx = x - centers[k][0];
            const double dy = y - centers[k][1];
            v += c0[static_cast<Eigen::Index>(k)] * std::exp(-(dx * dx + dy * dy) * inv);
        }
        u0[n] = v;
    }
    return u0;
}

int holdout_index(const ExperimentConfig& c) {
    return static_cast<int>(chain(c.seed, kSaltHoldout) % static_cast<std::uint64_t>(c.configurations));
}

InputEncoding encoding_for(const ExperimentConfig& c) {
    InputEncoding enc;
    enc.include_kappa = c.experiment >= 2;
    enc.include_source = c.experiment >= 3;
    return enc;
}

/// Deterministic description of the planned run; identical for dry runs and
/// real runs so reports stay byte-stable.
std::vector<std::string> describe(const ExperimentConfig& c) {
    const SweepSpec sweep = resolved_sweep(c);
    const InputEncoding enc = encoding_for(c);
    const int d_in = c.modes + enc.dim(c.modes);
    const int k = c.n_steps;
    std::vector<std::string> out;
    auto add = [&out](const std::string& s) { out.push_back(s); };

    std::ostringstream sw;
    sw << "sweep: depths {";
    for (std::size_t i = 0; i < sweep.layers.size(); ++i)
        sw << (i ? "," : "") << sweep.layers[i];
    sw << "} x widths {";
    for (std::size_t i = 0; i < sweep.neurons.size(); ++i)
        sw << (i ? "," : "") << sweep.neurons[i];
    sw << "}, " << c.training.trials << " trials, " << c.training.epochs << " epochs";

    std::ostringstream mesh;
    mesh << "mesh " << c.nx << "x" << c.ny << ", dt " << fmt(c.dt, "%g") << ", " << k
         << " steps, " << c.modes << " modes, input dim " << d_in << ", ic scale "
         << fmt(c.ic_scale, "%g");
    add(mesh.str());

    switch (c.experiment) {
        case 1: {
            add("experiment 1: fixed conductivity field, static wells, state-only inputs");
            add("conductivity fields: 1 (" + std::to_string(c.field_channels) +
                " channels, contrast " + fmt(c.field_contrast, "%g") + ")");
            add("realizations: " + std::to_string(c.realizations) + " simulation (train " +
                std::to_string(c.train_realizations) + ", test " +
                std::to_string(c.realizations - c.train_realizations) + ")");
            add("training pairs: " + std::to_string(c.train_realizations * k) +
                " simulation-to-simulation");
            break;
        }
        case 2:
        case 3: {
            add(c.experiment == 2
                    ? "experiment 2: per-configuration fields, static wells, conductivity inputs"
                    : "experiment 3: per-configuration fields, scheduled wells, conductivity and "
                      "rate inputs");
            add("conductivity fields: " + std::to_string(c.configurations) + " (" +
                std::to_string(c.field_channels) + " channels, contrast " +
                fmt(c.field_contrast, "%g") + ")");
            const int per = c.realizations / c.configurations;
            if (c.holdout_configuration) {
                const int h = holdout_index(c);
                add("realizations: " + std::to_string(c.realizations) + " simulation, " +
                    std::to_string(per) + " per configuration");
                add("held-out configuration: " + std::to_string(h) + " (its " +
                    std::to_string(per) + " realizations form the test set)");
                add("training pairs: " + std::to_string((c.realizations - per) * k) +
                    " simulation-to-simulation");
            } else {
                add("realizations: " + std::to_string(c.realizations) + " simulation, train " +
                    std::to_string(c.train_realizations / c.configurations) +
                    " per configuration");
                add("training pairs: " + std::to_string(c.train_realizations * k) +
                    " simulation-to-simulation");
            }
            break;
        }
        default: {
            add("experiment 4: true vs perturbed field (magnitude " + fmt(c.perturbation, "%g") +
                "), per-run well schedules");
            const int R = c.realizations;
            const int n_obs = R / 10;
            const int n1 = n_obs * k;
            const int n2 = (R - n_obs) * k;
            const double unit = 1.0 / (c.training.w1_ratio * n1 + n2);
            add("realizations: " + std::to_string(R) + " paired simulation/observation runs + " +
                std::to_string(c.observation_test_realizations) + " held-out observation runs");
            add("case1: " + std::to_string(R * k) + " simulation pairs");
            add("case2: " + std::to_string(n2) + " simulation + " + std::to_string(n1) +
                " observation pairs (weights " + fmt(c.training.w1_ratio * unit, "%.6g") + "/" +
                fmt(unit, "%.6g") + ")");
            add("case3: " + std::to_string(R * k) + " observation pairs");
            add("case4: " + std::to_string(n1) + " observation pairs");
            break;
        }
    }
    add(sw.str());
    add(c.experiment == 4 ? "test targets: observation trajectories"
                          : "test targets: simulation trajectories");
    return out;
}

// ---------------------------------------------------------------------------
// pipeline state

struct RowSpec {
    std::string label;
    int layers = 0;
    int neurons = 0;
    int dataset = 0;
    LossSpec loss;
};

struct Prepared {
    StructuredMesh mesh;
    CsrMatrix mass_int;
    PodBasis pod;
    NodalBasis basis;
    InputEncoding encoding;
    std::vector<Dataset> datasets;
    std::vector<std::vector<Dataset>> step_slices;  ///< filled in per_step mode
    std::vector<RowSpec> rows;
    std::vector<SampleRealization> test;
    std::vector<std::pair<std::string, PermField>> field_dumps;
};

Dataset slice_by_step(const Dataset& d, int s) {
    std::vector<int> cols;
    for (std::size_t j = 0; j < d.step_ids.size(); ++j)
        if (d.step_ids[j] == s) cols.push_back(static_cast<int>(j));
    Dataset out;
    out.X.resize(d.X.rows(), static_cast<Eigen::Index>(cols.size()));
    out.Y.resize(d.Y.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        out.X.col(static_cast<Eigen::Index>(j)) = d.X.col(cols[j]);
        out.Y.col(static_cast<Eigen::Index>(j)) = d.Y.col(cols[j]);
        out.tags.push_back(d.tags[static_cast<std::size_t>(cols[j])]);
        out.run_ids.push_back(d.run_ids[static_cast<std::size_t>(cols[j])]);
        out.step_ids.push_back(d.step_ids[static_cast<std::size_t>(cols[j])]);
    }
    return out;
}

Prepared prepare(const ExperimentConfig& cfg, const std::string& ctx) {
    Prepared P;
    const int m = cfg.modes;
    const int k = cfg.n_steps;
    const int exp_id = cfg.experiment;

    std::vector<int> nodes;
    std::vector<std::array<double, 2>> centers;
    stage("setup", ctx, [&] {
        P.mesh = build_mesh(cfg.nx, cfg.ny);
        nodes = cfg.observation_points.empty()
                    ? select_observation_nodes(P.mesh, m)
                    : select_observation_nodes(P.mesh, cfg.observation_points);
        for (int n : nodes) centers.push_back(P.mesh.node_coord(n));
        P.mass_int = restrict_interior(assemble_mass(P.mesh), P.mesh);
        P.encoding = encoding_for(cfg);
    });

    std::vector<PermField> fields;
    PermField kappa_true;
    stage("fields", ctx, [&] {
        if (exp_id == 1) {
            fields.push_back(gen_channelized(chain(cfg.seed, kSaltField, 0), cfg.field_channels,
                                             cfg.field_contrast, P.mesh));
            P.field_dumps.emplace_back("kappa_0", fields[0]);
        } else if (exp_id == 2 || exp_id == 3) {
            for (int c = 0; c < cfg.configurations; ++c) {
                fields.push_back(gen_channelized(chain(cfg.seed, kSaltField,
                                                       static_cast<std::uint64_t>(c)),
                                                 cfg.field_channels, cfg.field_contrast, P.mesh));
                P.field_dumps.emplace_back("kappa_" + std::to_string(c), fields.back());
            }
        } else {
            kappa_true = gen_channelized(chain(cfg.seed, kSaltField, 0), cfg.field_channels,
                                         cfg.field_contrast, P.mesh);
            fields.push_back(perturb(kappa_true, cfg.perturbation,
                                     chain(cfg.seed, kSaltPerturbField, 0)));
            P.field_dumps.emplace_back("kappa_true", kappa_true);
            P.field_dumps.emplace_back("kappa_sim", fields[0]);
        }
    });

    const int total_runs =
        exp_id == 4 ? cfg.realizations + cfg.observation_test_realizations : cfg.realizations;
    const int per_config = exp_id == 2 || exp_id == 3 ? cfg.realizations / cfg.configurations : 0;
    auto field_of = [&](int r) -> const PermField& {
        if (exp_id == 2 || exp_id == 3) return fields[static_cast<std::size_t>(r / per_config)];
        return fields[0];
    };

    std::vector<SourceSpec> sources;
    std::vector<Eigen::VectorXd> c0s;
    stage("samples", ctx, [&] {
        sources.reserve(static_cast<std::size_t>(total_runs));
        if (exp_id == 1 || exp_id == 2) {
            const SourceSpec shared = make_static_source(cfg.source, centers);
            sources.assign(static_cast<std::size_t>(total_runs), shared);
        } else if (exp_id == 3) {
            const SourceSpec shared = make_scheduled_source(cfg.source, centers, cfg.dt, k, 0.0);
            sources.assign(static_cast<std::size_t>(total_runs), shared);
        } else {
            for (int r = 0; r < total_runs; ++r) {
                std::mt19937_64 rng(chain(cfg.seed, kSaltPhase, static_cast<std::uint64_t>(r)));
                std::uniform_real_distribution<double> u(0.0, 6.283185307179586);
                sources.push_back(make_scheduled_source(cfg.source, centers, cfg.dt, k, u(rng)));
            }
        }
        c0s = sample_initial_conditions(total_runs, m, chain(cfg.seed, kSaltIcs), 0.0,
                                        cfg.ic_scale);
    });

    std::set<int> train_ids;
    stage("split", ctx, [&] {
        if (exp_id == 1) {
            std::vector<int> ids(static_cast<std::size_t>(cfg.realizations));
            std::iota(ids.begin(), ids.end(), 0);
            train_ids = split_ids(ids, cfg.train_realizations, chain(cfg.seed, kSaltSplit, 0));
        } else if (exp_id == 2 || exp_id == 3) {
            if (cfg.holdout_configuration) {
                const int h = holdout_index(cfg);
                for (int r = 0; r < cfg.realizations; ++r)
                    if (r / per_config != h) train_ids.insert(r);
            } else {
                const int per_train = cfg.train_realizations / cfg.configurations;
                for (int c = 0; c < cfg.configurations; ++c) {
                    std::vector<int> ids(static_cast<std::size_t>(per_config));
                    std::iota(ids.begin(), ids.end(), c * per_config);
                    const std::set<int> chosen = split_ids(
                        ids, per_train, chain(cfg.seed, kSaltSplit, static_cast<std::uint64_t>(c)));
                    train_ids.insert(chosen.begin(), chosen.end());
                }
            }
        } else {
            for (int r = 0; r < cfg.realizations; ++r) train_ids.insert(r);
        }
    });

    stage("snapshots", ctx, [&] {
        std::vector<Eigen::MatrixXd> runs;
        runs.reserve(train_ids.size());
        for (int id : train_ids) {
            DiffusionProblem p;
            p.kappa = field_of(id);
            p.alpha = cfg.alpha;
            p.source = sources[static_cast<std::size_t>(id)];
            p.dt = cfg.dt;
            p.n_steps = k;
            p.u0 = lift_ic_bumps(P.mesh, centers, c0s[static_cast<std::size_t>(id)]);
            runs.push_back(run_fine_trajectory(p));
        }
        P.pod = compute_pod(collect_snapshots(runs, P.mesh), m);
        P.basis = build_nodal_basis(P.pod, nodes, P.mesh);
    });

    std::vector<SampleRealization> sims;
    std::vector<SampleRealization> obs;
    stage("realizations", ctx, [&] {
        sims.reserve(static_cast<std::size_t>(total_runs));
        for (int r = 0; r < total_runs; ++r)
            sims.push_back(generate_simulation_realization(c0s[static_cast<std::size_t>(r)],
                                                           field_of(r),
                                                           sources[static_cast<std::size_t>(r)],
                                                           P.basis, cfg.alpha, cfg.dt, k, r));
        if (exp_id == 4) {
            obs.reserve(static_cast<std::size_t>(total_runs));
            for (int r = 0; r < total_runs; ++r) {
                SampleRealization o = generate_observation_realization(
                    c0s[static_cast<std::size_t>(r)], kappa_true,
                    sources[static_cast<std::size_t>(r)], P.basis, cfg.alpha, cfg.dt, k, r);
                o.paired_inputs = sims[static_cast<std::size_t>(r)].trajectory;
                // network inputs always encode the simulator's field
                o.field = fields[0];
                obs.push_back(std::move(o));
            }
        }
    });

    const SweepSpec sweep = resolved_sweep(cfg);
    stage("datasets", ctx, [&] {
        if (exp_id <= 3) {
            std::vector<SampleRealization> train;
            for (const SampleRealization& s : sims)
                (train_ids.count(s.run_id) ? train : P.test).push_back(s);
            P.datasets.push_back(assemble_dataset(train, DatasetMode::C, P.encoding));
            for (int L : sweep.layers)
                for (int N : sweep.neurons)
                    P.rows.push_back({std::to_string(L) + "x" + std::to_string(N), L, N, 0,
                                      LossSpec::standard()});
        } else {
            const int R = cfg.realizations;
            const int n_obs_runs = R / 10;
            P.test.assign(obs.begin() + R, obs.end());
            std::vector<SampleRealization> set1(sims.begin(), sims.begin() + R);
            std::vector<SampleRealization> set2(sims.begin(), sims.begin() + (R - n_obs_runs));
            set2.insert(set2.end(), obs.begin() + (R - n_obs_runs), obs.begin() + R);
            std::vector<SampleRealization> set3(obs.begin(), obs.begin() + R);
            std::vector<SampleRealization> set4(obs.begin() + (R - n_obs_runs), obs.begin() + R);
            P.datasets.push_back(assemble_dataset(set1, DatasetMode::C, P.encoding));
            P.datasets.push_back(assemble_dataset(set2, DatasetMode::B, P.encoding));
            P.datasets.push_back(assemble_dataset(set3, DatasetMode::A, P.encoding));
            P.datasets.push_back(assemble_dataset(set4, DatasetMode::A, P.encoding));

            long n1 = 0, n2 = 0;
            for (Provenance t : P.datasets[1].tags)
                (t == Provenance::observation ? n1 : n2) += 1;
            const double unit = 1.0 / (cfg.training.w1_ratio * static_cast<double>(n1) +
                                       static_cast<double>(n2));
            const LossSpec mixed = LossSpec::make_weighted(cfg.training.w1_ratio * unit, unit);
            const bool multi = sweep.layers.size() * sweep.neurons.size() > 1;
            for (int case_i = 0; case_i < 4; ++case_i)
                for (int L : sweep.layers)
                    for (int N : sweep.neurons) {
                        std::string label = "case" + std::to_string(case_i + 1);
                        if (multi) label += " " + std::to_string(L) + "x" + std::to_string(N);
                        P.rows.push_back(
                            {label, L, N, case_i, case_i == 1 ? mixed : LossSpec::standard()});
                    }
        }
        if (cfg.network_mode == "per_step") {
            for (const Dataset& d : P.datasets) {
                std::vector<Dataset> slices;
                for (int s = 0; s < k; ++s) slices.push_back(slice_by_step(d, s));
                P.step_slices.push_back(std::move(slices));
            }
        }
    });
    return P;
}

// ---------------------------------------------------------------------------
// training and evaluation

double field_pct(const NodalBasis& basis, const StructuredMesh& mesh, const CsrMatrix& mass_int,
                 const Eigen::VectorXd& target, const Eigen::VectorXd& pred) {
    if (!pred.allFinite()) return kHuge;
    const L2Error e =
        l2_error(mesh, mass_int, reconstruct(basis, target), reconstruct(basis, pred));
    return std::isfinite(e.percent) ? std::min(e.percent, kHuge) : kHuge;
}

const Network& net_for_step(const std::vector<Network>& nets, int n) {
    return nets.size() == 1 ? nets[0] : nets[static_cast<std::size_t>(n)];
}

Eigen::VectorXd with_encoding(const Eigen::VectorXd& c, const Eigen::VectorXd& enc) {
    Eigen::VectorXd x(c.size() + enc.size());
    x.head(c.size()) = c;
    if (enc.size()) x.tail(enc.size()) = enc;
    return x;
}

struct TrialResult {
    double one_step = kHuge;
    double final_time = kHuge;
    bool train_failed = false;
    std::vector<Network> nets;
};

TrialResult run_trial(const Prepared& P, const ExperimentConfig& cfg, int row_i, int trial) {
    const RowSpec& row = P.rows[static_cast<std::size_t>(row_i)];
    const Dataset& full = P.datasets[static_cast<std::size_t>(row.dataset)];
    std::vector<int> dims;
    dims.push_back(static_cast<int>(full.X.rows()));
    for (int l = 0; l < row.layers; ++l) dims.push_back(row.neurons);
    dims.push_back(static_cast<int>(full.Y.rows()));

    const bool per_step = cfg.network_mode == "per_step";
    const int n_nets = per_step ? cfg.n_steps : 1;
    TrialResult out;
    TrainingConfig tc;
    tc.epochs = cfg.training.epochs;
    tc.batch = cfg.training.batch;
    tc.lr = cfg.training.lr;
    tc.beta1 = cfg.training.beta1;
    tc.beta2 = cfg.training.beta2;
    tc.loss = row.loss;
    for (int s = 0; s < n_nets; ++s) {
        const Dataset& ds =
            per_step ? P.step_slices[static_cast<std::size_t>(row.dataset)]
                                    [static_cast<std::size_t>(s)]
                     : full;
        const std::uint64_t tag = static_cast<std::uint64_t>(trial) * 1024 + s;
        Network net = init_network(dims, chain(cfg.seed, kSaltNetInit,
                                               static_cast<std::uint64_t>(row_i), tag));
        tc.seed = chain(cfg.seed, kSaltShuffle, static_cast<std::uint64_t>(row_i), tag);
        try {
            train(net, ds, tc);
        } catch (const TrainingError&) {
            out.train_failed = true;
        }
        out.nets.push_back(std::move(net));
        if (out.train_failed) break;
    }
    if (!out.train_failed) {
        const EvalResult ev =
            evaluate_network(out.nets, P.test, P.encoding, P.basis, P.mesh, P.mass_int);
        out.one_step = ev.one_step;
        out.final_time = ev.final_time;
    }
    if (trial != 0) out.nets.clear();
    return out;
}

void write_artifacts(const Prepared& P, const ExperimentConfig& cfg,
                     const std::vector<ReportRow>& rows,
                     const std::vector<TrialResult>& results, int trials,
                     const std::string& dir) {
    fs::create_directories(dir + "/fields");
    fs::create_directories(dir + "/networks");
    for (const auto& [name, field] : P.field_dumps) {
        write_perm_csv(dir + "/fields/" + name + ".csv", field);
        write_perm_sidecar(dir + "/fields/" + name + ".json", field);
    }
    if (rows.empty() || P.test.empty()) return;

    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double a = cfg.experiment == 4 ? rows[i].final_time : rows[i].one_step;
        const double b = cfg.experiment == 4 ? rows[best].final_time : rows[best].one_step;
        if (a < b) best = i;
    }

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::vector<Network>& nets = results[i * static_cast<std::size_t>(trials)].nets;
        std::string stem = rows[i].label;
        std::replace(stem.begin(), stem.end(), ' ', '_');
        for (std::size_t s = 0; s < nets.size(); ++s) {
            const std::string suffix = nets.size() == 1 ? "" : "_step" + std::to_string(s);
            write_network_bundle(dir + "/networks/" + stem + suffix + ".bundle", nets[s]);
        }
    }

    const SampleRealization& r = P.test.front();
    const int k = r.n_steps();
    const Eigen::VectorXd ref_full =
        prolong_interior(reconstruct(P.basis, r.trajectory.col(k)), P.mesh);
    write_field_csv(dir + "/fields/final_reference.csv", P.mesh, ref_full);
    write_field_pgm(dir + "/fields/final_reference.pgm", P.mesh, ref_full);

    const std::vector<Network>& nets = results[best * static_cast<std::size_t>(trials)].nets;
    Eigen::VectorXd c = r.trajectory.col(0);
    if (!nets.empty() && !nets.front().W.empty()) {
        for (int n = 0; n < k; ++n) {
            const Eigen::VectorXd enc = P.encoding.encode(r.field, r.source, (n + 1) * r.dt);
            c = forward(net_for_step(nets, n), with_encoding(c, enc));
            if (!c.allFinite()) {
                c.setZero();
                break;
            }
        }
    }
    const Eigen::VectorXd pred_full = prolong_interior(reconstruct(P.basis, c), P.mesh);
    write_field_csv(dir + "/fields/final_predicted.csv", P.mesh, pred_full);
    write_field_pgm(dir + "/fields/final_predicted.pgm", P.mesh, pred_full);
}

std::string format_text(const ErrorReport& report) {
    std::ostringstream os;
    os << "experiment " << report.config.experiment << " (seed " << report.config.seed << ")";
    if (report.dry_run) os << " [dry run]";
    os << "\n\n";
    if (!report.rows.empty()) {
        os << std::left << std::setw(14) << "label" << std::right << std::setw(7) << "layers"
           << std::setw(9) << "neurons" << std::setw(15) << "one_step_pct" << std::setw(16)
           << "final_time_pct" << "  flags\n";
        os << std::string(14 + 7 + 9 + 15 + 16 + 10, '-') << '\n';
        for (const ReportRow& r : report.rows) {
            os << std::left << std::setw(14) << r.label << std::right << std::setw(7) << r.layers
               << std::setw(9) << r.neurons << std::setw(15) << fmt(r.one_step, "%.6g")
               << std::setw(16) << fmt(r.final_time, "%.6g") << "  "
               << (r.diverged ? "diverged" : "") << '\n';
        }
        os << '\n';
    }
    os << "notes:\n";
    for (const std::string& n : report.notes) os << "  - " << n << '\n';
    return os.str();
}

}  // namespace

EvalResult evaluate_network(const std::vector<Network>& nets,
                            const std::vector<SampleRealization>& test,
                            const InputEncoding& encoding, const NodalBasis& basis,
                            const StructuredMesh& mesh, const CsrMatrix& mass_int) {
    if (nets.empty()) throw Error("evaluate: no networks given");
    if (test.empty()) throw Error("evaluate: empty test set");
    const int k = test.front().n_steps();
    if (nets.size() != 1 && static_cast<int>(nets.size()) != k)
        throw Error("evaluate: need one network or one per step");
    const int m = basis.n_modes();
    for (const Network& net : nets) {
        if (net.d_out() != m) throw Error("evaluate: network output does not match mode count");
        if (net.d_in() != m + encoding.dim(static_cast<int>(test.front().source.n_wells())))
            throw Error("evaluate: network input does not match encoding");
    }

    double sum_one = 0.0;
    double sum_final = 0.0;
    long n_pairs = 0;
    for (const SampleRealization& r : test) {
        if (r.n_steps() != k) throw Error("evaluate: inconsistent trajectory lengths");
        const Eigen::MatrixXd& inputs =
            r.paired_inputs.size() > 0 ? r.paired_inputs : r.trajectory;
        std::vector<Eigen::VectorXd> encs;
        encs.reserve(static_cast<std::size_t>(k));
        for (int n = 0; n < k; ++n)
            encs.push_back(encoding.encode(r.field, r.source, (n + 1) * r.dt));

        for (int n = 0; n < k; ++n) {
            const Eigen::VectorXd pred = forward(
                net_for_step(nets, n),
                with_encoding(inputs.col(n), encs[static_cast<std::size_t>(n)]));
            sum_one += field_pct(basis, mesh, mass_int, r.trajectory.col(n + 1), pred);
            ++n_pairs;
        }

        Eigen::VectorXd c = r.trajectory.col(0);
        bool blew_up = false;
        for (int n = 0; n < k; ++n) {
            c = forward(net_for_step(nets, n),
                        with_encoding(c, encs[static_cast<std::size_t>(n)]));
            if (!c.allFinite()) {
                blew_up = true;
                break;
            }
        }
        sum_final += blew_up ? kHuge : field_pct(basis, mesh, mass_int, r.trajectory.col(k), c);
    }
    EvalResult out;
    out.one_step = sum_one / static_cast<double>(n_pairs);
    out.final_time = sum_final / static_cast<double>(test.size());
    out.diverged = !(out.final_time <= kDivergedPct);
    return out;
}

ErrorReport run_experiment(const ExperimentConfig& config, const RunOptions& opts) {
    ExperimentConfig cfg = config;
    if (!opts.out_override.empty()) cfg.output = opts.out_override;
    const std::string ctx =
        "experiment " + std::to_string(cfg.experiment) + ", seed " + std::to_string(cfg.seed);

    ErrorReport report;
    report.config = cfg;
    stage("config", ctx, [&] { validate_config(cfg); });
    report.notes = describe(cfg);
    if (opts.dry_run) {
        report.dry_run = true;
        report.notes.insert(report.notes.begin(), "dry run: no computation performed");
        return report;
    }

    const Prepared P = prepare(cfg, ctx);

    const int trials = cfg.training.trials;
    const std::size_t n_jobs = P.rows.size() * static_cast<std::size_t>(trials);
    std::vector<TrialResult> results(n_jobs);
    stage("training", ctx, [&] {
        const int workers = std::max(1, std::min(opts.workers, static_cast<int>(n_jobs)));
        std::atomic<std::size_t> next{0};
        std::mutex log_mutex;
        std::exception_ptr failure;
        auto body = [&] {
            for (;;) {
                const std::size_t j = next.fetch_add(1);
                if (j >= n_jobs) return;
                const int row_i = static_cast<int>(j) / trials;
                const int trial = static_cast<int>(j) % trials;
                try {
                    results[j] = run_trial(P, cfg, row_i, trial);
                    std::lock_guard<std::mutex> lock(log_mutex);
                    std::cerr << "[train] " << P.rows[static_cast<std::size_t>(row_i)].label
                              << " trial " << trial << ": one-step "
                              << fmt(results[j].one_step, "%.4g") << "%, final "
                              << fmt(results[j].final_time, "%.4g") << "%\n";
                } catch (...) {
                    std::lock_guard<std::mutex> lock(log_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        };
        if (workers == 1) {
            body();
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) pool.emplace_back(body);
            for (std::thread& t : pool) t.join();
        }
        if (failure) std::rethrow_exception(failure);
    });

    stage("report", ctx, [&] {
        for (std::size_t i = 0; i < P.rows.size(); ++i) {
            ReportRow row;
            row.label = P.rows[i].label;
            row.layers = P.rows[i].layers;
            row.neurons = P.rows[i].neurons;
            for (int t = 0; t < trials; ++t) {
                const TrialResult& tr = results[i * static_cast<std::size_t>(trials) +
                                                static_cast<std::size_t>(t)];
                row.trial_one_step.push_back(tr.one_step);
                row.trial_final.push_back(tr.final_time);
            }
            row.one_step = median(row.trial_one_step);
            row.final_time = median(row.trial_final);
            row.diverged = !(row.final_time <= kDivergedPct);
            report.rows.push_back(std::move(row));
        }
    });

    stage("artifacts", ctx, [&] {
        write_artifacts(P, cfg, report.rows, results, trials, cfg.output);
        emit_report(report, cfg.output);
    });
    return report;
}

void emit_report(const ErrorReport& report, const std::string& dir) {
    fs::create_directories(dir);
    std::string csv = "label,layers,neurons,one_step_pct,final_time_pct,diverged\n";
    for (const ReportRow& r : report.rows)
        csv += r.label + ',' + std::to_string(r.layers) + ',' + std::to_string(r.neurons) + ',' +
               fmt(r.one_step) + ',' + fmt(r.final_time) + ',' + (r.diverged ? "1" : "0") + '\n';
    write_text_file(dir + "/report.csv", csv);
    write_text_file(dir + "/report.txt", format_text(report));

    ordered_json j;
    j["experiment"] = report.config.experiment;
    j["dry_run"] = report.dry_run;
    j["config"] = ordered_json::parse(config_to_json(report.config));
    j["notes"] = report.notes;
    j["rows"] = ordered_json::array();
    for (const ReportRow& r : report.rows)
        j["rows"].push_back({{"label", r.label},
                             {"layers", r.layers},
                             {"neurons", r.neurons},
                             {"one_step_pct", r.one_step},
                             {"final_time_pct", r.final_time},
                             {"diverged", r.diverged},
                             {"trials",
                              {{"one_step", r.trial_one_step}, {"final_time", r.trial_final}}}});
    write_text_file(dir + "/report.json", j.dump(2) + "\n");
}

}  // namespace podnet
