#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "podnet/data.hpp"
#include "podnet/net.hpp"
#include "podnet/pod.hpp"

namespace podnet {

/// Well source shape shared by all experiments: Gaussian bumps of the given
/// width at the observation nodes, base rates spread linearly over
/// [base_lo, base_hi] across wells; time-dependent variants modulate the
/// rates sinusoidally with relative amplitude `modulation`.
struct SourceModel {
    double width = 0.05;
    double base_lo = 20.0;
    double base_hi = 30.0;
    double modulation = 0.5;

    bool operator==(const SourceModel&) const = default;
};

struct SweepSpec {
    std::vector<int> layers;
    std::vector<int> neurons;

    bool operator==(const SweepSpec&) const = default;
};

struct TrainingSpec {
    int epochs = 500;
    int batch = 32;
    double lr = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    int trials = 3;        ///< training repetitions per sweep cell
    double w1_ratio = 10.0;  ///< observation:simulation weight ratio (mixed loss)

    bool operator==(const TrainingSpec&) const = default;
};

struct ExperimentConfig {
    int experiment = 1;
    std::uint64_t seed = 2026;
    std::string output = "out";

    int nx = 32, ny = 32;
    double alpha = 20.0;
    double dt = 0.1;
    int n_steps = 10;
    int modes = 5;
    double ic_scale = 0.05;  ///< initial coefficients drawn uniform on [0, ic_scale]
    std::vector<std::array<double, 2>> observation_points;  ///< empty = default layout

    int field_channels = 2;
    double field_contrast = 1000.0;
    double perturbation = 0.05;

    int realizations = 100;
    int train_realizations = 90;
    int configurations = 10;            ///< distinct conductivity fields (exp 2/3)
    bool holdout_configuration = false;  ///< exp 2/3: test on an unseen field
    int observation_test_realizations = 10;  ///< exp 4 held-out observation runs

    SourceModel source;
    SweepSpec sweep;  ///< empty lists = per-experiment defaults
    TrainingSpec training;
    std::string network_mode = "universal";  ///< "universal" | "per_step"

    bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Canonical JSON with every field materialized; parses back to an equal config.
std::string config_to_json(const ExperimentConfig& config);

struct ReportRow {
    std::string label;
    int layers = 0;
    int neurons = 0;
    double one_step = 0.0;    ///< percent, median over trials of test-set means
    double final_time = 0.0;  ///< percent, median over trials
    bool diverged = false;    ///< final-time error above 1e3 percent
    std::vector<double> trial_one_step;
    std::vector<double> trial_final;
};

struct ErrorReport {
    ExperimentConfig config;
    std::vector<ReportRow> rows;
    std::vector<std::string> notes;
    bool dry_run = false;
};

struct RunOptions {
    bool dry_run = false;
    int workers = 1;
    std::string out_override;  ///< replaces config.output when nonempty
};

/// Runs the configured experiment end to end and writes report files plus
/// field and network artifacts under the output directory.
ErrorReport run_experiment(const ExperimentConfig& config, const RunOptions& opts = {});

/// Writes report.csv, report.txt and report.json under `dir`.
void emit_report(const ErrorReport& report, const std::string& dir);

struct EvalResult {
    double one_step = 0.0;
    double final_time = 0.0;
    bool diverged = false;
};

/// Test metrics for one trained map. `nets` holds one network (applied at
/// every step) or one per step. Inputs are read from each realization's
/// paired trajectory when present, targets from its own; errors are
/// mass-weighted percentages of reconstructed fields, averaged over the
/// test set (pairs for one-step, realizations for final-time).
EvalResult evaluate_network(const std::vector<Network>& nets,
                            const std::vector<SampleRealization>& test,
                            const InputEncoding& encoding, const NodalBasis& basis,
                            const StructuredMesh& mesh, const CsrMatrix& mass_int);

}  // namespace podnet
