#include "podnet/perm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "podnet/common.hpp"

namespace podnet {
namespace {

constexpr std::uint64_t kSaltGen = 0x7065726d2e67656eULL;
constexpr std::uint64_t kSaltPerturb = 0x7065726d2e707274ULL;

// Generator ranges. Channels drawn from these stay strictly inside the
// domain: entry_y +- amplitude +- thickness/2 is within [0.13, 0.87].
constexpr double kEntryLo = 0.30, kEntryHi = 0.70;
constexpr double kAmpLo = 0.05, kAmpHi = 0.10;
constexpr double kFreqLo = 0.4, kFreqHi = 0.8;
constexpr double kThickLo = 0.10, kThickHi = 0.14;

// Required centerline gap beyond the half-thickness sum. Sized so that a
// perturbation of magnitude <= 0.05 cannot make accepted channels overlap.
constexpr double kPlacementMargin = 0.04;
constexpr int kMaxAttempts = 400;
constexpr int kGapSamples = 257;

double min_gap(const ChannelSpec& a, const ChannelSpec& b) {
    double gap = std::numeric_limits<double>::infinity();
    for (int s = 0; s < kGapSamples; ++s) {
        const double x = static_cast<double>(s) / (kGapSamples - 1);
        gap = std::min(gap, std::abs(a.centerline(x) - b.centerline(x)));
    }
    return gap - 0.5 * (a.thickness + b.thickness);
}

bool pairwise_disjoint(const std::vector<ChannelSpec>& specs, double margin) {
    for (std::size_t i = 0; i < specs.size(); ++i)
        for (std::size_t j = i + 1; j < specs.size(); ++j)
            if (min_gap(specs[i], specs[j]) < margin) return false;
    return true;
}

void rasterize(PermField& field, const StructuredMesh& mesh) {
    field.nx = mesh.nx;
    field.ny = mesh.ny;
    field.values.assign(static_cast<std::size_t>(mesh.n_elements()), 1.0);
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto [cx, cy] = mesh.element_center(e);
        for (const ChannelSpec& c : field.channels) {
            if (c.contains(cx, cy)) {
                field.values[static_cast<std::size_t>(e)] = field.contrast;
                break;
            }
        }
    }
}

}  // namespace

double ChannelSpec::centerline(double x) const {
    return entry_y + amplitude * std::sin(2.0 * std::numbers::pi * frequency * x + phase);
}

bool ChannelSpec::contains(double x, double y) const {
    return std::abs(y - centerline(x)) < 0.5 * thickness;
}

std::vector<bool> PermField::channel_mask(const ChannelSpec& c) const {
    std::vector<bool> mask(values.size(), false);
    const double hx = 1.0 / nx;
    const double hy = 1.0 / ny;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            mask[static_cast<std::size_t>(j) * nx + i] =
                c.contains((i + 0.5) * hx, (j + 0.5) * hy);
    return mask;
}

PermField gen_channelized(std::uint64_t seed, int n_channels, double contrast,
                          const StructuredMesh& mesh) {
    if (n_channels < 0) throw Error("gen_channelized: n_channels must be >= 0");
    if (contrast < 1.0) throw Error("gen_channelized: contrast must be >= 1");

    std::mt19937_64 rng(mix_seed(seed, kSaltGen));
    std::uniform_real_distribution<double> entry(kEntryLo, kEntryHi);
    std::uniform_real_distribution<double> amp(kAmpLo, kAmpHi);
    std::uniform_real_distribution<double> freq(kFreqLo, kFreqHi);
    std::uniform_real_distribution<double> thick(kThickLo, kThickHi);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

    PermField field;
    field.contrast = contrast;
    field.seed = seed;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        std::vector<ChannelSpec> specs(static_cast<std::size_t>(n_channels));
        for (ChannelSpec& c : specs) {
            c.entry_y = entry(rng);
            c.amplitude = amp(rng);
            c.frequency = freq(rng);
            c.thickness = thick(rng);
            c.phase = phase(rng);
        }
        if (pairwise_disjoint(specs, kPlacementMargin)) {
            field.channels = std::move(specs);
            rasterize(field, mesh);
            return field;
        }
    }
    throw Error("gen_channelized: failed to place disjoint channels after " +
                std::to_string(kMaxAttempts) + " attempts (seed " + std::to_string(seed) + ")");
}

PermField perturb(const PermField& field, double magnitude, std::uint64_t seed) {
    if (magnitude < 0.0) throw Error("perturb: magnitude must be >= 0");
    if (field.nx < 1 || field.ny < 1 ||
        field.values.size() != static_cast<std::size_t>(field.nx) * field.ny)
        throw Error("perturb: malformed input field");

    // Jitter scale per parameter: half the generator range span. Magnitude
    // 0.05 then moves a centerline by < 0.018, which keeps accepted channel
    // pairs disjoint (margin 0.04 covers two opposing shifts) and bounds the
    // mask symmetric difference well under 0.35 of the channel area. The
    // phase is left alone; shifting it is indistinguishable from a frequency
    // change on [0,1] and has no natural scale.
    constexpr double kEntryScale = 0.5 * (kEntryHi - kEntryLo);
    constexpr double kAmpScale = 0.5 * (kAmpHi - kAmpLo);
    constexpr double kFreqScale = 0.5 * (kFreqHi - kFreqLo);
    constexpr double kThickScale = 0.5 * (kThickHi - kThickLo);

    std::mt19937_64 rng(mix_seed(seed, kSaltPerturb));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    PermField out;
    out.contrast = field.contrast;
    out.seed = seed;
    out.channels = field.channels;
    for (ChannelSpec& c : out.channels) {
        c.entry_y += magnitude * kEntryScale * unit(rng);
        c.amplitude += magnitude * kAmpScale * unit(rng);
        c.frequency += magnitude * kFreqScale * unit(rng);
        c.thickness += magnitude * kThickScale * unit(rng);
        if (c.amplitude < 0.0 || c.thickness <= 0.0 ||
            c.entry_y - c.amplitude - 0.5 * c.thickness <= 0.0 ||
            c.entry_y + c.amplitude + 0.5 * c.thickness >= 1.0)
            throw Error("perturb: jittered channel leaves the domain");
    }
    if (!pairwise_disjoint(out.channels, 0.0))
        throw Error("perturb: jittered channels overlap");

    StructuredMesh mesh = build_mesh(field.nx, field.ny);
    rasterize(out, mesh);
    return out;
}

std::vector<double> eval_on_elements(const PermField& field, const StructuredMesh& mesh) {
    if (field.nx != mesh.nx || field.ny != mesh.ny ||
        field.values.size() != static_cast<std::size_t>(mesh.n_elements()))
        throw Error("eval_on_elements: field does not match mesh layout");
    for (double v : field.values)
        if (!(v > 0.0)) throw Error("eval_on_elements: nonpositive coefficient");
    return field.values;
}

double channel_area(const PermField& field) {
    double area = 0.0;
    for (const ChannelSpec& c : field.channels) area += c.thickness;
    return area;
}

}  // namespace podnet
