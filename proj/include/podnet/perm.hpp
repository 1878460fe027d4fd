#pragma once

#include <cstdint>
#include <vector>

#include "podnet/mesh.hpp"

namespace podnet {

/// Sinusoidal channel swept across x in [0,1]: centerline
/// y(x) = entry_y + amplitude*sin(2*pi*frequency*x + phase), constant thickness.
struct ChannelSpec {
    double entry_y = 0.5;
    double amplitude = 0.0;
    double frequency = 0.0;
    double thickness = 0.1;
    double phase = 0.0;

    double centerline(double x) const;
    bool contains(double x, double y) const;
};

/// Piecewise-constant (per element) conductivity field on a structured mesh.
/// Generated fields take the value `contrast` inside channels and 1 outside.
struct PermField {
    int nx = 0;
    int ny = 0;
    std::vector<double> values;  ///< element-major (row-major), size nx*ny
    std::vector<ChannelSpec> channels;
    double contrast = 1.0;
    std::uint64_t seed = 0;

    double at_element(int e) const { return values[e]; }
    /// Element mask of one channel (true where the channel covers the element center).
    std::vector<bool> channel_mask(const ChannelSpec& c) const;
};

/// Samples `n_channels` pairwise-disjoint channels and rasterizes them.
/// Deterministic in `seed`; throws Error if disjoint placement fails after a
/// bounded number of resamples.
PermField gen_channelized(std::uint64_t seed, int n_channels, double contrast,
                          const StructuredMesh& mesh);

/// Jitters the channel parameters by uniform perturbations relative to the
/// generator ranges, bounded by `magnitude`, and regenerates the field.
/// magnitude = 0 reproduces the input exactly.
PermField perturb(const PermField& field, double magnitude, std::uint64_t seed);

/// Per-element coefficient array; validates the element layout matches `mesh`.
std::vector<double> eval_on_elements(const PermField& field, const StructuredMesh& mesh);

/// Exact area covered by the channels (bands are fully inside the domain).
double channel_area(const PermField& field);

}  // namespace podnet
