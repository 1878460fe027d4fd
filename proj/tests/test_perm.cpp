#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "podnet/common.hpp"
#include "podnet/mesh.hpp"
#include "podnet/perm.hpp"

using namespace podnet;

namespace {

/// Connected components of a channel mask under 4-neighbor adjacency.
int component_count(const std::vector<bool>& mask, int nx, int ny) {
    std::vector<int> label(mask.size(), -1);
    int components = 0;
    for (int start = 0; start < nx * ny; ++start) {
        if (!mask[static_cast<std::size_t>(start)] || label[static_cast<std::size_t>(start)] >= 0)
            continue;
        std::vector<int> stack = {start};
        label[static_cast<std::size_t>(start)] = components;
        while (!stack.empty()) {
            const int e = stack.back();
            stack.pop_back();
            const int i = e % nx;
            const int j = e / nx;
            const int neighbors[4] = {i > 0 ? e - 1 : -1, i + 1 < nx ? e + 1 : -1,
                                      j > 0 ? e - nx : -1, j + 1 < ny ? e + nx : -1};
            for (int nb : neighbors)
                if (nb >= 0 && mask[static_cast<std::size_t>(nb)] &&
                    label[static_cast<std::size_t>(nb)] < 0) {
                    label[static_cast<std::size_t>(nb)] = components;
                    stack.push_back(nb);
                }
        }
        ++components;
    }
    return components;
}

std::vector<bool> contrast_mask(const PermField& f) {
    std::vector<bool> mask(f.values.size());
    for (std::size_t e = 0; e < f.values.size(); ++e) mask[e] = f.values[e] > 1.0;
    return mask;
}

}  // namespace

TEST_SUITE("perm") {

TEST_CASE("no channels means a unit background") {
    const StructuredMesh mesh = build_mesh(16, 16);
    const PermField f = gen_channelized(42, 0, 1000.0, mesh);
    for (double v : f.values) CHECK(v == 1.0);
    CHECK(f.channels.empty());
}

TEST_CASE("generation is deterministic in the seed") {
    const StructuredMesh mesh = build_mesh(32, 32);
    const PermField a = gen_channelized(7, 2, 1000.0, mesh);
    const PermField b = gen_channelized(7, 2, 1000.0, mesh);
    CHECK(a.values == b.values);
    REQUIRE(a.channels.size() == b.channels.size());
    for (std::size_t c = 0; c < a.channels.size(); ++c)
        CHECK(a.channels[c].entry_y == b.channels[c].entry_y);
    const PermField other = gen_channelized(8, 2, 1000.0, mesh);
    CHECK(a.values != other.values);
}

TEST_CASE("two channels form two crossing components with the contrast value") {
    const StructuredMesh mesh = build_mesh(32, 32);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const PermField f = gen_channelized(seed, 2, 1000.0, mesh);
        REQUIRE(f.channels.size() == 2);
        std::set<double> distinct(f.values.begin(), f.values.end());
        CHECK(distinct == std::set<double>({1.0, 1000.0}));

        const std::vector<bool> mask = contrast_mask(f);
        CHECK(component_count(mask, mesh.nx, mesh.ny) == 2);
        // every element column is crossed by both channels
        for (const ChannelSpec& ch : f.channels) {
            const std::vector<bool> one = f.channel_mask(ch);
            for (int i = 0; i < mesh.nx; ++i) {
                bool hit = false;
                for (int j = 0; j < mesh.ny; ++j)
                    hit = hit || one[static_cast<std::size_t>(j * mesh.nx + i)];
                CHECK(hit);
            }
        }
        // channels never share an element
        const std::vector<bool> m0 = f.channel_mask(f.channels[0]);
        const std::vector<bool> m1 = f.channel_mask(f.channels[1]);
        for (std::size_t e = 0; e < m0.size(); ++e) CHECK(!(m0[e] && m1[e]));
        // each channel stays inside the domain
        for (const ChannelSpec& ch : f.channels) {
            CHECK(ch.entry_y - ch.amplitude - ch.thickness / 2 >= 0.0);
            CHECK(ch.entry_y + ch.amplitude + ch.thickness / 2 <= 1.0);
        }
    }
}

TEST_CASE("generator rejects invalid requests") {
    const StructuredMesh mesh = build_mesh(8, 8);
    CHECK_THROWS_AS(gen_channelized(1, -1, 1000.0, mesh), Error);
    CHECK_THROWS_AS(gen_channelized(1, 2, 0.5, mesh), Error);
    // too many channels cannot be placed disjointly
    CHECK_THROWS_AS(gen_channelized(1, 40, 1000.0, mesh), Error);
}

TEST_CASE("zero-magnitude perturbation is the identity") {
    const StructuredMesh mesh = build_mesh(32, 32);
    const PermField f = gen_channelized(5, 2, 1000.0, mesh);
    const PermField g = perturb(f, 0.0, 99);
    CHECK(f.values == g.values);
    for (std::size_t c = 0; c < f.channels.size(); ++c) {
        CHECK(f.channels[c].entry_y == g.channels[c].entry_y);
        CHECK(f.channels[c].amplitude == g.channels[c].amplitude);
        CHECK(f.channels[c].frequency == g.channels[c].frequency);
        CHECK(f.channels[c].thickness == g.channels[c].thickness);
        CHECK(f.channels[c].phase == g.channels[c].phase);
    }
}

TEST_CASE("small perturbations keep the structure and move little area") {
    const StructuredMesh mesh = build_mesh(32, 32);
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        const PermField f = gen_channelized(seed, 2, 1000.0, mesh);
        const PermField g = perturb(f, 0.05, seed + 1000);
        REQUIRE(g.channels.size() == 2);
        CHECK(g.contrast == f.contrast);
        std::set<double> distinct(g.values.begin(), g.values.end());
        CHECK(distinct == std::set<double>({1.0, 1000.0}));

        const std::vector<bool> a = contrast_mask(f);
        const std::vector<bool> b = contrast_mask(g);
        int sym_diff = 0;
        int area = 0;
        for (std::size_t e = 0; e < a.size(); ++e) {
            sym_diff += a[e] != b[e];
            area += a[e];
        }
        REQUIRE(area > 0);
        CHECK(static_cast<double>(sym_diff) / area <= 0.35);
    }
}

TEST_CASE("perturbation is deterministic and magnitude-monotone on average") {
    const StructuredMesh mesh = build_mesh(32, 32);
    const PermField f = gen_channelized(9, 2, 1000.0, mesh);
    const PermField g1 = perturb(f, 0.05, 4);
    const PermField g2 = perturb(f, 0.05, 4);
    CHECK(g1.values == g2.values);
}

TEST_CASE("element evaluation validates the layout") {
    const StructuredMesh mesh = build_mesh(16, 16);
    const PermField f = gen_channelized(2, 2, 100.0, mesh);
    const std::vector<double> vals = eval_on_elements(f, mesh);
    CHECK(vals == f.values);
    CHECK(eval_on_elements(f, mesh) == vals);  // idempotent

    const StructuredMesh other = build_mesh(8, 8);
    CHECK_THROWS_AS(eval_on_elements(f, other), Error);
}

TEST_CASE("raster area tracks the analytic channel area") {
    const StructuredMesh mesh = build_mesh(64, 64);
    for (std::uint64_t seed = 3; seed <= 8; ++seed) {
        const PermField f = gen_channelized(seed, 2, 1000.0, mesh);
        int cells = 0;
        for (double v : f.values) cells += v > 1.0;
        const double raster = static_cast<double>(cells) / f.values.size();
        const double analytic = channel_area(f);
        // within one element-row of area: 2 channels x nx elements x hy each
        CHECK(std::abs(raster - analytic) <= 2.0 * mesh.hy);
    }
}

}  // TEST_SUITE
