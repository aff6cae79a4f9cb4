#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "usf/rng.hpp"

namespace usf {

using VertexId = std::uint32_t;
using Slot = std::uint32_t;
inline constexpr VertexId kNoVertex = 0xFFFFFFFFu;
inline constexpr int kMaxDimension = 16;

enum class Mode { box, torus, tree, generic };
enum class Boundary { wired, torus };

struct NetworkError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LatticeSpec {
    int dimension = 2;
    int side = 2;
    Boundary boundary = Boundary::wired;
    // One conductance per axis; empty means unit conductances.
    std::vector<double> axis_conductance;
};

struct EdgeRecord {
    VertexId u;
    VertexId w;
    double conductance;
};

// Small sorted vertex set used as the root set of a forest.
class RootSet {
public:
    RootSet() = default;
    explicit RootSet(std::vector<VertexId> vs);

    bool contains(VertexId v) const { return std::binary_search(vs_.begin(), vs_.end(), v); }
    // Position of v in the sorted list, or -1.
    int index_of(VertexId v) const;
    std::size_t size() const { return vs_.size(); }
    bool empty() const { return vs_.empty(); }
    VertexId operator[](std::size_t i) const { return vs_[i]; }
    auto begin() const { return vs_.begin(); }
    auto end() const { return vs_.end(); }
    const std::vector<VertexId>& vertices() const { return vs_; }

private:
    std::vector<VertexId> vs_;
};

// Immutable weighted multigraph. Every undirected edge appears as one slot
// in each endpoint's list; parallel edges (e.g. several lattice edges
// leaving a boundary site toward the wired sink) are distinct slots.
// Box, torus and tree modes are implicit: no per-vertex storage.
class Network {
public:
    static Network lattice_box(const LatticeSpec& spec);
    static Network regular_tree_ball(int degree, int radius);
    static Network from_edges(std::size_t vertex_count, const std::vector<EdgeRecord>& edges,
                              std::vector<VertexId> sinks);

    Mode mode() const { return mode_; }
    std::size_t vertex_count() const { return vertex_count_; }
    std::size_t site_count() const { return vertex_count_ - sinks_.size(); }
    bool has_sink() const { return !sinks_.empty(); }
    // The wired boundary vertex (the first sink).
    VertexId sink() const { return sinks_.empty() ? kNoVertex : sinks_.front(); }
    const std::vector<VertexId>& sinks() const { return sinks_; }
    bool is_sink(VertexId v) const
    {
        if (mode_ == Mode::generic)
            return sink_flag_[v] != 0;
        return v == sink();
    }

    std::uint32_t degree(VertexId v) const
    {
        switch (mode_) {
        case Mode::box:
        case Mode::torus:
            return v == sink() ? sink_degree_ : 2u * static_cast<std::uint32_t>(dim_);
        case Mode::tree:
            return v == sink() ? sink_degree_ : static_cast<std::uint32_t>(tree_k_);
        case Mode::generic:
            return offsets_[v + 1] - offsets_[v];
        }
        return 0;
    }

    VertexId target(VertexId v, Slot s) const
    {
        switch (mode_) {
        case Mode::box:
        case Mode::torus:
            return lattice_target(v, s);
        case Mode::tree:
            return tree_target(v, s);
        case Mode::generic:
            return targets_[offsets_[v] + s];
        }
        return kNoVertex;
    }

    double conductance(VertexId v, Slot s) const;
    Slot reverse_slot(VertexId v, Slot s) const;
    double weight(VertexId v) const;
    bool unit_conductances() const { return unit_; }

    // Slot chosen with probability conductance / weight.
    Slot sample_slot(VertexId v, RngStream& rng) const
    {
        if (unit_)
            return rng.below(degree(v));
        return sample_weighted_slot(v, rng);
    }

    // Lattice queries (box and torus modes).
    int dimension() const { return dim_; }
    int side() const { return side_; }
    void coords(VertexId v, int* x) const;
    std::vector<int> coords(VertexId v) const;
    VertexId site(const int* x) const;
    std::uint32_t stride(int axis) const { return stride_[axis]; }

    // Tree queries (tree mode). Level of the sink is radius + 1.
    int tree_degree() const { return tree_k_; }
    int tree_radius() const { return tree_r_; }
    int tree_level(VertexId v) const;
    VertexId tree_parent(VertexId v) const;

    // Graph distance from v to the nearest sink.
    std::uint32_t distance_to_sink(VertexId v) const;

    // Short human-readable description, also used for output hashing.
    std::string describe() const;

private:
    VertexId lattice_target(VertexId v, Slot s) const
    {
        if (v == sink())
            return sink_slot_site(s);
        const int axis = static_cast<int>(s >> 1);
        const std::uint32_t st = stride_[axis];
        const std::uint32_t x = (v / st) % static_cast<std::uint32_t>(side_);
        if ((s & 1u) == 0) {
            if (x + 1 < static_cast<std::uint32_t>(side_))
                return v + st;
            return mode_ == Mode::box ? sink() : v - x * st;
        }
        if (x > 0)
            return v - st;
        return mode_ == Mode::box ? sink() : v + (static_cast<std::uint32_t>(side_) - 1) * st;
    }

    VertexId tree_target(VertexId v, Slot s) const
    {
        const auto k = static_cast<std::uint32_t>(tree_k_);
        if (v == sink())
            return level_start_[tree_r_] + s / (k - 1);
        if (v == 0)
            return 1 + s;
        if (s == 0)
            return v <= k ? 0 : (v - k - 1) / (k - 1) + 1;
        if (v >= level_start_[tree_r_])
            return sink();
        return k + 1 + (k - 1) * (v - 1) + (s - 1);
    }

    VertexId sink_slot_site(Slot s) const;
    Slot sample_weighted_slot(VertexId v, RngStream& rng) const;

    Mode mode_ = Mode::generic;
    std::size_t vertex_count_ = 0;
    std::vector<VertexId> sinks_;
    bool unit_ = true;

    // lattice
    int dim_ = 0;
    int side_ = 0;
    std::array<std::uint32_t, kMaxDimension> stride_{};
    std::uint32_t face_size_ = 0;
    std::vector<double> axis_c_;
    std::vector<double> axis_cum_;
    std::uint32_t sink_degree_ = 0;

    // tree
    int tree_k_ = 0;
    int tree_r_ = 0;
    std::vector<VertexId> level_start_;

    // generic (CSR)
    std::vector<std::uint32_t> offsets_;
    std::vector<VertexId> targets_;
    std::vector<double> cond_;
    std::vector<double> cum_;
    std::vector<Slot> rev_;
    std::vector<double> weight_;
    std::vector<char> sink_flag_;
};

// The network with v wired to the sink, realized as the root set {v, sinks}.
RootSet merge_with_sink(const Network& net, VertexId v);

// Default root set: the sinks.
RootSet sink_roots(const Network& net);

// Graph distance between non-sink vertices in the graph with the sinks
// removed (the finite piece of the underlying infinite graph).
std::uint32_t graph_distance(const Network& net, VertexId u, VertexId w);

// Breadth-first distances from src; unreachable vertices get kNoVertex.
// Sinks are not traversed unless through_sinks is set.
std::vector<std::uint32_t> bfs_distances(const Network& net, VertexId src, bool through_sinks = false);

// Parses the `u w conductance` edge-list format with an optional
// `sinks: i j ...` header line and `#` comments.
Network parse_edge_list(std::istream& in);

// Full scan of the symmetry, positivity and connectivity invariants.
// Returns an empty string when all hold, otherwise a description.
std::string check_network(const Network& net);

} // namespace usf
