#pragma once

#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "usf/network.hpp"
#include "usf/rng.hpp"
#include "usf/walk.hpp"

namespace usf {

// Spanning forest oriented toward its root set. Roots have parent kNoVertex.
struct OrientedForest {
    std::vector<VertexId> parent;
    std::vector<Slot> parent_slot; // slot at v whose edge leads to parent(v)
    std::vector<std::uint32_t> depth;
    RootSet roots;
    RootSet barrier;               // sinks of the network: never traversed by balls
    std::vector<VertexId> order;   // Wilson start order

    std::size_t size() const { return parent.size(); }
    bool is_root(VertexId v) const { return parent[v] == kNoVertex; }
};

// Empty string when the OrientedForest invariants hold against `net`.
std::string check_forest(const Network& net, const OrientedForest& f);

// Non-root vertices in breadth-first order from `origins` (then any
// remaining vertices in id order).
std::vector<VertexId> breadth_first_order(const Network& net, const RootSet& roots,
                                          const std::vector<VertexId>& origins);

// Wilson's algorithm: loop-erased walks from each vertex of `order` into the
// growing tree. `order` must cover every non-root vertex.
OrientedForest wilson_sample(const Network& net, const RootSet& roots, const std::vector<VertexId>& order,
                             RngStream& rng);
// Same with the vertices in id order.
OrientedForest wilson_sample(const Network& net, const RootSet& roots, RngStream& rng);

// First-entry tree of a single walk on the network with the root set
// contracted to one vertex: the walk starts there and, whenever it is at a
// root, leaves along a root slot chosen proportionally to conductance.
OrientedForest aldous_broder_sample(const Network& net, const RootSet& roots, RngStream& rng,
                                    std::uint64_t step_budget = 100'000'000);

// Children lists of a completed forest, for repeated structural queries.
class ForestIndex {
public:
    explicit ForestIndex(const OrientedForest& f);
    const VertexId* begin(VertexId v) const { return list_.data() + offset_[v]; }
    const VertexId* end(VertexId v) const { return list_.data() + offset_[v + 1]; }
    VertexId root_of(VertexId v) const { return root_[v]; }

private:
    std::vector<std::uint32_t> offset_;
    std::vector<VertexId> list_;
    std::vector<VertexId> root_;
};

// {v} together with all descendants of v.
std::vector<VertexId> past_of(const OrientedForest& f, VertexId v);
std::vector<VertexId> past_of(const OrientedForest& f, const ForestIndex& idx, VertexId v);

// Parent path from v to its root.
WalkPath future_of(const OrientedForest& f, VertexId v);

struct IntrinsicBall {
    std::vector<VertexId> vertices;
    std::vector<std::uint32_t> distance; // aligned with vertices
    std::vector<VertexId> shell;         // vertices at distance exactly n
};

// Ball of radius n around v in the forest metric, never entering barrier vertices.
IntrinsicBall intrinsic_ball(const OrientedForest& f, VertexId v, std::uint32_t n);
IntrinsicBall intrinsic_ball(const OrientedForest& f, const ForestIndex& idx, VertexId v, std::uint32_t n);

// All vertices whose parent path ends at the same root as v.
std::vector<VertexId> component_of(const OrientedForest& f, VertexId v);

struct WeightedForest {
    std::vector<Slot> parent_slot; // kNoVertex-cast for roots
    double weight = 0.0;           // product of conductances of the parent edges
};

inline constexpr std::size_t kEnumerationCap = 9;

// All spanning forests with exactly one root of `roots` per component,
// parallel edges distinguished. Throws beyond kEnumerationCap non-root vertices.
std::vector<WeightedForest> enumerate_spanning_structures(const Network& net, const RootSet& roots);

// OrientedForest view of an enumerated structure.
OrientedForest to_forest(const Network& net, const RootSet& roots, const WeightedForest& w);

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// det of the weighted Laplacian with the root rows and columns deleted
// (the weighted count of rooted spanning forests), by exact elimination.
Rational matrix_tree_determinant(const Network& net, const RootSet& roots);

// Key identifying a forest by its parent slots; roots map to kNoVertex.
std::vector<Slot> forest_key(const OrientedForest& f);

// Lazily sampled forest for large networks: vertices join the tree only when
// asked for, by Wilson steps from them. Since Wilson's algorithm may pick its
// next start vertex as any function of the tree built so far, every local
// exploration below samples the exact law. Workspaces are epoch-stamped, so
// reset() costs O(|roots|).
class LocalWilson {
public:
    LocalWilson(const Network& net, RootSet roots);

    void reset();
    void reset(RootSet roots);

    const Network& network() const { return net_; }
    const RootSet& roots() const { return roots_; }

    bool in_tree(VertexId v) const { return stamp_[v] == epoch_ + 1; }
    void attach(VertexId v, RngStream& rng);

    Slot parent_slot(VertexId v) const { return slot_[v]; }
    VertexId parent(VertexId v) const
    {
        return roots_.contains(v) ? kNoVertex : net_.target(v, slot_[v]);
    }
    std::uint32_t depth(VertexId v) const { return depth_[v]; }
    int root_index(VertexId v) const { return root_[v]; }

    // Attaches all neighbors of x and appends the children of x to `out`.
    void children(VertexId x, RngStream& rng, std::vector<VertexId>& out);

    std::uint64_t steps() const { return steps_; }
    std::uint64_t attached() const { return attached_; }

private:
    const Network& net_;
    RootSet roots_;
    std::uint32_t epoch_ = 0;
    std::vector<std::uint32_t> stamp_;
    std::vector<Slot> slot_;
    std::vector<std::uint32_t> depth_;
    std::vector<std::uint8_t> root_;
    std::vector<VertexId> path_;
    std::uint64_t steps_ = 0;
    std::uint64_t attached_ = 0;
};

struct LocalCluster {
    std::vector<VertexId> vertices;      // breadth-first order from the center
    std::vector<std::uint32_t> distance; // intrinsic distance from the center
    std::vector<std::uint32_t> from;     // index of the tree neighbor one step closer to the center
    bool capped = false;                 // exploration stopped at a cap
};

// Past of v ({v} and its descendants) in a LocalWilson forest, explored
// breadth-first. Vertices at distance depth_cap are kept but not expanded;
// exploration also stops once volume_cap vertices are collected. `capped`
// reports whether either cap was hit.
LocalCluster explore_past(LocalWilson& lw, VertexId v, RngStream& rng, std::uint32_t depth_cap,
                          std::size_t volume_cap);

// Intrinsic ball of radius n around v in a LocalWilson forest.
LocalCluster explore_ball(LocalWilson& lw, VertexId v, std::uint32_t n, RngStream& rng, std::size_t volume_cap);

} // namespace usf
