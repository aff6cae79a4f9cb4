#pragma once

#include <cstdint>
#include <vector>

#include "usf/rng.hpp"

namespace usf {

// Explicit rooted tree with vertex 0 as the root (the measurement origin).
// Vertices are appended in breadth-first order, so depth is nondecreasing.
class PlainTree {
public:
    PlainTree() { reset(); }

    void reset();
    std::uint32_t add_child(std::uint32_t parent);
    std::uint32_t size() const { return static_cast<std::uint32_t>(parent_.size()); }
    std::uint32_t parent(std::uint32_t v) const { return parent_[v]; }
    std::uint32_t depth(std::uint32_t v) const { return depth_[v]; }
    std::uint32_t height() const { return depth_.back(); }

    // Children lists; valid after finalize().
    void finalize();
    const std::uint32_t* children_begin(std::uint32_t v) const { return kids_.data() + offset_[v]; }
    const std::uint32_t* children_end(std::uint32_t v) const { return kids_.data() + offset_[v + 1]; }
    std::uint32_t child_count(std::uint32_t v) const { return offset_[v + 1] - offset_[v]; }
    std::uint32_t degree(std::uint32_t v) const { return child_count(v) + (v == 0 ? 0u : 1u); }

    // Set when growth stopped at a depth or volume cap.
    bool capped = false;

private:
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> depth_;
    std::vector<std::uint32_t> offset_;
    std::vector<std::uint32_t> kids_;
};

inline constexpr std::uint32_t kNoParent = 0xFFFFFFFFu;

// Exact samplers for forests on the ball of radius R in the k-regular tree
// with leaves wired to the sink, centered at the ball's root o. They run
// Wilson's algorithm with the start order chosen adaptively (future of o
// first, then children of explored vertices): a walk started at a child y of
// an explored vertex x stays inside y's subtree, which the tree built so far
// does not meet, until it hits x or the sink. The distance from x is a
// gambler's-ruin chain, so each candidate child joins independently with
// probability tree_hit_before_sink(k, R + 1 - level(x)). Growth stops below
// depth_cap (those vertices are kept, not expanded) or at volume_cap.
// Cost is proportional to the sampled cluster, independent of R.

struct RadialParams {
    int k = 3;
    int radius = 64;
    std::uint32_t depth_cap = 0xFFFFFFFFu;
    std::uint32_t volume_cap = 0xFFFFFFFFu;
};

// Past of o in the wired forest (root set {sink}). The future of o is a
// geodesic to a leaf, so o has k-1 candidate children and every other past
// vertex has k-1.
PlainTree sample_tree_past(const RadialParams& p, RngStream& rng);

// Component of o in the o-wired forest (root set {o, sink}): all k neighbors
// of o are candidates.
PlainTree sample_tree_wired_component(const RadialParams& p, RngStream& rng);

// Component of o in the wired forest: the future ray from o (depth_cap
// vertices of it are kept) together with the pasts hanging off it. Intrinsic
// distance from o equals tree level here, so depth_cap truncates at
// intrinsic radius depth_cap.
PlainTree sample_tree_component(const RadialParams& p, RngStream& rng);

// Critical Galton-Watson tree conditioned to survive (Kesten's tree), cut at
// `depth`: a spine of depth + 1 vertices, each spine vertex getting a
// size-biased number of children minus the spine child, every off-spine child
// rooting an independent unconditioned bush. offspring[j] = P(j children),
// mean one.
PlainTree kesten_tree_sample(std::uint32_t depth, const std::vector<double>& offspring, RngStream& rng,
                             std::uint32_t volume_cap = 0xFFFFFFFFu);

// Binomial(2, 1/2): the offspring law of pasts on the 3-regular tree.
std::vector<double> binary_critical_offspring();

// Unconditioned Galton-Watson tree cut at `depth`.
PlainTree galton_watson_sample(std::uint32_t depth, const std::vector<double>& offspring, RngStream& rng,
                               std::uint32_t volume_cap = 0xFFFFFFFFu);

} // namespace usf
