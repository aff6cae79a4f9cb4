#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "usf/forest.hpp"
#include "usf/network.hpp"
#include "usf/tree_ball.hpp"

namespace usf {

// Graph distance to the sinks, cached for generic networks.
class MarginMap {
public:
    explicit MarginMap(const Network& net);
    std::uint32_t distance_to_sink(VertexId v) const
    {
        return table_.empty() ? net_.distance_to_sink(v) : table_[v];
    }
    const Network& network() const { return net_; }

private:
    const Network& net_;
    std::vector<std::uint32_t> table_;
};

struct PastSummary {
    VertexId origin = kNoVertex;
    std::uint64_t volume = 0;
    std::uint32_t depth = 0;
    std::uint32_t intrinsic_diameter = 0;
    std::uint32_t extrinsic_radius = 0;
    std::uint32_t extrinsic_diameter = 0;
    bool truncated = false; // reaches within `margin` of the sinks, or exploration was capped
};

// Summary of a cluster given in breadth-first order from its center:
// from[i] is the index of the neighbor of vertices[i] one step closer to
// vertices[0]. Box mode uses the signed-coordinate-span diameter, tree mode
// the double sweep (exact in tree metrics), generic mode all pairs.
PastSummary summarize_cluster(const MarginMap& mm, const LocalCluster& c, std::uint32_t margin);
PastSummary summarize_past(const MarginMap& mm, const OrientedForest& f, const ForestIndex& idx, VertexId v,
                           std::uint32_t margin);

// Summary of a radially sampled tree-ball past centered at 0. In a tree
// ball the past of the center moves away from it at every step, so the
// extrinsic fields equal the intrinsic ones. `truncated` copies t.capped.
PastSummary summarize_plain_tree(const PlainTree& t);

// Up to `count` box sites at graph distance >= S/4 from the sink, on the
// lattice of spacing max(1, S/8) and chosen by farthest-point order from
// the center, so they are pairwise >= S/8 apart.
std::vector<VertexId> bulk_origins(const Network& net, std::size_t count);

// Max pairwise graph distance within a vertex set (box: l1 spans, tree:
// double sweep, generic: breadth-first search from every element).
std::uint32_t extrinsic_diameter(const Network& net, const std::vector<VertexId>& set);

// Max pairwise l1 distance of lattice points via the 2^{d-1} signed sums.
std::uint32_t l1_diameter(const std::vector<std::vector<int>>& points);

// Rooted tree (as PlainTree) spanned by a cluster, center at index 0.
PlainTree cluster_tree(const LocalCluster& c);
// Tree metric ball B(v, n) of a forest as a PlainTree centered at v.
PlainTree forest_ball_tree(const OrientedForest& f, const ForestIndex& idx, VertexId v, std::uint32_t n);

// ---------------------------------------------------------------------------
// Tail curves and exponent fits

// Survival counts over fixed thresholds. Samples are grouped into units (a
// forest and its origins, say); standard errors treat units as i.i.d.
class TailCurve {
public:
    TailCurve() = default;
    TailCurve(std::string field, std::vector<double> thresholds);

    // One unit of samples: statistic values and truncation flags. A
    // truncated value is a lower bound for the true statistic.
    void add_unit(const std::vector<double>& values, const std::vector<char>& truncated);
    void add(double value, bool truncated = false) { add_unit({value}, {static_cast<char>(truncated)}); }
    void merge(const TailCurve& other);

    const std::string& field() const { return field_; }
    const std::vector<double>& thresholds() const { return thresholds_; }
    std::uint64_t survivors(std::size_t i) const { return survivors_[i]; }
    std::uint64_t total() const { return total_; }
    std::uint64_t units() const { return units_; }
    // Truncated samples below threshold i: their survival is undecided.
    std::uint64_t ambiguous(std::size_t i) const { return ambiguous_[i]; }
    double probability(std::size_t i) const;
    double stderr_at(std::size_t i) const;
    double ambiguous_fraction(std::size_t i) const;

    void write_csv(std::ostream& os, bool header = true) const;

private:
    std::string field_;
    std::vector<double> thresholds_;
    std::vector<std::uint64_t> survivors_;
    std::vector<std::uint64_t> ambiguous_;
    // Per-unit survival fractions: sum and sum of squares, for cluster errors.
    std::vector<double> unit_sum_;
    std::vector<double> unit_sq_;
    std::uint64_t total_ = 0;
    std::uint64_t units_ = 0;
};

// Powers of two from lo to hi inclusive.
std::vector<double> dyadic_thresholds(double lo, double hi);

struct ExponentFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_ = 0.0;          // least-squares residual error of the slope
    double sampling_stderr = 0.0;  // propagated from the per-point errors
    double r_min = 0.0;
    double r_max = 0.0;
    std::size_t points = 0;
};

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kMinSurvivors = 50;
inline constexpr double kMaxAmbiguous = 0.05;

// Unweighted least squares of log p against log R over thresholds in
// [r_min, r_max] with at least kMinSurvivors survivors and ambiguous
// fraction below kMaxAmbiguous. Needs two usable points.
ExponentFit fit_exponent(const TailCurve& curve, double r_min, double r_max);
// Least squares of log y against log x, with optional per-point standard
// errors of y for the propagated slope error.
ExponentFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y,
                       const std::vector<double>& y_stderr = {});

// ---------------------------------------------------------------------------
// Ball growth, resistance, pioneers

// |B(0, n)| for n = 0..n_max in a tree centered at 0.
std::vector<std::uint64_t> ball_volume_profile(const PlainTree& t, std::uint32_t n_max);
std::vector<std::uint64_t> ball_volume_profile(const OrientedForest& f, const ForestIndex& idx, VertexId v,
                                               std::uint32_t n_max);

struct ResistanceReport {
    double resistance = std::numeric_limits<double>::infinity();
    double conductance = 0.0;
    std::vector<std::uint64_t> lanes; // lanes[k] = N(n, k), k = 0..n
    bool lemma_holds = true;          // conductance <= lanes[k] / k for 1 <= k <= n
};

// Unit-conductance resistance between the center 0 and the vertices at
// distance exactly n, by series-parallel reduction; lanes counts the vertices
// at distance k that lie on a geodesic from 0 to distance n.
ResistanceReport effective_resistance_to_level(const PlainTree& t, std::uint32_t n);

// Pioneers of Lambda_m = origin + [-m, m]^d in the component of the origin
// of an origin-wired forest: vertices with l_inf distance exactly m from the
// origin whose tree path to the origin stays in Lambda_m, within intrinsic
// distance n. Lambda_m must stay off the sink.
std::uint64_t pioneer_count(const Network& net, const OrientedForest& f, const ForestIndex& idx, VertexId origin,
                            int m, std::uint32_t n);
// Same on a lazily sampled origin-wired forest.
std::uint64_t pioneer_count(LocalWilson& lw, VertexId origin, int m, std::uint32_t n, RngStream& rng);

// ---------------------------------------------------------------------------
// Dimension estimators on trees centered at 0

// p_{2n}(0, 0) for n = 0..n_max of the simple walk on the tree, by exact
// iteration of p_n(0, .) and p_{2n}(0, 0) = sum_u p_n(0, u)^2 deg(0)/deg(u).
// Exact when every vertex within distance n_max of 0 has its full degree in
// `t` (vertices deeper than n_max are never used).
std::vector<double> tree_even_returns(const PlainTree& t, std::uint32_t n_max);

// Largest distance from 0 reached by a walk of `steps` steps, recorded at
// each checkpoint. Throws if the walk reaches a vertex at t.height() while t
// is capped (the degree there is unknown).
std::vector<std::uint32_t> tree_walk_max_displacement(const PlainTree& t, const std::vector<std::uint64_t>& checkpoints,
                                                      RngStream& rng);

struct DimensionFit {
    double value = 0.0;
    ExponentFit fit;
};

// d_s = -2 * slope of log p_{2n} against log n over [n_lo, n_hi].
DimensionFit spectral_dimension(const std::vector<double>& even_returns, std::uint32_t n_lo, std::uint32_t n_hi);
// d_f = slope of log E|B(n)| against log n.
DimensionFit volume_dimension(const std::vector<double>& n, const std::vector<double>& mean_volume);
// d_w = 1 / slope of log E[max displacement] against log n.
DimensionFit walk_dimension(const std::vector<double>& n, const std::vector<double>& mean_displacement);

} // namespace usf
