#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "usf/network.hpp"
#include "usf/rng.hpp"

namespace usf {

struct WalkPath {
    std::vector<VertexId> vertices;
    std::vector<Slot> slots; // slots[i] leads from vertices[i] to vertices[i+1]
    bool stopped = false;    // false when the step budget ran out first

    std::size_t length() const { return slots.size(); }
};

enum class StopKind { hit_set, hit_sink, budget, revisit_set };

struct StopRule {
    StopKind kind = StopKind::hit_sink;
    std::vector<VertexId> set;
    std::uint64_t budget = std::numeric_limits<std::uint64_t>::max();

    static StopRule hit_sink(std::uint64_t budget = std::numeric_limits<std::uint64_t>::max())
    {
        return {StopKind::hit_sink, {}, budget};
    }
    static StopRule hit_set(std::vector<VertexId> k,
                            std::uint64_t budget = std::numeric_limits<std::uint64_t>::max())
    {
        return {StopKind::hit_set, std::move(k), budget};
    }
    // Stops at the first time n >= 1 with X_n in the set.
    static StopRule revisit_set(std::vector<VertexId> k,
                                std::uint64_t budget = std::numeric_limits<std::uint64_t>::max())
    {
        return {StopKind::revisit_set, std::move(k), budget};
    }
    static StopRule steps(std::uint64_t n) { return {StopKind::budget, {}, n}; }
};

// Every rule also stops on the step budget; `stopped` records which fired.
WalkPath run_walk(const Network& net, VertexId start, const StopRule& stop, RngStream& rng);

struct LoopDecomposition {
    WalkPath erased;
    std::vector<std::size_t> ell; // ell[k]: time of the k-th loop-erasure point

    // max{k : ell_k <= n}
    std::size_t rho(std::size_t n) const;
    // max{ell_k : ell_k <= n}
    std::size_t eta(std::size_t n) const { return ell[rho(n)]; }
};

// Chronological loop erasure together with the contributing times
// ell_0 = 0, ell_{k+1} = 1 + max{m : w_m = w_{ell_k}}.
LoopDecomposition loop_erase(const WalkPath& path);

// Contributing times ell_0..ell_{n+1} of a walk from the root of the
// infinite k-regular tree. On a tree the loop erasure is the geodesic to
// the walk's limit point, so ell_{j+1} - 1 is the last visit to distance j,
// and only the distance process matters. The walk runs until it sits
// `horizon` levels above n; a later return below n has probability
// (k-1)^{-horizon}.
std::vector<std::uint64_t> regular_tree_loop_times(int k, std::size_t n, RngStream& rng, int horizon = 64);

// Exact distributions p_n(v, .) for n = 0..T, sinks absorbing.
// Throws when the dense tables would exceed memory_budget bytes.
std::vector<std::vector<double>> heat_kernel(const Network& net, VertexId v, int T,
                                             std::size_t memory_budget = std::size_t{1} << 30);

// p_n(v, v) for n = 0..N. Torus lattices with unit conductances use the
// exact coordinate-product formula; tree balls rooted at 0 use the exact
// distance chain; everything else iterates the kernel.
std::vector<double> return_probabilities(const Network& net, VertexId v, int N);

// p_n(o, o) on the infinite k-regular tree, n = 0..N.
std::vector<double> regular_tree_return_probabilities(int k, int N);

// sup_{u,v} p_n(u, v) on the infinite k-regular tree, n = 0..N. The tree is
// transitive, so this is max_j P(|X_n| = j) / #{vertices at distance j}.
std::vector<double> regular_tree_sup_kernel(int k, int N);

struct BubbleReport {
    std::vector<double> partial_sums; // s_N = sum_{n <= N} (n + 1) p_n(v, v)
    double weight_ratio = 1.0;        // sup c / inf c
    double alpha = 0.0;               // 4 * weight_ratio * s_N at the final cutoff
    double growth_ratio = 0.0;        // (s_N - s_{N/2}) / (s_{N/2} - s_{N/4})
    bool diverged = false;
};

inline constexpr double kBubbleGrowthThreshold = 0.8;

BubbleReport bubble_from_returns(const std::vector<double>& returns, double weight_ratio);
BubbleReport bubble_diagram(const Network& net, VertexId v, int N);

// sup c / inf c over the non-sink vertices.
double weight_ratio(const Network& net);

struct SolveReport {
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

struct SolveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kSolveTolerance = 1e-10;

// Solves the Dirichlet problem L x = rhs on the free vertices, where
// (L x)(u) = c(u) x(u) - sum_s c(u, s) x(target(u, s)) and x is pinned to
// `pinned_value` wherever `pinned` is nonzero. Preconditioned conjugate
// gradients; throws SolveError if the relative residual stalls above tol.
std::vector<double> solve_dirichlet(const Network& net, const std::vector<char>& pinned,
                                    const std::vector<double>& pinned_value, const std::vector<double>& rhs,
                                    SolveReport* report = nullptr, double tol = kSolveTolerance);

// G(v, u) = expected number of visits to u by the walk from v before it is
// absorbed at the sinks. Reversibility: c(v) G(v, u) = c(u) G(u, v).
std::vector<double> green_function(const Network& net, VertexId v, SolveReport* report = nullptr);

// Cap(K) = sum_{u in K} c(u) P_u(hit the sinks before returning to K).
double capacity(const Network& net, const std::vector<VertexId>& K);

// Effective conductance between K and {v, sinks}; for v in K this is
// Cap(K) + c(v), the rate of v-wired trajectories hitting K.
double capacity_v(const Network& net, VertexId v, const std::vector<VertexId>& K);

struct McEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::uint64_t samples = 0;
};

// Monte Carlo Cap(K) with `walks_per_vertex` escape trials from each u in K.
McEstimate capacity_mc(const Network& net, const std::vector<VertexId>& K, std::uint64_t walks_per_vertex,
                       RngStream& rng);

// Cap_k(A, B) = sum_{v in A} c(v) P_v(tau+_B >= k), hitting the sinks first
// counting as tau+_B = infinity. Monte Carlo per vertex of A.
McEstimate cap_k(const Network& net, const std::vector<VertexId>& A, const std::vector<VertexId>& B,
                 std::uint64_t k, std::uint64_t walks_per_vertex, RngStream& rng);

// I(A) = sum_{u, w in A} c(u) c(w) G(u, w).
double i_functional(const Network& net, const std::vector<VertexId>& A);

// Probability that two independent walks from v, run to the sinks, never
// return to v and never meet each other after time zero.
McEstimate estimate_q(const Network& net, VertexId v, std::uint64_t pairs, RngStream& rng);

// Mean of the last time a walk from v (run to the sinks) is within graph
// distance r of v.
McEstimate estimate_L_r(const Network& net, VertexId v, std::uint32_t r, std::uint64_t walks, RngStream& rng);

// In a k-regular tree ball, a walk starts at a child y of x inside the
// subtree below x, and x is `levels` steps above the sink (x at level L of a
// radius-R ball has levels = R + 1 - L). Returns P(hit x before the sink):
// gambler's ruin with ratio r = 1/(k-1), (r - r^N) / (1 - r^N).
double tree_hit_before_sink(int k, int levels);

} // namespace usf
