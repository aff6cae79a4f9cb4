#pragma once

#include <cstdint>
#include <vector>

#include "usf/forest.hpp"
#include "usf/network.hpp"
#include "usf/walk.hpp"

namespace usf {

struct Excursion {
    double time = 0.0;
    WalkPath path; // starts and ends in the root set
};

// Finite-volume interlacement process: a Poisson process of excursions from
// the root set ({sink} when wired, {v, sink} when v-wired) at rate equal to
// the total conductance of the root set, each excursion a walk started from
// a root slot chosen proportionally to conductance and stopped on its first
// return to the root set.
struct TrajectorySoup {
    double a = 0.0;
    double b = 0.0;          // requested window end
    double b_extended = 0.0; // window end after coverage extension
    double rate = 0.0;
    RootSet roots;
    std::vector<Excursion> items; // increasing times
    bool covered = false;         // every non-root vertex hit at some time >= b
};

struct SoupOptions {
    bool extend_to_cover = true;
    std::uint64_t excursion_budget = 10'000'000;
};

TrajectorySoup sample_soup(const Network& net, const RootSet& roots, double a, double b, RngStream& rng,
                           const SoupOptions& opt = {});

// Per-vertex first-entry records, sorted by time, for repeated AB_t queries.
class SoupIndex {
public:
    SoupIndex(const Network& net, const TrajectorySoup& soup);

    struct Entry {
        double time;
        std::uint32_t item;
        VertexId from; // vertex the trajectory came from on first entry
        Slot back;     // slot at the entered vertex leading back to `from`
    };
    const std::vector<Entry>& entries(VertexId v) const { return entries_[v]; }
    // First entry at time >= t, or nullptr.
    const Entry* first_at_or_after(VertexId v, double t) const;
    // Whether some trajectory with time in [s, t) visits v.
    bool hit_during(VertexId v, double s, double t) const;

private:
    std::vector<std::vector<Entry>> entries_;
};

struct CoverageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// AB_t: every non-root vertex takes the reversal of the first-entry edge of
// the first trajectory at time >= t that visits it.
OrientedForest ab_forest(const Network& net, const TrajectorySoup& soup, const SoupIndex& idx, double t);
OrientedForest ab_forest(const Network& net, const TrajectorySoup& soup, double t);

enum class DynamicsVerdict { equal, differ, not_applicable };

struct DynamicsReport {
    DynamicsVerdict verdict = DynamicsVerdict::not_applicable;
    std::size_t past_s = 0;      // |P_s(u)|
    std::size_t past_t = 0;      // |P_t(u)|
    std::size_t component = 0;   // size of the component of u in P_t(u) minus I_[s,t)
};

// Pathwise check that P_s(u) equals the component of u in the subgraph of
// P_t(u) induced by the vertices not visited during [s, t); applicable only
// if u itself is not visited during [s, t). Covers both the wired and the
// v-wired soup (u must not be a root).
DynamicsReport past_dynamics_check(const Network& net, const TrajectorySoup& soup, const SoupIndex& idx, VertexId u,
                                   double s, double t);

// Number of excursions with time in [a, b] visiting K (start and end
// points included).
std::uint64_t count_hitting(const TrajectorySoup& soup, const std::vector<VertexId>& K);

struct PoissonTestReport {
    double expected_mean = 0.0;
    double observed_mean = 0.0;
    double mean_stderr = 0.0;
    double chi_square = 0.0;
    int dof = 0;
    double p_value = 0.0;
};

// Chi-square goodness of fit of counts against Poisson(lambda), adjacent
// tail cells merged until every expected count is at least 5.
PoissonTestReport poisson_goodness_of_fit(const std::vector<std::uint64_t>& counts, double lambda);

// Samples `soups` independent soups on [0, window] and tests the K-hitting
// counts against Poisson(window * Cap), with Cap = capacity(K) for the
// wired root set and capacity_v(v, K) for {v, sink}.
PoissonTestReport capacity_poisson_check(const Network& net, const RootSet& roots, const std::vector<VertexId>& K,
                                         double window, std::uint64_t soups, RngStream& rng);

} // namespace usf
