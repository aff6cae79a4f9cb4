#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "usf/forest.hpp"
#include "usf/network.hpp"
#include "usf/observe.hpp"
#include "usf/rng.hpp"

namespace usf {

// Heights on the non-sink vertices (sink entries are kept at zero). Stable
// means height(v) <= deg(v) - 1 everywhere, deg counting parallel edges to
// the sink. Sandpiles need unit conductances.
struct SandpileConfig {
    std::vector<std::int32_t> height;
    bool stable = true;
};

struct Odometer {
    std::vector<std::uint32_t> topple_count; // per vertex
    std::uint64_t av_size = 0;               // total topplings |Av|
    std::vector<VertexId> avc;               // vertices that toppled, sorted
    std::uint32_t avc_extrinsic_diameter = 0;
};

enum class ToppleOrder { fifo, random };

struct SandpileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

bool is_stable(const Network& net, const SandpileConfig& c);

// Adds a grain at `seed` and topples until stable. Random order draws the
// next unstable vertex uniformly (rng required).
std::pair<SandpileConfig, Odometer> stabilize(const Network& net, const SandpileConfig& config, VertexId seed,
                                              ToppleOrder order = ToppleOrder::fifo, RngStream* rng = nullptr);

// final(u) = initial(u) + [u = seed] + sum_{w ~ u} count(w) - deg(u) count(u)
// on every non-sink u, with neighbors counted per edge.
bool conservation_holds(const Network& net, const SandpileConfig& initial, const SandpileConfig& final_config,
                        VertexId seed, const Odometer& odo);

// Burning bijection with respect to the sink. Burning time t(u) is the tree
// depth; with the neighbor slots of u ordered by (neighbor id, slot),
// B'_u = {slots to w with t(w) < t(u) - 1} and P_u = {slots to w with
// t(w) = t(u) - 1}, and height(u) = deg(u) - |B'_u| - 1 - rank of the parent
// slot in P_u.
SandpileConfig tree_to_recurrent(const Network& net, const OrientedForest& tree);
// Inverse map; throws SandpileError when the configuration is not recurrent.
OrientedForest recurrent_to_tree(const Network& net, const SandpileConfig& config);
// Burning test. burn_time receives t(u) (0 at the sinks, kNoVertex for
// unburnt vertices) when given.
bool is_recurrent(const Network& net, const SandpileConfig& config, std::vector<std::uint32_t>* burn_time = nullptr);

// Wilson sample pushed through the bijection: exactly uniform.
SandpileConfig uniform_recurrent_sample(const Network& net, RngStream& rng);

// Uniform recurrent sandpile whose heights are produced on demand from a
// lazily sampled wired forest, for networks too large to sample whole.
// Avalanches from it are exact; each reset() draws an independent
// configuration.
class LazySandpile {
public:
    explicit LazySandpile(const Network& net);
    void reset() { lw_.reset(); ++epoch_; }
    std::int32_t height(VertexId u, RngStream& rng);

    struct Avalanche {
        std::uint64_t size = 0;              // |Av|
        std::vector<VertexId> cluster;       // AvC
        std::vector<std::uint32_t> counts;   // topplings, aligned with cluster
    };
    // Avalanche from adding one grain at `seed` to the current configuration.
    // The configuration itself is left unchanged.
    Avalanche avalanche(VertexId seed, RngStream& rng);

    const LocalWilson& forest() const { return lw_; }

private:
    const Network& net_;
    LocalWilson lw_;
    std::uint32_t epoch_ = 1;
    std::vector<std::uint32_t> known_; // epoch stamps for base heights
    std::vector<std::int32_t> base_;
    std::vector<std::uint32_t> touched_stamp_;
    std::vector<std::int32_t> work_;
    std::vector<std::uint32_t> count_;
    std::vector<char> queued_;
    std::vector<VertexId> pending_;
    std::uint32_t avalanche_epoch_ = 0;
};

struct AvalancheRecord {
    std::uint64_t sample = 0;
    VertexId origin = kNoVertex;
    std::uint64_t size = 0;
    std::uint64_t cluster = 0;
    std::uint32_t diameter = 0;
    bool truncated = false;
};

struct AvalancheReport {
    TailCurve size;
    TailCurve cluster;
    TailCurve diameter;
    std::vector<AvalancheRecord> records;
};

// M independent uniform recurrent configurations; each gets one avalanche
// per origin. Per-configuration groups are the error units. An avalanche
// is truncated when its cluster reaches within `margin` of the sink.
AvalancheReport avalanche_statistics(const Network& net, const std::vector<VertexId>& origins, std::uint64_t M,
                                     std::uint32_t margin, const std::vector<double>& size_thresholds,
                                     const std::vector<double>& diameter_thresholds, RngStream& rng);

struct DharEntry {
    VertexId u = kNoVertex;
    double mean = 0.0;
    double stderr_ = 0.0;
    double expected = 0.0; // G(v, u) / deg(u)
    double green = 0.0;    // G(v, u), expected visits
};

struct DharReport {
    std::vector<DharEntry> entries;
    std::uint64_t samples = 0;
    double worst_z = 0.0;
    bool passed = false; // every |mean - expected| <= 3 stderr
};

// Mean odometer from adding at v over M uniform recurrent configurations,
// against the inverse sandpile Laplacian G(v, u) / deg(u).
DharReport dhar_check(const Network& net, VertexId v, std::uint64_t M, RngStream& rng);

} // namespace usf
