#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "usf/forest.hpp"
#include "usf/network.hpp"
#include "usf/observe.hpp"
#include "usf/rng.hpp"

namespace usf {

inline constexpr int kSummarySchemaVersion = 1;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BudgetError : std::runtime_error {
    BudgetError(const std::string& what, std::uint64_t estimate) : std::runtime_error(what), estimate_bytes(estimate) {}
    std::uint64_t estimate_bytes;
};

enum class ExperimentKind { forest_exponents, dimensions, interlacement_tests, sandpile, validate };

const char* kind_name(ExperimentKind k);

// [graph] section. type = lattice | tree | edges.
struct GraphSpec {
    std::string type = "lattice";
    int dimension = 2;
    int side = 8;
    int degree = 3;
    int radius = 10;
    std::string edges_file;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::validate;
    GraphSpec graph;
    std::uint64_t samples = 100;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::string output = "out";
    std::uint64_t memory_budget = std::uint64_t{2} << 30;

    // [measure]
    std::uint32_t margin = 2;
    double r_min = 2;
    double r_max = 16;
    double v_min = 4;
    double v_max = 256;
    std::uint32_t origins = 1;
    std::string spacing = "dyadic"; // length thresholds: dyadic | integer
    std::uint32_t depth_cap = 0;    // 0: 4 r_max
    std::uint32_t volume_cap = 0;   // 0: 4 v_max

    // [dimensions]
    std::string source = "kesten";
    std::uint32_t depth = 256;
    std::uint32_t n_lo = 8;
    std::uint32_t n_hi = 128;
    std::uint32_t return_samples = 4;
    std::uint32_t walks = 8;
    std::uint64_t steps_lo = 64;
    std::uint64_t steps_hi = 1 << 16;

    // [interlace]
    double window = 1.0;
    std::string wiring = "wired";
    std::uint32_t wired_vertex = 0;
    std::vector<VertexId> hitting_set;
    std::uint64_t soups = 1000;

    std::string text; // the config file as given
};

// Parses the INI-style config (sections [experiment], [graph], [measure],
// [dimensions], [interlace]). Unknown keys, missing required keys and values
// out of range raise ConfigError with a message naming the key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

Network build_network(const ExperimentConfig& cfg);

// Peak memory in bytes for the run, from vertex counts and per-worker
// workspaces; throws BudgetError when it exceeds cfg.memory_budget.
std::uint64_t estimate_memory(const ExperimentConfig& cfg);
void check_budget(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Sample farm

// Runs fn(state, index, rng) for index = 0..count-1 on `workers` threads.
// Each index draws from RngStream(master, index) and every worker owns one
// State, so the per-index results depend only on (master, index). They are
// returned in index order.
// `progress`, when set, is called with the number of finished indices
// roughly every tenth of the run.
using ProgressFn = std::function<void(std::uint64_t done, std::uint64_t total)>;

template <class Result, class State>
std::vector<Result> farm(std::uint64_t count, unsigned workers, std::uint64_t master,
                         const std::function<State()>& make_state,
                         const std::function<Result(State&, std::uint64_t, RngStream&)>& fn,
                         const ProgressFn& progress = {})
{
    std::vector<Result> out(count);
    workers = static_cast<unsigned>(std::max<std::uint64_t>(1, std::min<std::uint64_t>(workers, count)));
    std::mutex mu;
    std::uint64_t done = 0;
    const std::uint64_t tick = std::max<std::uint64_t>(1, count / 10);
    std::exception_ptr error;
    auto body = [&](unsigned w) {
        try {
            State state = make_state();
            for (std::uint64_t i = w; i < count; i += workers) {
                RngStream rng(master, i);
                out[i] = fn(state, i, rng);
                if (progress) {
                    std::lock_guard lock(mu);
                    if (++done % tick == 0 || done == count)
                        progress(done, count);
                }
            }
        } catch (...) {
            std::lock_guard lock(mu);
            error = std::current_exception();
        }
    };
    if (workers == 1) {
        body(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(body, w);
        for (auto& t : pool)
            t.join();
    }
    if (error)
        std::rethrow_exception(error);
    return out;
}

// ---------------------------------------------------------------------------
// Sampler exactness against enumeration

struct OracleNet {
    std::string name;
    Network net;
    RootSet roots;
};

// 4-cycle, K3, triangle with conductances (1, 2, 3), 2x3 wired grid and the
// 2x2 wired grid with one corner wired to the sink.
std::vector<OracleNet> oracle_networks();

enum class SamplerKind { wilson, aldous_broder, ab_t };
const char* sampler_name(SamplerKind k);

struct ExactnessReport {
    std::size_t cells = 0;
    std::uint64_t samples = 0;
    double chi_square = 0.0;
    double p_value = 0.0;
};

// Chi-square of sampled forest frequencies against the weighted enumeration.
// AB_t uses soups on [0, 1] read at t = 1/2.
ExactnessReport sampler_exactness(const Network& net, const RootSet& roots, SamplerKind kind, std::uint64_t samples,
                                  std::uint64_t seed, unsigned workers = 1);

// Pearson statistic and upper-tail p-value of counts against probabilities.
ExactnessReport chi_square_test(const std::vector<double>& observed, const std::vector<double>& prob);

// ---------------------------------------------------------------------------
// Runners

struct FitOutcome {
    std::optional<ExponentFit> fit;
    std::string error;
};

FitOutcome try_fit(const TailCurve& curve, double lo, double hi);
nlohmann::json fit_json(const FitOutcome& f);

struct RunOutcome {
    int status = 0;
    nlohmann::json summary;
    std::vector<std::string> files;
};

// Forest-exponent tail curves for the configured network, in field order
// depth, volume, intrinsic_diameter, extrinsic_radius, extrinsic_diameter.
std::vector<TailCurve> forest_tail_curves(const ExperimentConfig& cfg);

// Runs the experiment, writes its CSV files and summary.json under
// cfg.output, and reports progress on `log`.
RunOutcome run_experiment(const ExperimentConfig& cfg, std::ostream& log);

} // namespace usf
