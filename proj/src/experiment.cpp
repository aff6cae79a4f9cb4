#include "usf/experiment.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "usf/interlace.hpp"
#include "usf/sandpile.hpp"
#include "usf/tree_ball.hpp"
#include "usf/walk.hpp"

namespace usf {

namespace fs = std::filesystem;
namespace ptree_ns = boost::property_tree;
using json = nlohmann::json;

const char* kind_name(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::forest_exponents:
        return "forest-exponents";
    case ExperimentKind::dimensions:
        return "dimensions";
    case ExperimentKind::interlacement_tests:
        return "interlacement-tests";
    case ExperimentKind::sandpile:
        return "sandpile";
    case ExperimentKind::validate:
        return "validate";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Config

namespace {

const std::map<std::string, std::set<std::string>>& schema()
{
    static const std::map<std::string, std::set<std::string>> s = {
        {"experiment", {"kind", "samples", "seed", "workers", "output", "memory_budget_mb"}},
        {"graph", {"type", "dimension", "side", "degree", "radius", "edges"}},
        {"measure", {"margin", "r_min", "r_max", "v_min", "v_max", "origins", "spacing", "depth_cap", "volume_cap"}},
        {"dimensions", {"source", "depth", "n_lo", "n_hi", "return_samples", "walks", "steps_lo", "steps_hi"}},
        {"interlace", {"window", "wiring", "wired_vertex", "hitting_set", "soups"}},
    };
    return s;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

class Reader {
public:
    explicit Reader(const ptree_ns::ptree& t) : t_(t) {}

    bool has(const std::string& key) const { return t_.get_optional<std::string>(key).has_value(); }

    std::string raw(const std::string& key) const { return trim(*t_.get_optional<std::string>(key)); }

    [[noreturn]] static void fail(const std::string& key, const std::string& msg)
    {
        const auto dot = key.find('.');
        throw ConfigError("config: [" + key.substr(0, dot) + "] " + key.substr(dot + 1) + ": " + msg);
    }

    void require(const std::string& key) const
    {
        if (!has(key))
            fail(key, "missing required key");
    }

    std::uint64_t uint(const std::string& key, std::uint64_t def, std::uint64_t lo, std::uint64_t hi) const
    {
        if (!has(key))
            return def;
        const std::string s = raw(key);
        std::uint64_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || v < lo || v > hi)
            fail(key, "expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got '" + s +
                          "'");
        return v;
    }

    double real(const std::string& key, double def, double lo, double hi) const
    {
        if (!has(key))
            return def;
        const std::string s = raw(key);
        double v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || !(v >= lo && v <= hi)) {
            std::ostringstream m;
            m << "expected a number in [" << lo << ", " << hi << "], got '" << s << "'";
            fail(key, m.str());
        }
        return v;
    }

    std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& allowed) const
    {
        if (!has(key))
            return def;
        const std::string s = raw(key);
        for (const auto& a : allowed)
            if (s == a)
                return s;
        std::string list;
        for (const auto& a : allowed)
            list += (list.empty() ? "" : ", ") + a;
        fail(key, "expected one of {" + list + "}, got '" + s + "'");
    }

    std::string str(const std::string& key, const std::string& def) const { return has(key) ? raw(key) : def; }

private:
    const ptree_ns::ptree& t_;
};

void check_schema(const ptree_ns::ptree& t)
{
    for (const auto& [section, body] : t) {
        const auto it = schema().find(section);
        if (it == schema().end()) {
            if (body.empty())
                throw ConfigError("config: key '" + section + "' must sit inside a section");
            throw ConfigError("config: unknown section [" + section + "]");
        }
        for (const auto& [key, value] : body)
            if (!it->second.count(key))
                throw ConfigError("config: [" + section + "] " + key + ": unknown key");
    }
}

} // namespace

ExperimentConfig parse_config(const std::string& text)
{
    // '#' starts a comment anywhere on a line; the ini reader only knows ';'
    // at line start.
    std::string stripped;
    {
        std::istringstream lines(text);
        for (std::string line; std::getline(lines, line);) {
            if (auto hash = line.find('#'); hash != std::string::npos)
                line.erase(hash);
            stripped += line;
            stripped += '\n';
        }
    }
    ptree_ns::ptree t;
    std::istringstream in(stripped);
    try {
        ptree_ns::ini_parser::read_ini(in, t);
    } catch (const ptree_ns::ini_parser_error& e) {
        throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
    }
    check_schema(t);
    const Reader r(t);
    ExperimentConfig c;
    c.text = text;

    r.require("experiment.kind");
    const std::string kind = r.choice("experiment.kind", "",
                                      {"forest-exponents", "dimensions", "interlacement-tests", "sandpile", "validate"});
    for (auto k : {ExperimentKind::forest_exponents, ExperimentKind::dimensions, ExperimentKind::interlacement_tests,
                   ExperimentKind::sandpile, ExperimentKind::validate})
        if (kind == kind_name(k))
            c.kind = k;
    const bool validate = c.kind == ExperimentKind::validate;

    if (!validate)
        r.require("experiment.samples");
    c.samples = r.uint("experiment.samples", c.samples, 1, std::uint64_t{1} << 40);
    c.seed = r.uint("experiment.seed", c.seed, 0, std::numeric_limits<std::uint64_t>::max());
    c.workers = static_cast<unsigned>(r.uint("experiment.workers", c.workers, 1, 1024));
    c.output = r.str("experiment.output", c.output);
    if (c.output.empty())
        Reader::fail("experiment.output", "must not be empty");
    c.memory_budget = r.uint("experiment.memory_budget_mb", c.memory_budget >> 20, 1, std::uint64_t{1} << 24) << 20;

    const bool needs_graph = !validate && !(c.kind == ExperimentKind::dimensions &&
                                            r.str("dimensions.source", c.source) == "kesten");
    if (needs_graph)
        r.require("graph.type");
    c.graph.type = r.choice("graph.type", c.graph.type, {"lattice", "tree", "edges"});
    c.graph.dimension = static_cast<int>(r.uint("graph.dimension", c.graph.dimension, 1, kMaxDimension));
    c.graph.side = static_cast<int>(r.uint("graph.side", c.graph.side, 2, 1u << 20));
    c.graph.degree = static_cast<int>(r.uint("graph.degree", c.graph.degree, 3, 64));
    c.graph.radius = static_cast<int>(r.uint("graph.radius", c.graph.radius, 1, 1u << 24));
    c.graph.edges_file = r.str("graph.edges", "");
    if (needs_graph && c.graph.type == "edges" && c.graph.edges_file.empty())
        Reader::fail("graph.edges", "missing required key for type = edges");

    c.margin = static_cast<std::uint32_t>(r.uint("measure.margin", c.margin, 0, 1u << 20));
    c.r_min = r.real("measure.r_min", c.r_min, 1, 1e9);
    c.r_max = r.real("measure.r_max", c.r_max, 1, 1e9);
    if (c.r_max < c.r_min)
        Reader::fail("measure.r_max", "must be at least r_min");
    c.v_min = r.real("measure.v_min", c.v_min, 1, 1e12);
    c.v_max = r.real("measure.v_max", c.v_max, 1, 1e12);
    if (c.v_max < c.v_min)
        Reader::fail("measure.v_max", "must be at least v_min");
    c.origins = static_cast<std::uint32_t>(r.uint("measure.origins", c.origins, 1, 1u << 16));
    c.spacing = r.choice("measure.spacing", c.spacing, {"dyadic", "integer"});
    c.depth_cap = static_cast<std::uint32_t>(r.uint("measure.depth_cap", c.depth_cap, 0, 0xFFFFFFFEu));
    c.volume_cap = static_cast<std::uint32_t>(r.uint("measure.volume_cap", c.volume_cap, 0, 0xFFFFFFFEu));

    c.source = r.choice("dimensions.source", c.source, {"kesten", "component"});
    c.depth = static_cast<std::uint32_t>(r.uint("dimensions.depth", c.depth, 2, 1u << 16));
    c.n_lo = static_cast<std::uint32_t>(r.uint("dimensions.n_lo", c.n_lo, 1, 1u << 16));
    c.n_hi = static_cast<std::uint32_t>(r.uint("dimensions.n_hi", c.n_hi, 1, 1u << 16));
    c.return_samples = static_cast<std::uint32_t>(r.uint("dimensions.return_samples", c.return_samples, 0, 1u << 20));
    c.walks = static_cast<std::uint32_t>(r.uint("dimensions.walks", c.walks, 1, 1u << 20));
    c.steps_lo = r.uint("dimensions.steps_lo", c.steps_lo, 1, std::uint64_t{1} << 40);
    c.steps_hi = r.uint("dimensions.steps_hi", c.steps_hi, 1, std::uint64_t{1} << 40);

    c.window = r.real("interlace.window", c.window, 1e-9, 1e9);
    c.wiring = r.choice("interlace.wiring", c.wiring, {"wired", "v-wired"});
    c.wired_vertex = static_cast<std::uint32_t>(r.uint("interlace.wired_vertex", c.wired_vertex, 0, 0xFFFFFFFEu));
    c.soups = r.uint("interlace.soups", c.soups, 1, std::uint64_t{1} << 32);
    if (r.has("interlace.hitting_set")) {
        std::istringstream hs(r.raw("interlace.hitting_set"));
        std::string tok;
        while (hs >> tok) {
            std::uint32_t v = 0;
            const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc() || p != tok.data() + tok.size())
                Reader::fail("interlace.hitting_set", "expected vertex ids, got '" + tok + "'");
            c.hitting_set.push_back(v);
        }
    }

    switch (c.kind) {
    case ExperimentKind::forest_exponents:
        if (c.graph.type == "edges")
            Reader::fail("graph.type", "forest-exponents needs a lattice or tree graph");
        break;
    case ExperimentKind::sandpile:
        if (c.graph.type == "edges")
            Reader::fail("graph.type", "sandpile needs a lattice or tree graph");
        if (c.graph.type == "tree" && c.graph.radius > 26)
            Reader::fail("graph.radius", "sandpile tree balls are built explicitly; radius must be at most 26");
        break;
    case ExperimentKind::dimensions:
        if (c.source == "component" && c.graph.type != "tree")
            Reader::fail("graph.type", "source = component needs type = tree");
        if (c.n_hi < c.n_lo)
            Reader::fail("dimensions.n_hi", "must be at least n_lo");
        if (c.depth <= c.n_hi)
            Reader::fail("dimensions.depth", "must exceed n_hi");
        if (c.steps_hi < c.steps_lo)
            Reader::fail("dimensions.steps_hi", "must be at least steps_lo");
        break;
    case ExperimentKind::interlacement_tests:
        if (c.graph.type == "tree" && c.graph.radius > 20)
            Reader::fail("graph.radius", "interlacement tests need a small network");
        if (c.hitting_set.empty())
            Reader::fail("interlace.hitting_set", "missing required key");
        break;
    case ExperimentKind::validate:
        break;
    }
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

Network build_network(const ExperimentConfig& cfg)
{
    const auto& g = cfg.graph;
    if (g.type == "lattice") {
        LatticeSpec spec;
        spec.dimension = g.dimension;
        spec.side = g.side;
        return Network::lattice_box(spec);
    }
    if (g.type == "tree")
        return Network::regular_tree_ball(g.degree, g.radius);
    std::ifstream in(g.edges_file);
    if (!in)
        throw ConfigError("config: [graph] edges: cannot open '" + g.edges_file + "'");
    return parse_edge_list(in);
}

// ---------------------------------------------------------------------------
// Resource estimates

namespace {

double network_vertices(const ExperimentConfig& cfg)
{
    const auto& g = cfg.graph;
    if (g.type == "lattice")
        return std::pow(static_cast<double>(g.side), g.dimension) + 1;
    if (g.type == "tree")
        return 1 + g.degree * (std::pow(g.degree - 1.0, g.radius) - 1) / (g.degree - 2.0) + 1;
    std::error_code ec;
    const auto bytes = fs::file_size(g.edges_file, ec);
    return ec ? 1e6 : static_cast<double>(bytes);
}

std::uint32_t effective_depth_cap(const ExperimentConfig& c)
{
    return c.depth_cap ? c.depth_cap : static_cast<std::uint32_t>(std::min(4 * c.r_max, 4e9));
}

std::uint32_t effective_volume_cap(const ExperimentConfig& c)
{
    return c.volume_cap ? c.volume_cap : static_cast<std::uint32_t>(std::min(4 * c.v_max, 4e9));
}

double estimate_bytes(const ExperimentConfig& c)
{
    const double w = c.workers;
    switch (c.kind) {
    case ExperimentKind::forest_exponents: {
        const double results = 64.0 * c.samples * c.origins;
        const double cluster = 48.0 * effective_volume_cap(c);
        if (c.graph.type == "tree")
            return results + w * cluster;
        return results + w * (16.0 * network_vertices(c) + cluster);
    }
    case ExperimentKind::sandpile:
        return 48.0 * c.samples * c.origins + w * 48.0 * network_vertices(c);
    case ExperimentKind::dimensions: {
        // A tree cut at depth D has about D^2/4 vertices on average; a
        // factor 4 covers the upper tail.
        const double d = c.depth;
        const double per_tree = 4 * (d * d / 4) * 40.0;
        const double returns = c.return_samples ? 4 * (double(c.n_hi) * c.n_hi / 4) * 32.0 : 0.0;
        return w * (per_tree + returns) + 8.0 * c.samples * (64 + c.n_hi);
    }
    case ExperimentKind::interlacement_tests:
        return w * 256.0 * network_vertices(c) + 16.0 * (c.samples + c.soups);
    case ExperimentKind::validate:
        return 64.0 * (1 << 20);
    }
    return 0;
}

std::string mib(double bytes)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << bytes / (1 << 20) << " MiB";
    return s.str();
}

} // namespace

std::uint64_t estimate_memory(const ExperimentConfig& cfg)
{
    const double b = estimate_bytes(cfg);
    return b >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(b);
}

void check_budget(const ExperimentConfig& cfg)
{
    const auto est = estimate_memory(cfg);
    if (est > cfg.memory_budget)
        throw BudgetError("refusing to run: estimated peak memory " + mib(static_cast<double>(est)) +
                              " exceeds the budget of " + mib(static_cast<double>(cfg.memory_budget)) +
                              " (raise [experiment] memory_budget_mb or shrink the run)",
                          est);
}

// ---------------------------------------------------------------------------
// Exactness

std::vector<OracleNet> oracle_networks()
{
    std::vector<OracleNet> out;
    auto cycle = Network::from_edges(4, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 0, 1}}, {});
    out.push_back({"4-cycle", cycle, RootSet({0})});
    auto k3 = Network::from_edges(3, {{0, 1, 1}, {1, 2, 1}, {2, 0, 1}}, {});
    out.push_back({"K3", k3, RootSet({0})});
    auto tri = Network::from_edges(3, {{0, 1, 1}, {1, 2, 2}, {2, 0, 3}}, {});
    out.push_back({"weighted triangle", tri, RootSet({0})});
    std::vector<EdgeRecord> e;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) {
            const auto v = static_cast<VertexId>(r * 3 + c);
            if (c + 1 < 3)
                e.push_back({v, v + 1, 1});
            if (r + 1 < 2)
                e.push_back({v, v + 3, 1});
            const int missing = 4 - (c > 0) - (c < 2) - (r > 0) - (r < 1);
            for (int m = 0; m < missing; ++m)
                e.push_back({v, 6, 1});
        }
    auto grid = Network::from_edges(7, e, {6});
    out.push_back({"2x3 wired grid", grid, sink_roots(grid)});
    auto box = Network::lattice_box({2, 2, Boundary::wired, {}});
    out.push_back({"two-root 2x2 grid", box, merge_with_sink(box, 0)});
    return out;
}

const char* sampler_name(SamplerKind k)
{
    switch (k) {
    case SamplerKind::wilson:
        return "wilson";
    case SamplerKind::aldous_broder:
        return "aldous-broder";
    case SamplerKind::ab_t:
        return "ab_t";
    }
    return "?";
}

ExactnessReport chi_square_test(const std::vector<double>& observed, const std::vector<double>& prob)
{
    const double n = std::accumulate(observed.begin(), observed.end(), 0.0);
    // Cells with expected count below 5 are pooled into one.
    double chi = 0, pool_obs = 0, pool_exp = 0;
    std::size_t cells = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = n * prob[i];
        if (e < 5) {
            pool_obs += observed[i];
            pool_exp += e;
            continue;
        }
        chi += (observed[i] - e) * (observed[i] - e) / e;
        ++cells;
    }
    if (pool_exp > 0) {
        chi += (pool_obs - pool_exp) * (pool_obs - pool_exp) / pool_exp;
        ++cells;
    }
    ExactnessReport r;
    r.cells = cells;
    r.samples = static_cast<std::uint64_t>(n);
    r.chi_square = chi;
    r.p_value = cells < 2 ? 1.0
                          : boost::math::cdf(boost::math::complement(
                                boost::math::chi_squared(static_cast<double>(cells - 1)), chi));
    return r;
}

ExactnessReport sampler_exactness(const Network& net, const RootSet& roots, SamplerKind kind, std::uint64_t samples,
                                  std::uint64_t seed, unsigned workers)
{
    const auto structures = enumerate_spanning_structures(net, roots);
    std::map<std::vector<Slot>, std::size_t> cell;
    std::vector<double> prob;
    double total = 0;
    for (const auto& s : structures)
        total += s.weight;
    for (std::size_t i = 0; i < structures.size(); ++i) {
        cell[forest_key(to_forest(net, roots, structures[i]))] = i;
        prob.push_back(structures[i].weight / total);
    }
    using Cell = std::size_t;
    const auto hits = farm<Cell, int>(
        samples, workers, seed, [] { return 0; },
        [&](int&, std::uint64_t, RngStream& rng) -> Cell {
            OrientedForest f;
            switch (kind) {
            case SamplerKind::wilson:
                f = wilson_sample(net, roots, rng);
                break;
            case SamplerKind::aldous_broder:
                f = aldous_broder_sample(net, roots, rng);
                break;
            case SamplerKind::ab_t: {
                const auto soup = sample_soup(net, roots, 0.0, 1.0, rng);
                f = ab_forest(net, soup, 0.5);
                break;
            }
            }
            const auto it = cell.find(forest_key(f));
            if (it == cell.end())
                throw std::logic_error("sampled forest is not a spanning structure of the network");
            return it->second;
        });
    std::vector<double> observed(structures.size(), 0.0);
    for (Cell c : hits)
        observed[c] += 1;
    return chi_square_test(observed, prob);
}

// ---------------------------------------------------------------------------
// Runners

FitOutcome try_fit(const TailCurve& curve, double lo, double hi)
{
    FitOutcome f;
    try {
        f.fit = fit_exponent(curve, lo, hi);
    } catch (const InsufficientData& e) {
        f.error = e.what();
    }
    return f;
}

json fit_json(const FitOutcome& f)
{
    if (!f.fit)
        return json{{"error", f.error}};
    const auto& x = *f.fit;
    return json{{"slope", x.slope},           {"intercept", x.intercept}, {"stderr", x.stderr_},
                {"sampling_stderr", x.sampling_stderr}, {"r_min", x.r_min}, {"r_max", x.r_max},
                {"points", x.points}};
}

namespace {

json dimension_json(const std::optional<DimensionFit>& d, const std::string& err)
{
    if (!d)
        return json{{"error", err}};
    return json{{"value", d->value}, {"fit", fit_json({d->fit, ""})}};
}

std::vector<double> length_thresholds(const ExperimentConfig& c)
{
    if (c.spacing == "dyadic")
        return dyadic_thresholds(c.r_min, c.r_max);
    std::vector<double> t;
    for (double r = std::ceil(c.r_min); r <= c.r_max; r += 1)
        t.push_back(r);
    return t;
}

ProgressFn progress_to(std::ostream& log, const std::string& what)
{
    return [&log, what](std::uint64_t done, std::uint64_t total) {
        log << what << ": " << done << "/" << total << '\n' << std::flush;
    };
}

struct Outputs {
    fs::path dir;
    std::vector<std::string> files;

    std::ofstream open(const std::string& name)
    {
        files.push_back(name);
        std::ofstream f(dir / name, std::ios::binary);
        if (!f)
            throw std::runtime_error("cannot write " + (dir / name).string());
        return f;
    }
};

const char* const kForestFields[] = {"depth", "volume", "intrinsic_diameter", "extrinsic_radius",
                                     "extrinsic_diameter"};

std::vector<double> summary_values(const PastSummary& s)
{
    return {double(s.depth), double(s.volume), double(s.intrinsic_diameter), double(s.extrinsic_radius),
            double(s.extrinsic_diameter)};
}

std::vector<std::vector<PastSummary>> forest_samples(const ExperimentConfig& cfg, const ProgressFn& progress)
{
    using Result = std::vector<PastSummary>;
    const std::uint32_t depth_cap = effective_depth_cap(cfg);
    const std::uint32_t volume_cap = effective_volume_cap(cfg);
    if (cfg.graph.type == "tree") {
        RadialParams p;
        p.k = cfg.graph.degree;
        p.radius = cfg.graph.radius;
        // Vertices at level radius + 1 - margin lie within `margin` of the sink.
        const auto edge = static_cast<std::int64_t>(cfg.graph.radius) + 1 - cfg.margin;
        p.depth_cap = static_cast<std::uint32_t>(std::clamp<std::int64_t>(edge, 0, depth_cap));
        p.volume_cap = volume_cap;
        return farm<Result, int>(
            cfg.samples, cfg.workers, cfg.seed, [] { return 0; },
            [&](int&, std::uint64_t, RngStream& rng) {
                Result r;
                for (std::uint32_t j = 0; j < cfg.origins; ++j)
                    r.push_back(summarize_plain_tree(sample_tree_past(p, rng)));
                return r;
            },
            progress);
    }
    const Network net = build_network(cfg);
    const MarginMap mm(net);
    const auto origins = bulk_origins(net, cfg.origins);
    return farm<Result, std::unique_ptr<LocalWilson>>(
        cfg.samples, cfg.workers, cfg.seed, [&] { return std::make_unique<LocalWilson>(net, sink_roots(net)); },
        [&](std::unique_ptr<LocalWilson>& lw, std::uint64_t, RngStream& rng) {
            lw->reset();
            Result r;
            for (VertexId o : origins) {
                const auto c = explore_past(*lw, o, rng, depth_cap, volume_cap);
                r.push_back(summarize_cluster(mm, c, cfg.margin));
            }
            return r;
        },
        progress);
}

std::vector<TailCurve> curves_from(const ExperimentConfig& cfg, const std::vector<std::vector<PastSummary>>& samples)
{
    const auto lengths = length_thresholds(cfg);
    const auto volumes = dyadic_thresholds(cfg.v_min, cfg.v_max);
    std::vector<TailCurve> curves;
    for (const char* f : kForestFields)
        curves.emplace_back(f, std::string(f) == "volume" ? volumes : lengths);
    std::vector<std::vector<double>> values(curves.size());
    std::vector<char> trunc;
    for (const auto& unit : samples) {
        for (auto& v : values)
            v.clear();
        trunc.clear();
        for (const auto& s : unit) {
            const auto x = summary_values(s);
            for (std::size_t k = 0; k < x.size(); ++k)
                values[k].push_back(x[k]);
            trunc.push_back(s.truncated);
        }
        for (std::size_t k = 0; k < curves.size(); ++k)
            curves[k].add_unit(values[k], trunc);
    }
    return curves;
}

void write_curves(std::ostream& os, const std::vector<TailCurve>& curves)
{
    for (std::size_t i = 0; i < curves.size(); ++i)
        curves[i].write_csv(os, i == 0);
}

RunOutcome run_forest_exponents(const ExperimentConfig& cfg, Outputs& out, std::ostream& log)
{
    const auto samples = forest_samples(cfg, progress_to(log, "forests"));
    {
        auto f = out.open("samples.csv");
        f << "sample,origin,depth,volume,intrinsic_diameter,extrinsic_radius,extrinsic_diameter,truncated\n";
        for (std::size_t i = 0; i < samples.size(); ++i)
            for (const auto& s : samples[i])
                f << i << ',' << s.origin << ',' << s.depth << ',' << s.volume << ',' << s.intrinsic_diameter << ','
                  << s.extrinsic_radius << ',' << s.extrinsic_diameter << ',' << int(s.truncated) << '\n';
    }
    const auto curves = curves_from(cfg, samples);
    {
        auto f = out.open("tail_curves.csv");
        write_curves(f, curves);
    }
    RunOutcome r;
    json fits;
    for (const auto& c : curves) {
        const bool vol = c.field() == "volume";
        fits[c.field()] = fit_json(try_fit(c, vol ? cfg.v_min : cfg.r_min, vol ? cfg.v_max : cfg.r_max));
    }
    std::uint64_t truncated = 0, total = 0;
    for (const auto& u : samples)
        for (const auto& s : u) {
            truncated += s.truncated;
            ++total;
        }
    r.summary["fits"] = fits;
    r.summary["diagnostics"] = {{"pasts", total}, {"truncated", truncated}, {"units", samples.size()}};
    return r;
}

struct DimSample {
    std::vector<double> volume;
    std::vector<double> returns;
    std::vector<double> displacement;
};

RunOutcome run_dimensions(const ExperimentConfig& cfg, Outputs& out, std::ostream& log)
{
    const auto ns = dyadic_thresholds(cfg.n_lo, cfg.n_hi);
    std::vector<std::uint64_t> checkpoints;
    for (std::uint64_t s = cfg.steps_lo; s <= cfg.steps_hi; s *= 2)
        checkpoints.push_back(s);
    const double ops = double(std::min<std::uint64_t>(cfg.return_samples, cfg.samples)) * std::pow(cfg.n_hi, 3) / 12;
    log << "kernel iteration estimate: " << std::scientific << std::setprecision(2) << ops << std::defaultfloat
        << " vertex updates\n";

    RadialParams p;
    p.k = cfg.graph.degree;
    p.radius = cfg.graph.radius;
    p.depth_cap = cfg.depth;
    const auto offspring = binary_critical_offspring();
    const auto samples = farm<DimSample, int>(
        cfg.samples, cfg.workers, cfg.seed, [] { return 0; },
        [&](int&, std::uint64_t i, RngStream& rng) {
            const PlainTree t = cfg.source == "kesten" ? kesten_tree_sample(cfg.depth, offspring, rng)
                                                       : sample_tree_component(p, rng);
            DimSample d;
            const auto prof = ball_volume_profile(t, cfg.n_hi);
            for (double n : ns)
                d.volume.push_back(static_cast<double>(prof[static_cast<std::size_t>(n)]));
            if (i < cfg.return_samples)
                d.returns = tree_even_returns(t, cfg.n_hi);
            d.displacement.assign(checkpoints.size(), 0.0);
            for (std::uint32_t w = 0; w < cfg.walks; ++w) {
                std::vector<std::uint32_t> m;
                try {
                    m = tree_walk_max_displacement(t, checkpoints, rng);
                } catch (const std::runtime_error& e) {
                    throw std::runtime_error(std::string(e.what()) + "; raise [dimensions] depth or lower steps_hi");
                }
                for (std::size_t j = 0; j < m.size(); ++j)
                    d.displacement[j] += m[j] / double(cfg.walks);
            }
            return d;
        },
        progress_to(log, "trees"));

    auto mean_se = [](const std::vector<std::vector<double>>& rows, std::size_t j) {
        double s = 0, q = 0;
        for (const auto& r : rows) {
            s += r[j];
            q += r[j] * r[j];
        }
        const double n = rows.size(), m = s / n;
        const double var = n > 1 ? std::max(0.0, (q - n * m * m) / (n - 1)) : 0.0;
        return std::pair{m, std::sqrt(var / n)};
    };
    std::vector<std::vector<double>> vol, ret, disp;
    for (const auto& d : samples) {
        vol.push_back(d.volume);
        disp.push_back(d.displacement);
        if (!d.returns.empty())
            ret.push_back(d.returns);
    }

    std::vector<double> mvol, mdisp, mret, xs_steps;
    auto f = out.open("dimension_curves.csv");
    f << "quantity,x,mean,stderr\n";
    f << std::setprecision(17);
    for (std::size_t j = 0; j < ns.size(); ++j) {
        const auto [m, se] = mean_se(vol, j);
        mvol.push_back(m);
        f << "ball_volume," << ns[j] << ',' << m << ',' << se << '\n';
    }
    if (!ret.empty())
        for (std::size_t j = 0; j <= cfg.n_hi; ++j) {
            const auto [m, se] = mean_se(ret, j);
            mret.push_back(m);
            f << "even_return," << j << ',' << m << ',' << se << '\n';
        }
    for (std::size_t j = 0; j < checkpoints.size(); ++j) {
        const auto [m, se] = mean_se(disp, j);
        mdisp.push_back(m);
        xs_steps.push_back(static_cast<double>(checkpoints[j]));
        f << "max_displacement," << checkpoints[j] << ',' << m << ',' << se << '\n';
    }
    f.close();
    {
        auto s = out.open("samples.csv");
        s << "sample,quantity,x,value\n" << std::setprecision(17);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            for (std::size_t j = 0; j < ns.size(); ++j)
                s << i << ",ball_volume," << ns[j] << ',' << samples[i].volume[j] << '\n';
            for (std::size_t j = 0; j < checkpoints.size(); ++j)
                s << i << ",max_displacement," << checkpoints[j] << ',' << samples[i].displacement[j] << '\n';
        }
    }

    RunOutcome r;
    auto guarded = [](auto fn) -> json {
        try {
            const DimensionFit d = fn();
            return dimension_json(d, "");
        } catch (const InsufficientData& e) {
            return dimension_json(std::nullopt, e.what());
        }
    };
    r.summary["fits"]["d_f"] = guarded([&] { return volume_dimension(ns, mvol); });
    r.summary["fits"]["d_s"] = mret.empty() ? json{{"error", "no return samples"}}
                                            : guarded([&] { return spectral_dimension(mret, cfg.n_lo, cfg.n_hi); });
    r.summary["fits"]["d_w"] = guarded([&] { return walk_dimension(xs_steps, mdisp); });
    r.summary["diagnostics"] = {{"trees", samples.size()}, {"return_trees", ret.size()}, {"source", cfg.source}};
    return r;
}

struct DynSample {
    VertexId u = kNoVertex;
    double s = 0, t = 0;
    DynamicsReport rep;
};

RunOutcome run_interlace(const ExperimentConfig& cfg, Outputs& out, std::ostream& log)
{
    const Network net = build_network(cfg);
    for (VertexId v : cfg.hitting_set)
        if (v >= net.vertex_count() || net.is_sink(v))
            throw ConfigError("config: [interlace] hitting_set: vertex " + std::to_string(v) + " is not a site");
    const bool vwired = cfg.wiring == "v-wired";
    if (vwired && (cfg.wired_vertex >= net.vertex_count() || net.is_sink(cfg.wired_vertex)))
        throw ConfigError("config: [interlace] wired_vertex: not a site of the network");
    const RootSet roots = vwired ? merge_with_sink(net, cfg.wired_vertex) : sink_roots(net);
    std::vector<VertexId> free;
    for (VertexId v = 0; v < net.vertex_count(); ++v)
        if (!roots.contains(v))
            free.push_back(v);

    const double w = cfg.window;
    const auto dyn = farm<DynSample, int>(
        cfg.samples, cfg.workers, cfg.seed, [] { return 0; },
        [&](int&, std::uint64_t, RngStream& rng) {
            DynSample d;
            const auto soup = sample_soup(net, roots, 0.0, w, rng);
            const SoupIndex idx(net, soup);
            d.u = free[rng.below(static_cast<std::uint32_t>(free.size()))];
            d.s = rng.uniform() * w;
            d.t = d.s + rng.uniform() * (w - d.s);
            d.rep = past_dynamics_check(net, soup, idx, d.u, d.s, d.t);
            return d;
        },
        progress_to(log, "dynamics instances"));

    // The hitting counts use their own family of streams.
    const std::uint64_t poisson_master = derive_worker_seed(cfg.seed, std::uint64_t{1} << 32);
    const auto counts = farm<std::uint64_t, int>(
        cfg.soups, cfg.workers, poisson_master, [] { return 0; },
        [&](int&, std::uint64_t, RngStream& rng) {
            return count_hitting(sample_soup(net, roots, 0.0, w, rng), cfg.hitting_set);
        },
        progress_to(log, "soups"));
    const double cap = vwired ? capacity_v(net, cfg.wired_vertex, cfg.hitting_set) : capacity(net, cfg.hitting_set);
    const auto pois = poisson_goodness_of_fit(counts, w * cap);

    std::uint64_t applicable = 0, equal = 0, differ = 0;
    {
        auto f = out.open("dynamics.csv");
        f << "sample,u,s,t,verdict,past_s,past_t,component\n" << std::setprecision(17);
        for (std::size_t i = 0; i < dyn.size(); ++i) {
            const auto& d = dyn[i];
            const char* v = d.rep.verdict == DynamicsVerdict::equal    ? "equal"
                            : d.rep.verdict == DynamicsVerdict::differ ? "differ"
                                                                       : "not_applicable";
            applicable += d.rep.verdict != DynamicsVerdict::not_applicable;
            equal += d.rep.verdict == DynamicsVerdict::equal;
            differ += d.rep.verdict == DynamicsVerdict::differ;
            f << i << ',' << d.u << ',' << d.s << ',' << d.t << ',' << v << ',' << d.rep.past_s << ','
              << d.rep.past_t << ',' << d.rep.component << '\n';
        }
    }
    {
        auto f = out.open("hitting_counts.csv");
        f << "soup,count\n";
        for (std::size_t i = 0; i < counts.size(); ++i)
            f << i << ',' << counts[i] << '\n';
    }
    RunOutcome r;
    r.summary["fits"] = json::object();
    r.summary["diagnostics"] = {
        {"dynamics", {{"instances", dyn.size()}, {"applicable", applicable}, {"equal", equal}, {"differ", differ}}},
        {"poisson",
         {{"capacity", cap},
          {"expected_mean", pois.expected_mean},
          {"observed_mean", pois.observed_mean},
          {"mean_stderr", pois.mean_stderr},
          {"chi_square", pois.chi_square},
          {"dof", pois.dof},
          {"p_value", pois.p_value}}}};
    r.status = (differ == 0 && pois.p_value > 1e-3) ? 0 : 1;
    return r;
}

RunOutcome run_sandpile(const ExperimentConfig& cfg, Outputs& out, std::ostream& log)
{
    const Network net = build_network(cfg);
    const MarginMap mm(net);
    const std::vector<VertexId> origins = cfg.graph.type == "tree" ? std::vector<VertexId>{0}
                                                                   : bulk_origins(net, cfg.origins);
    using Result = std::vector<AvalancheRecord>;
    const auto samples = farm<Result, std::unique_ptr<LazySandpile>>(
        cfg.samples, cfg.workers, cfg.seed, [&] { return std::make_unique<LazySandpile>(net); },
        [&](std::unique_ptr<LazySandpile>& pile, std::uint64_t i, RngStream& rng) {
            pile->reset();
            Result res;
            for (VertexId o : origins) {
                const auto av = pile->avalanche(o, rng);
                AvalancheRecord rec;
                rec.sample = i;
                rec.origin = o;
                rec.size = av.size;
                rec.cluster = av.cluster.size();
                rec.diameter = extrinsic_diameter(net, av.cluster);
                for (VertexId u : av.cluster)
                    if (mm.distance_to_sink(u) <= cfg.margin) {
                        rec.truncated = true;
                        break;
                    }
                res.push_back(rec);
            }
            return res;
        },
        progress_to(log, "configurations"));

    const auto volumes = dyadic_thresholds(cfg.v_min, cfg.v_max);
    std::vector<TailCurve> curves{TailCurve("avalanche_size", volumes), TailCurve("avalanche_cluster", volumes),
                                  TailCurve("avalanche_diameter", length_thresholds(cfg))};
    std::uint64_t truncated = 0, total = 0, empty = 0;
    {
        auto f = out.open("avalanches.csv");
        f << "sample,origin,size,cluster,diameter,truncated\n";
        std::vector<double> sz, cl, dm;
        std::vector<char> tr;
        for (const auto& unit : samples) {
            sz.clear();
            cl.clear();
            dm.clear();
            tr.clear();
            for (const auto& a : unit) {
                f << a.sample << ',' << a.origin << ',' << a.size << ',' << a.cluster << ',' << a.diameter << ','
                  << int(a.truncated) << '\n';
                sz.push_back(double(a.size));
                cl.push_back(double(a.cluster));
                dm.push_back(a.diameter);
                tr.push_back(a.truncated);
                truncated += a.truncated;
                empty += a.size == 0;
                ++total;
            }
            curves[0].add_unit(sz, tr);
            curves[1].add_unit(cl, tr);
            curves[2].add_unit(dm, tr);
        }
    }
    {
        auto f = out.open("tail_curves.csv");
        write_curves(f, curves);
    }
    RunOutcome r;
    r.summary["fits"] = {{"avalanche_size", fit_json(try_fit(curves[0], cfg.v_min, cfg.v_max))},
                         {"avalanche_cluster", fit_json(try_fit(curves[1], cfg.v_min, cfg.v_max))},
                         {"avalanche_diameter", fit_json(try_fit(curves[2], cfg.r_min, cfg.r_max))}};
    r.summary["diagnostics"] = {
        {"avalanches", total}, {"truncated", truncated}, {"no_topple", empty}, {"origins", origins.size()}};
    return r;
}

struct Check {
    std::string name;
    bool passed = false;
    double value = 0;
};

RunOutcome run_validate(const ExperimentConfig& cfg, Outputs& out, std::ostream& log)
{
    std::vector<Check> checks;
    std::uint64_t seed = cfg.seed;
    constexpr std::uint64_t kSamples = 20000;
    constexpr double kMinP = 1e-3;
    for (const auto& o : oracle_networks()) {
        const auto det = matrix_tree_determinant(o.net, o.roots);
        double enumerated = 0;
        for (const auto& s : enumerate_spanning_structures(o.net, o.roots))
            enumerated += s.weight;
        const double d = det.convert_to<double>();
        checks.push_back({o.name + ": enumeration = matrix-tree", std::abs(enumerated - d) <= 1e-9 * d, enumerated});
        for (auto k : {SamplerKind::wilson, SamplerKind::aldous_broder, SamplerKind::ab_t}) {
            const auto rep = sampler_exactness(o.net, o.roots, k, kSamples, derive_worker_seed(seed, checks.size()),
                                               cfg.workers);
            checks.push_back({o.name + ": " + sampler_name(k) + " chi-square p", rep.p_value > kMinP, rep.p_value});
        }
        log << "validate: " << o.name << " done\n";
    }

    // Burning bijection on the 2x2 wired grid.
    const auto box2 = Network::lattice_box({2, 2, Boundary::wired, {}});
    const auto trees = enumerate_spanning_structures(box2, sink_roots(box2));
    bool round_trip = true;
    for (const auto& w : trees) {
        const auto f = to_forest(box2, sink_roots(box2), w);
        round_trip = round_trip && forest_key(recurrent_to_tree(box2, tree_to_recurrent(box2, f))) == forest_key(f);
    }
    checks.push_back({"2x2 grid: burning bijection round trip", round_trip, double(trees.size())});
    std::uint64_t recurrent = 0;
    SandpileConfig c;
    c.height.assign(box2.vertex_count(), 0);
    for (int code = 0; code < 256; ++code) {
        for (int v = 0; v < 4; ++v)
            c.height[v] = (code >> (2 * v)) & 3;
        recurrent += is_recurrent(box2, c);
    }
    checks.push_back({"2x2 grid: #recurrent = #spanning trees",
                      Rational(recurrent) == matrix_tree_determinant(box2, sink_roots(box2)),
                      double(recurrent)});

    const auto box3 = Network::lattice_box({2, 3, Boundary::wired, {}});
    RngStream rng(seed, 1u << 20);
    const auto dhar = dhar_check(box3, 4, 20000, rng);
    checks.push_back({"3x3 grid: Dhar formula within 3 stderr", dhar.passed, dhar.worst_z});

    const auto g = green_function(box3, 4);
    const double cap = capacity(box3, {4});
    checks.push_back({"3x3 grid: Cap({v}) = c(v)/G(v,v)", std::abs(cap - box3.weight(4) / g[4]) < 1e-8, cap});

    std::uint64_t applicable = 0, equal = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto soup = sample_soup(box3, sink_roots(box3), 0.0, 1.0, rng);
        const SoupIndex idx(box3, soup);
        const VertexId u = rng.below(9);
        const double s = rng.uniform(), t = s + rng.uniform() * (1 - s);
        const auto rep = past_dynamics_check(box3, soup, idx, u, s, t);
        applicable += rep.verdict != DynamicsVerdict::not_applicable;
        equal += rep.verdict == DynamicsVerdict::equal;
    }
    checks.push_back({"3x3 grid: past dynamics identity", equal == applicable && applicable > 0, double(applicable)});

    RunOutcome r;
    auto f = out.open("validate.csv");
    f << "check,passed,value\n" << std::setprecision(17);
    json list = json::array();
    std::size_t failed = 0;
    for (const auto& ch : checks) {
        f << '"' << ch.name << "\"," << int(ch.passed) << ',' << ch.value << '\n';
        list.push_back({{"check", ch.name}, {"passed", ch.passed}, {"value", ch.value}});
        failed += !ch.passed;
        log << (ch.passed ? "PASS " : "FAIL ") << ch.name << " (" << ch.value << ")\n";
    }
    r.summary["fits"] = json::object();
    r.summary["diagnostics"] = {{"checks", list}, {"failed", failed}};
    r.status = failed ? 1 : 0;
    return r;
}

} // namespace

std::vector<TailCurve> forest_tail_curves(const ExperimentConfig& cfg)
{
    return curves_from(cfg, forest_samples(cfg, {}));
}

RunOutcome run_experiment(const ExperimentConfig& cfg, std::ostream& log)
{
    const auto start = std::chrono::steady_clock::now();
    const auto est = estimate_memory(cfg);
    log << kind_name(cfg.kind) << ": " << cfg.samples << " samples, seed " << cfg.seed << ", " << cfg.workers
        << " worker(s), estimated peak memory " << mib(double(est)) << '\n';
    check_budget(cfg);

    Outputs out;
    out.dir = cfg.output;
    fs::create_directories(out.dir);
    RunOutcome r;
    switch (cfg.kind) {
    case ExperimentKind::forest_exponents:
        r = run_forest_exponents(cfg, out, log);
        break;
    case ExperimentKind::dimensions:
        r = run_dimensions(cfg, out, log);
        break;
    case ExperimentKind::interlacement_tests:
        r = run_interlace(cfg, out, log);
        break;
    case ExperimentKind::sandpile:
        r = run_sandpile(cfg, out, log);
        break;
    case ExperimentKind::validate:
        r = run_validate(cfg, out, log);
        break;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json s;
    s["schema_version"] = kSummarySchemaVersion;
    s["kind"] = kind_name(cfg.kind);
    s["seed"] = cfg.seed;
    s["workers"] = cfg.workers;
    s["samples"] = cfg.samples;
    s["fits"] = r.summary.value("fits", json::object());
    s["diagnostics"] = r.summary.value("diagnostics", json::object());
    s["files"] = out.files;
    s["config"] = cfg.text;
    s["status"] = r.status;
    s["wall_time_seconds"] = wall;
    r.summary = s;
    out.files.push_back("summary.json");
    std::ofstream(out.dir / "summary.json") << s.dump(2) << '\n';
    r.files = out.files;
    log << "wrote " << out.files.size() << " files to " << out.dir.string() << " in " << wall << " s\n";
    return r;
}

} // namespace usf
