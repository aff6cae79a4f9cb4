#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "usf/experiment.hpp"

using namespace usf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("usf_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string config_error(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

ExperimentConfig small_forest_config(const fs::path& out, unsigned workers)
{
    std::ostringstream s;
    s << "[experiment]\nkind = forest-exponents\nsamples = 40\nseed = 99\nworkers = " << workers
      << "\noutput = " << out.string() << "\n[graph]\ntype = lattice\ndimension = 3\nside = 16\n"
      << "[measure]\nmargin = 2\nr_min = 2\nr_max = 16\nv_min = 4\nv_max = 256\norigins = 4\n";
    return parse_config(s.str());
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("worker seeds follow the published splitmix64 sequence")
    {
        // SplitMix64 from state 1234567: stream i is output i of the generator.
        const std::uint64_t golden[] = {6457827717110365317ULL, 3203168211198807973ULL, 9817491932198370423ULL,
                                        4593380528125082431ULL, 16408922859458223821ULL};
        for (std::uint64_t i = 0; i < 5; ++i)
            CHECK(derive_worker_seed(1234567, i) == golden[i]);
        CHECK(derive_worker_seed(0, 0) == 16294208416658607535ULL);
    }

    TEST_CASE("worker seeds do not collide over a million indices")
    {
        for (std::uint64_t master : {0ULL, 1ULL, 0xDEADBEEFULL}) {
            std::vector<std::uint64_t> s(1'000'000);
            for (std::uint64_t i = 0; i < s.size(); ++i)
                s[i] = derive_worker_seed(master, i);
            std::sort(s.begin(), s.end());
            CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
        }
        for (std::uint64_t m = 0; m < 1000; ++m)
            CHECK(derive_worker_seed(m, 0) != m);
    }

    TEST_CASE("a valid config parses and keeps its text")
    {
        const std::string text = "# comment\n[experiment]\nkind = sandpile   # trailing note\nsamples = 12\nseed = 5\nworkers = 3\n"
                                 "output = /tmp/x\n[graph]\ntype = lattice\ndimension = 4\nside = 10\n"
                                 "[measure]\nmargin = 1\nr_min = 2\nr_max = 8\norigins = 5\nspacing = integer\n";
        const auto c = parse_config(text);
        CHECK(c.kind == ExperimentKind::sandpile);
        CHECK(c.samples == 12);
        CHECK(c.seed == 5);
        CHECK(c.workers == 3);
        CHECK(c.output == "/tmp/x");
        CHECK(c.graph.dimension == 4);
        CHECK(c.graph.side == 10);
        CHECK(c.margin == 1);
        CHECK(c.origins == 5);
        CHECK(c.spacing == "integer");
        CHECK(c.text == text);
    }

    TEST_CASE("schema violations name the offending key")
    {
        const std::string head = "[experiment]\nkind = forest-exponents\nsamples = 3\n[graph]\ntype = lattice\n";
        CHECK(contains(config_error("[experiment]\nsamples = 3\n"), "[experiment] kind: missing required key"));
        CHECK(contains(config_error("[experiment]\nkind = sandpile\n[graph]\ntype = tree\n"),
                       "[experiment] samples: missing required key"));
        CHECK(contains(config_error("[experiment]\nkind = fly\n"), "expected one of"));
        CHECK(contains(config_error(head + "sied = 4\n"), "[graph] sied: unknown key"));
        CHECK(contains(config_error(head + "[plot]\nx = 1\n"), "unknown section [plot]"));
        CHECK(contains(config_error("kind = validate\n"), "must sit inside a section"));
        CHECK(contains(config_error(head + "side = many\n"), "[graph] side: expected an integer"));
        CHECK(contains(config_error(head + "side = -4\n"), "[graph] side"));
        CHECK(contains(config_error(head + "side = 1\n"), "[graph] side"));
        CHECK(contains(config_error(head + "[measure]\nr_min = 8\nr_max = 4\n"), "[measure] r_max"));
        CHECK(contains(config_error(head + "[measure]\nr_min = 1e999\n"), "[measure] r_min"));
        CHECK(contains(config_error("[experiment]\nkind = forest-exponents\nsamples = 3\n"),
                       "[graph] type: missing required key"));
        CHECK(contains(config_error("[experiment]\nkind = forest-exponents\nsamples = 3\n[graph]\ntype = edges\n"),
                       "[graph] edges"));
        CHECK(contains(config_error("[experiment]\nkind = dimensions\nsamples = 3\n[dimensions]\ndepth = 64\n"
                                    "n_hi = 64\n"),
                       "[dimensions] depth"));
        CHECK(contains(config_error("[experiment]\nkind = interlacement-tests\nsamples = 3\n[graph]\ntype = lattice\n"),
                       "[interlace] hitting_set"));
        CHECK(contains(config_error("[experiment]\nkind = validate\n[interlace]\nhitting_set = 1 x\n"),
                       "[interlace] hitting_set"));
        CHECK(contains(config_error("[experiment\nkind = validate\n"), "line 1"));
        CHECK(config_error("[experiment]\nkind = validate\n").empty());
        CHECK(config_error("[experiment]\nkind = dimensions\nsamples = 2\n").empty());
    }

    TEST_CASE("oversized runs are refused with an estimate")
    {
        auto c = parse_config("[experiment]\nkind = sandpile\nsamples = 10\nmemory_budget_mb = 64\n"
                              "[graph]\ntype = lattice\ndimension = 5\nside = 40\n");
        const auto est = estimate_memory(c);
        CHECK(est > c.memory_budget);
        // The sandpile workspace holds several words per vertex of the box.
        CHECK(est >= std::uint64_t(40) * 40 * 40 * 40 * 40 * 16);
        try {
            check_budget(c);
            FAIL("no refusal");
        } catch (const BudgetError& e) {
            CHECK(e.estimate_bytes == est);
            CHECK(contains(e.what(), "MiB"));
        }
        std::ostringstream log;
        CHECK_THROWS_AS(run_experiment(c, log), BudgetError);
        c.memory_budget = std::uint64_t{1} << 40;
        CHECK_NOTHROW(check_budget(c));
    }

    TEST_CASE("farm results depend only on the master seed and the index")
    {
        const std::function<int()> make = [] { return 0; };
        const std::function<std::uint64_t(int&, std::uint64_t, RngStream&)> draw =
            [](int& calls, std::uint64_t, RngStream& rng) {
                ++calls;
                return rng();
            };
        const auto one = farm<std::uint64_t, int>(1000, 1, 42, make, draw);
        const auto four = farm<std::uint64_t, int>(1000, 4, 42, make, draw);
        CHECK(one == four);
        for (std::uint64_t i : {0ULL, 1ULL, 999ULL}) {
            RngStream r(42, i);
            CHECK(one[i] == r());
        }
        std::uint64_t reported = 0;
        farm<std::uint64_t, int>(50, 3, 1, make, draw, [&](std::uint64_t done, std::uint64_t total) {
            CHECK(total == 50);
            reported = std::max(reported, done);
        });
        CHECK(reported == 50);
    }

    TEST_CASE("tail-curve merges do not depend on completion order")
    {
        const std::vector<double> th{1, 2, 4, 8};
        std::mt19937_64 gen(3);
        std::geometric_distribution<int> g(0.3);
        std::vector<TailCurve> parts;
        TailCurve whole("x", th);
        for (int p = 0; p < 12; ++p) {
            TailCurve c("x", th);
            for (int u = 0; u < 40; ++u) {
                std::vector<double> v;
                std::vector<char> t;
                for (int j = 0; j < 3; ++j) {
                    v.push_back(g(gen));
                    t.push_back(gen() % 10 == 0);
                }
                c.add_unit(v, t);
                whole.add_unit(v, t);
            }
            parts.push_back(c);
        }
        for (int trial = 0; trial < 20; ++trial) {
            std::shuffle(parts.begin(), parts.end(), gen);
            // Pairwise tree reduction in the shuffled order.
            auto level = parts;
            while (level.size() > 1) {
                std::vector<TailCurve> next;
                for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
                    auto m = level[i];
                    m.merge(level[i + 1]);
                    next.push_back(m);
                }
                if (level.size() % 2)
                    next.push_back(level.back());
                level = next;
            }
            const auto& m = level[0];
            CHECK(m.total() == whole.total());
            CHECK(m.units() == whole.units());
            for (std::size_t i = 0; i < th.size(); ++i) {
                CHECK(m.survivors(i) == whole.survivors(i));
                CHECK(m.ambiguous(i) == whole.ambiguous(i));
                CHECK(m.probability(i) == whole.probability(i));
                CHECK(m.stderr_at(i) == doctest::Approx(whole.stderr_at(i)).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("chi-square test flags a wrong law")
    {
        const std::vector<double> prob{0.25, 0.25, 0.5};
        CHECK(chi_square_test({2500, 2480, 5020}, prob).p_value > 0.1);
        CHECK(chi_square_test({3000, 2000, 5000}, prob).p_value < 1e-6);
        // Cells expected below five are pooled.
        const auto r = chi_square_test({1, 0, 99}, {0.01, 0.01, 0.98});
        CHECK(r.cells == 2);
    }

    TEST_CASE("identical config, seed and workers give byte-identical CSV")
    {
        const auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
        std::ostringstream log;
        const auto ra = run_experiment(small_forest_config(a, 2), log);
        const auto rb = run_experiment(small_forest_config(b, 2), log);
        const auto rc = run_experiment(small_forest_config(c, 1), log);
        for (const char* f : {"samples.csv", "tail_curves.csv"}) {
            const auto x = slurp(a / f);
            CHECK(!x.empty());
            CHECK(x == slurp(b / f));
            // The farm streams are per index, so the worker count does not matter either.
            CHECK(x == slurp(c / f));
        }
        auto ja = ra.summary, jb = rb.summary;
        // Only the wall time and the echoed output path may differ.
        for (auto* j : {&ja, &jb}) {
            j->erase("wall_time_seconds");
            j->erase("config");
        }
        CHECK(ja.dump() == jb.dump());
        const auto on_disk = nlohmann::json::parse(slurp(a / "summary.json"));
        CHECK(on_disk["config"].get<std::string>() == small_forest_config(a, 2).text);
        CHECK(on_disk["schema_version"] == kSummarySchemaVersion);
        auto other = small_forest_config(scratch("det_d"), 2);
        other.seed = 100;
        run_experiment(other, log);
        CHECK(slurp(fs::path(other.output) / "samples.csv") != slurp(a / "samples.csv"));
    }

    TEST_CASE("forest-exponents on the five-dimensional box reports slopes")
    {
        const auto out = scratch("z5");
        const auto cfg = parse_config("[experiment]\nkind = forest-exponents\nsamples = 100\nseed = 4\noutput = " +
                                      out.string() +
                                      "\n[graph]\ntype = lattice\ndimension = 5\nside = 24\n"
                                      "[measure]\nmargin = 3\nr_min = 2\nr_max = 64\nv_min = 4\nv_max = 4096\n"
                                      "origins = 32\n");
        std::ostringstream log;
        const auto r = run_experiment(cfg, log);
        CHECK(r.status == 0);
        const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
        for (const char* f : {"depth", "volume", "extrinsic_radius"}) {
            INFO(f);
            REQUIRE(j["fits"][f].contains("slope"));
            const double s = j["fits"][f]["slope"];
            CHECK(s < 0);
            CHECK(s > -3);
        }
        CHECK(j["diagnostics"]["pasts"] == 3200);
        const auto header = slurp(out / "tail_curves.csv").substr(0, 36);
        CHECK(header == "field,R,survivors,total,p,stderr\ndep");
    }

    TEST_CASE("validate, sandpile, interlacement and dimension runs write their files")
    {
        std::ostringstream log;
        {
            const auto out = scratch("validate");
            auto cfg = parse_config("[experiment]\nkind = validate\noutput = " + out.string() + "\n");
            const auto r = run_experiment(cfg, log);
            CHECK(r.status == 0);
            CHECK(r.summary["diagnostics"]["failed"] == 0);
            CHECK(fs::exists(out / "validate.csv"));
        }
        {
            const auto out = scratch("sandpile");
            const auto cfg = parse_config("[experiment]\nkind = sandpile\nsamples = 200\noutput = " + out.string() +
                                          "\n[graph]\ntype = lattice\ndimension = 3\nside = 12\n"
                                          "[measure]\nmargin = 1\nr_min = 1\nr_max = 8\nv_min = 1\nv_max = 64\n"
                                          "origins = 4\n");
            const auto r = run_experiment(cfg, log);
            CHECK(r.status == 0);
            const auto csv = slurp(out / "avalanches.csv");
            CHECK(csv.rfind("sample,origin,size,cluster,diameter,truncated\n", 0) == 0);
            CHECK(std::count(csv.begin(), csv.end(), '\n') == 801);
            CHECK(r.summary["diagnostics"]["avalanches"] == 800);
        }
        {
            const auto out = scratch("interlace");
            const auto cfg = parse_config("[experiment]\nkind = interlacement-tests\nsamples = 500\noutput = " +
                                          out.string() +
                                          "\n[graph]\ntype = lattice\ndimension = 2\nside = 3\n"
                                          "[interlace]\nwindow = 1.5\nhitting_set = 4 5\nsoups = 2000\n");
            const auto r = run_experiment(cfg, log);
            CHECK(r.status == 0);
            const auto& d = r.summary["diagnostics"];
            CHECK(d["dynamics"]["differ"] == 0);
            CHECK(d["dynamics"]["applicable"] > 0);
            CHECK(d["poisson"]["p_value"] > 1e-3);
        }
        {
            const auto out = scratch("dims");
            const auto cfg = parse_config("[experiment]\nkind = dimensions\nsamples = 20\noutput = " + out.string() +
                                          "\n[dimensions]\ndepth = 400\nn_lo = 4\nn_hi = 64\nreturn_samples = 2\n"
                                          "walks = 2\nsteps_lo = 16\nsteps_hi = 1024\n");
            const auto r = run_experiment(cfg, log);
            CHECK(r.status == 0);
            for (const char* k : {"d_f", "d_s", "d_w"})
                CHECK(r.summary["fits"][k].contains("value"));
            CHECK(fs::exists(out / "dimension_curves.csv"));
        }
    }

    TEST_CASE("sampler exactness report on an oracle network")
    {
        const auto nets = oracle_networks();
        REQUIRE(nets.size() == 5);
        const auto r = sampler_exactness(nets[2].net, nets[2].roots, SamplerKind::wilson, 5000, 8, 2);
        CHECK(r.samples == 5000);
        CHECK(r.cells == 3);
        CHECK(r.p_value > 1e-3);
    }
}
