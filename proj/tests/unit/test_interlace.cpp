#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "usf/interlace.hpp"
#include "usf/walk.hpp"

using namespace usf;

namespace {

Network box(int d, int S)
{
    LatticeSpec spec;
    spec.dimension = d;
    spec.side = S;
    return Network::lattice_box(spec);
}

Network cycle_with_sink()
{
    return Network::from_edges(4, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 0, 1}}, {0});
}

bool path_meets(const WalkPath& p, const std::vector<VertexId>& K)
{
    for (auto v : p.vertices)
        if (std::find(K.begin(), K.end(), v) != K.end())
            return true;
    return false;
}

// Chi-square p of AB_t forests over fresh soups against enumerated weights.
double ab_law_p(const Network& net, const RootSet& roots, int n, std::uint64_t seed)
{
    const auto structures = enumerate_spanning_structures(net, roots);
    const auto brute = oracle::brute_force_forest_weights(net, roots.vertices());
    REQUIRE(structures.size() == brute.size());
    double total = 0.0;
    for (const auto& s : structures)
        total += s.weight;
    std::map<std::vector<Slot>, std::size_t> cell;
    std::vector<double> prob;
    for (std::size_t i = 0; i < structures.size(); ++i) {
        cell[forest_key(to_forest(net, roots, structures[i]))] = i;
        prob.push_back(structures[i].weight / total);
    }
    std::vector<double> observed(structures.size(), 0.0);
    RngStream rng(seed, 0);
    for (int i = 0; i < n; ++i) {
        const auto soup = sample_soup(net, roots, 0.0, 1.0, rng);
        const auto f = ab_forest(net, soup, 0.5);
        const auto it = cell.find(forest_key(f));
        REQUIRE(it != cell.end());
        observed[it->second] += 1;
    }
    return oracle::chi_square_p(observed, prob);
}

} // namespace

TEST_SUITE("interlace")
{
    TEST_CASE("zero-length window without extension is empty")
    {
        const auto net = box(2, 3);
        RngStream rng(1, 0);
        SoupOptions opt;
        opt.extend_to_cover = false;
        const auto soup = sample_soup(net, sink_roots(net), 2.0, 2.0, rng, opt);
        CHECK(soup.items.empty());
        CHECK(!soup.covered);
    }

    TEST_CASE("soup counts are Poisson with rate c(sink) times the window")
    {
        const auto net = box(2, 3);
        RngStream rng(2, 0);
        SoupOptions opt;
        opt.extend_to_cover = false;
        const double window = 0.75, lambda = net.weight(net.sink()) * window;
        CHECK(net.weight(net.sink()) == doctest::Approx(12.0));
        std::vector<std::uint64_t> counts;
        double time_sum = 0.0, time_n = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const auto soup = sample_soup(net, sink_roots(net), 1.0, 1.0 + window, rng, opt);
            counts.push_back(soup.items.size());
            for (std::size_t j = 0; j < soup.items.size(); ++j) {
                const auto& e = soup.items[j];
                CHECK(e.time >= 1.0);
                CHECK(e.time <= 1.0 + window);
                if (j > 0)
                    CHECK(e.time > soup.items[j - 1].time);
                time_sum += e.time;
                time_n += 1;
            }
        }
        const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / 10000.0;
        CHECK(std::abs(mean - lambda) < 4 * std::sqrt(lambda / 10000.0));
        CHECK(poisson_goodness_of_fit(counts, lambda).p_value > 1e-3);
        // Uniform times: mean 1 + window / 2, variance window^2 / 12.
        CHECK(std::abs(time_sum / time_n - (1.0 + window / 2)) < 4 * window / std::sqrt(12.0 * time_n));
    }

    TEST_CASE("excursions start and end in the root set and avoid it in between")
    {
        const auto net = box(2, 4);
        const auto roots = merge_with_sink(net, 5);
        RngStream rng(3, 0);
        const auto soup = sample_soup(net, roots, 0.0, 3.0, rng);
        CHECK(soup.rate == doctest::Approx(net.weight(net.sink()) + net.weight(5)));
        for (const auto& e : soup.items) {
            const auto& v = e.path.vertices;
            REQUIRE(v.size() >= 2);
            CHECK(roots.contains(v.front()));
            CHECK(roots.contains(v.back()));
            for (std::size_t i = 1; i + 1 < v.size(); ++i)
                CHECK(!roots.contains(v[i]));
            for (std::size_t i = 0; i + 1 < v.size(); ++i)
                CHECK(net.target(v[i], e.path.slots[i]) == v[i + 1]);
        }
    }

    TEST_CASE("coverage extension reaches every vertex after b")
    {
        const auto net = box(2, 5);
        RngStream rng(4, 0);
        const auto soup = sample_soup(net, sink_roots(net), 0.0, 0.01, rng);
        CHECK(soup.covered);
        CHECK(soup.b_extended >= soup.b);
        std::vector<char> hit(net.vertex_count(), 0);
        for (const auto& e : soup.items)
            if (e.time >= soup.b)
                for (auto v : e.path.vertices)
                    hit[v] = 1;
        for (VertexId v = 0; v < 25; ++v)
            CHECK(hit[v]);
        SoupOptions tight;
        tight.excursion_budget = 3;
        CHECK_THROWS_AS(sample_soup(box(2, 12), sink_roots(box(2, 12)), 0.0, 0.01, rng, tight), CoverageError);
    }

    TEST_CASE("index lookups agree with a direct scan")
    {
        const auto net = box(2, 4);
        RngStream rng(5, 0);
        const auto soup = sample_soup(net, sink_roots(net), 0.0, 2.0, rng);
        const SoupIndex idx(net, soup);
        for (int q = 0; q < 200; ++q) {
            const VertexId v = rng.below(16);
            const double s = 2.0 * rng.uniform(), t = s + rng.uniform();
            const SoupIndex::Entry* expect = nullptr;
            bool during = false;
            for (std::size_t i = 0; i < soup.items.size(); ++i) {
                const auto& e = soup.items[i];
                const bool visits = std::find(e.path.vertices.begin(), e.path.vertices.end(), v) != e.path.vertices.end();
                if (visits && e.time >= s && e.time < t)
                    during = true;
                if (visits && e.time >= s && !expect) {
                    expect = idx.first_at_or_after(v, s);
                    REQUIRE(expect);
                    CHECK(expect->item == i);
                    const auto& p = e.path.vertices;
                    const auto pos = std::find(p.begin(), p.end(), v) - p.begin();
                    CHECK(expect->from == p[static_cast<std::size_t>(pos - 1)]);
                    CHECK(net.target(v, expect->back) == expect->from);
                }
            }
            CHECK(idx.hit_during(v, s, t) == during);
        }
    }

    TEST_CASE("a single covering excursion gives its first-entry tree")
    {
        const auto net = cycle_with_sink();
        auto path = [&](std::vector<VertexId> vs) {
            WalkPath p;
            p.vertices = vs;
            for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
                Slot s = 0;
                while (net.target(vs[i], s) != vs[i + 1])
                    ++s;
                p.slots.push_back(s);
            }
            p.stopped = true;
            return p;
        };
        TrajectorySoup soup;
        soup.a = 0.0;
        soup.b = soup.b_extended = 1.0;
        soup.rate = net.weight(0);
        soup.roots = RootSet({0});
        soup.items.push_back({0.5, path({0, 1, 2, 1, 2, 3, 0})});
        soup.covered = true;
        const auto f = ab_forest(net, soup, 0.0);
        CHECK(check_forest(net, f).empty());
        CHECK(f.parent == std::vector<VertexId>{kNoVertex, 0, 1, 2});

        // Appending an excursion after every first entry changes nothing.
        auto later = soup;
        later.items.push_back({0.9, path({0, 3, 2, 1, 0})});
        CHECK(forest_key(ab_forest(net, later, 0.0)) == forest_key(f));
        // Starting the clock after the first excursion switches to the second.
        CHECK(ab_forest(net, later, 0.6).parent == std::vector<VertexId>{kNoVertex, 2, 3, 0});
        CHECK_THROWS(ab_forest(net, later, 0.95));
    }

    TEST_CASE("AB_t has the uniform spanning forest law")
    {
        CHECK(ab_law_p(cycle_with_sink(), RootSet({0}), 100000, 10) > 1e-3);
        const auto b = box(2, 2);
        CHECK(ab_law_p(b, sink_roots(b), 50000, 11) > 1e-3);
        CHECK(ab_law_p(b, merge_with_sink(b, 0), 50000, 12) > 1e-3);
    }

    TEST_CASE("past dynamics identity holds pathwise on the 3x3 grid")
    {
        const auto net = box(2, 3);
        RngStream rng(13, 0);
        for (const auto& roots : {sink_roots(net), merge_with_sink(net, 4)}) {
            int applicable = 0, equal = 0;
            for (int i = 0; i < 10000; ++i) {
                const auto soup = sample_soup(net, roots, 0.0, 1.0, rng);
                const SoupIndex idx(net, soup);
                VertexId u;
                do
                    u = rng.below(9);
                while (roots.contains(u));
                const double s = rng.uniform(), t = s + rng.uniform() * (1.0 - s);
                const auto rep = past_dynamics_check(net, soup, idx, u, s, t);
                if (rep.verdict == DynamicsVerdict::not_applicable)
                    continue;
                ++applicable;
                equal += rep.verdict == DynamicsVerdict::equal;
                CHECK(rep.past_s == rep.component);
                CHECK(rep.past_s <= rep.past_t);
            }
            CHECK(applicable > 500);
            CHECK(equal == applicable);
        }
    }

    TEST_CASE("past dynamics degenerate cases")
    {
        const auto net = box(2, 3);
        RngStream rng(14, 0);
        const auto soup = sample_soup(net, sink_roots(net), 0.0, 1.0, rng);
        const SoupIndex idx(net, soup);
        const auto same = past_dynamics_check(net, soup, idx, 4, 0.3, 0.3);
        CHECK(same.verdict == DynamicsVerdict::equal);
        // An interval with no trajectories: identical forests.
        for (std::size_t i = 0; i + 1 < soup.items.size(); ++i) {
            const double s = soup.items[i].time + 1e-12, t = soup.items[i + 1].time;
            if (t <= s)
                continue;
            CHECK(forest_key(ab_forest(net, soup, idx, s)) == forest_key(ab_forest(net, soup, idx, t)));
            break;
        }
        const auto vw = sample_soup(net, merge_with_sink(net, 4), 0.0, 1.0, rng);
        const SoupIndex vidx(net, vw);
        CHECK_THROWS_AS(past_dynamics_check(net, vw, vidx, 4, 0.1, 0.2), NetworkError);
    }

    TEST_CASE("hitting counts: the whole vertex set sees every excursion")
    {
        const auto net = box(2, 4);
        RngStream rng(15, 0);
        const auto soup = sample_soup(net, sink_roots(net), 0.0, 1.0, rng);
        std::vector<VertexId> all(16);
        std::iota(all.begin(), all.end(), 0);
        std::uint64_t in_window = 0, meet = 0;
        const std::vector<VertexId> K{5, 10};
        for (const auto& e : soup.items)
            if (e.time >= soup.a && e.time <= soup.b) {
                ++in_window;
                meet += path_meets(e.path, K);
            }
        CHECK(count_hitting(soup, all) == in_window);
        CHECK(count_hitting(soup, K) == meet);
    }

    TEST_CASE("Poisson goodness of fit recognises Poisson and non-Poisson counts")
    {
        std::mt19937_64 gen(16);
        std::poisson_distribution<std::uint64_t> pois(3.5);
        std::vector<std::uint64_t> good, shifted;
        for (int i = 0; i < 10000; ++i) {
            const auto x = pois(gen);
            good.push_back(x);
            shifted.push_back(x + 1);
        }
        const auto g = poisson_goodness_of_fit(good, 3.5);
        CHECK(g.p_value > 1e-3);
        CHECK(g.dof >= 3);
        CHECK(poisson_goodness_of_fit(shifted, 3.5).p_value < 1e-6);
    }

    TEST_CASE("K-hitting counts are Poisson with mean window times capacity")
    {
        RngStream rng(17, 0);
        const auto tree = Network::regular_tree_ball(3, 6);
        const auto wired = capacity_poisson_check(tree, sink_roots(tree), {1}, 2.0, 10000, rng);
        CHECK(wired.expected_mean == doctest::Approx(2.0 * capacity(tree, {1})));
        CHECK(wired.p_value > 1e-3);
        CHECK(std::abs(wired.observed_mean - wired.expected_mean) < 3 * wired.mean_stderr);

        const auto b = box(2, 5);
        const auto vwired = capacity_poisson_check(b, merge_with_sink(b, 12), {6, 7}, 1.0, 10000, rng);
        CHECK(vwired.expected_mean == doctest::Approx(capacity_v(b, 12, {6, 7})));
        CHECK(vwired.p_value > 1e-3);
        const auto containing = capacity_poisson_check(b, merge_with_sink(b, 12), {12, 13}, 1.0, 10000, rng);
        CHECK(containing.expected_mean == doctest::Approx(capacity(b, {12, 13}) + b.weight(12)));
        CHECK(containing.p_value > 1e-3);
    }
}
