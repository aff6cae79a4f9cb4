#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>

#include "oracles.hpp"
#include "usf/forest.hpp"
#include "usf/tree_ball.hpp"

using namespace usf;

namespace {

Network box(int d, int S)
{
    LatticeSpec spec;
    spec.dimension = d;
    spec.side = S;
    return Network::lattice_box(spec);
}

Network cycle4() { return Network::from_edges(4, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 0, 1}}, {}); }
Network triangle(double a, double b, double c) { return Network::from_edges(3, {{0, 1, a}, {1, 2, b}, {2, 0, c}}, {}); }

// 2 x 3 grid, every missing lattice neighbor replaced by an edge to the sink 6.
Network grid_2x3()
{
    std::vector<EdgeRecord> e;
    auto id = [](int r, int c) { return static_cast<VertexId>(r * 3 + c); };
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) {
            if (c + 1 < 3)
                e.push_back({id(r, c), id(r, c + 1), 1});
            if (r + 1 < 2)
                e.push_back({id(r, c), id(r + 1, c), 1});
            const int missing = 4 - (c > 0) - (c < 2) - (r > 0) - (r < 1);
            for (int m = 0; m < missing; ++m)
                e.push_back({id(r, c), 6, 1});
        }
    return Network::from_edges(7, e, {6});
}

using Sampler = std::function<OrientedForest(RngStream&)>;

// Chi-square p-value of sampled forest frequencies against the enumerated
// weights. The enumeration itself is first checked against brute force.
double distribution_p(const Network& net, const RootSet& roots, const Sampler& sample, int n, std::uint64_t seed)
{
    const auto structures = enumerate_spanning_structures(net, roots);
    std::vector<double> w;
    for (const auto& s : structures)
        w.push_back(s.weight);
    auto sorted = w;
    std::sort(sorted.begin(), sorted.end());
    const auto brute = oracle::brute_force_forest_weights(net, roots.vertices());
    REQUIRE(sorted.size() == brute.size());
    for (std::size_t i = 0; i < brute.size(); ++i)
        REQUIRE(sorted[i] == doctest::Approx(brute[i]));

    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    std::map<std::vector<Slot>, std::size_t> cell;
    std::vector<double> prob;
    for (std::size_t i = 0; i < structures.size(); ++i) {
        cell[forest_key(to_forest(net, roots, structures[i]))] = i;
        prob.push_back(w[i] / total);
    }
    std::vector<double> observed(structures.size(), 0.0);
    RngStream rng(seed, 0);
    for (int i = 0; i < n; ++i) {
        const auto f = sample(rng);
        const auto it = cell.find(forest_key(f));
        REQUIRE(it != cell.end());
        observed[it->second] += 1;
    }
    return oracle::chi_square_p(observed, prob);
}

struct Suite {
    const char* name;
    Network net;
    RootSet roots;
};

std::vector<Suite> oracle_suite()
{
    std::vector<Suite> s;
    s.push_back({"4-cycle", cycle4(), RootSet({0})});
    s.push_back({"K3", triangle(1, 1, 1), RootSet({0})});
    s.push_back({"weighted triangle", triangle(1, 2, 3), RootSet({0})});
    auto g = grid_2x3();
    s.push_back({"2x3 wired grid", g, sink_roots(g)});
    auto b = box(2, 2);
    s.push_back({"two-root 2x2 grid", b, merge_with_sink(b, 0)});
    return s;
}

// Forest adjacency BFS from v that never enters the barrier.
std::map<VertexId, std::uint32_t> forest_bfs(const OrientedForest& f, VertexId v)
{
    std::vector<std::vector<VertexId>> adj(f.size());
    for (VertexId u = 0; u < f.size(); ++u)
        if (f.parent[u] != kNoVertex) {
            adj[u].push_back(f.parent[u]);
            adj[f.parent[u]].push_back(u);
        }
    std::map<VertexId, std::uint32_t> dist{{v, 0}};
    std::queue<VertexId> q;
    q.push(v);
    while (!q.empty()) {
        const VertexId x = q.front();
        q.pop();
        for (VertexId y : adj[x])
            if (!f.barrier.contains(y) && !dist.count(y)) {
                dist[y] = dist[x] + 1;
                q.push(y);
            }
    }
    return dist;
}

template <class T>
std::map<T, double> histogram(const std::vector<T>& xs)
{
    std::map<T, double> h;
    for (const auto& x : xs)
        h[x] += 1;
    return h;
}

// Pools sparse tail cells so that the two-sample test has expected counts >= 5.
std::map<std::uint32_t, double> pooled(const std::vector<std::uint32_t>& xs, std::uint32_t cap)
{
    std::map<std::uint32_t, double> h;
    for (auto x : xs)
        h[std::min(x, cap)] += 1;
    return h;
}

} // namespace

TEST_SUITE("forest")
{
    TEST_CASE("tree input gives the unique spanning tree")
    {
        const auto path = Network::from_edges(4, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}}, {});
        RngStream rng(1, 0);
        const auto f = wilson_sample(path, RootSet({0}), rng);
        CHECK(check_forest(path, f).empty());
        CHECK(f.parent == std::vector<VertexId>{kNoVertex, 0, 1, 2});
        CHECK(f.depth == std::vector<std::uint32_t>{0, 1, 2, 3});
        CHECK(enumerate_spanning_structures(path, RootSet({0})).size() == 1);
        const auto single = Network::from_edges(2, {{0, 1, 1}}, {});
        const auto ab = aldous_broder_sample(single, RootSet({0}), rng);
        CHECK(ab.parent[1] == 0);
    }

    TEST_CASE("enumeration counts match the matrix-tree determinant")
    {
        CHECK(enumerate_spanning_structures(cycle4(), RootSet({0})).size() == 4);
        const auto b = box(2, 2);
        CHECK(Rational(static_cast<long>(enumerate_spanning_structures(b, sink_roots(b)).size())) ==
              matrix_tree_determinant(b, sink_roots(b)));
        for (auto& s : oracle_suite()) {
            const auto st = enumerate_spanning_structures(s.net, s.roots);
            double total = 0.0;
            for (const auto& w : st)
                total += w.weight;
            CHECK(total == doctest::Approx(matrix_tree_determinant(s.net, s.roots).convert_to<double>()));
            for (const auto& w : st)
                CHECK(check_forest(s.net, to_forest(s.net, s.roots, w)).empty());
        }
        CHECK_THROWS_AS(enumerate_spanning_structures(box(2, 4), sink_roots(box(2, 4))), NetworkError);
    }

    TEST_CASE("Wilson, Aldous-Broder and enumeration agree on the oracle suite")
    {
        std::uint64_t seed = 100;
        for (auto& s : oracle_suite()) {
            CAPTURE(s.name);
            const auto& net = s.net;
            const auto& roots = s.roots;
            CHECK(distribution_p(net, roots, [&](RngStream& r) { return wilson_sample(net, roots, r); }, 100000,
                                 ++seed) > 1e-3);
            CHECK(distribution_p(net, roots, [&](RngStream& r) { return aldous_broder_sample(net, roots, r); },
                                 100000, ++seed) > 1e-3);
        }
    }

    TEST_CASE("Wilson's law does not depend on the start order")
    {
        const auto g = grid_2x3();
        const auto roots = sink_roots(g);
        auto shuffled = [&](RngStream& r) {
            std::vector<VertexId> order{0, 1, 2, 3, 4, 5};
            std::shuffle(order.begin(), order.end(), r);
            return wilson_sample(g, roots, order, r);
        };
        CHECK(distribution_p(g, roots, shuffled, 100000, 7) > 1e-3);
        auto reversed = [&](RngStream& r) { return wilson_sample(g, roots, {5, 4, 3, 2, 1, 0}, r); };
        CHECK(distribution_p(g, roots, reversed, 100000, 8) > 1e-3);
    }

    TEST_CASE("Wilson rejects bad orders and roots")
    {
        const auto c = cycle4();
        RngStream rng(2, 0);
        const auto path = Network::from_edges(4, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}}, {});
        CHECK_THROWS_AS(wilson_sample(path, RootSet({0}), {1, 2}, rng), NetworkError);
        CHECK_THROWS_AS(wilson_sample(c, RootSet(), rng), NetworkError);
        CHECK_THROWS_AS(aldous_broder_sample(box(2, 10), sink_roots(box(2, 10)), rng, 10), NetworkError);
    }

    TEST_CASE("sampled forests satisfy the invariants")
    {
        RngStream rng(3, 0);
        const auto b = box(3, 7);
        for (int i = 0; i < 20; ++i) {
            const auto f = wilson_sample(b, sink_roots(b), breadth_first_order(b, sink_roots(b), {171}), rng);
            REQUIRE(check_forest(b, f).empty());
            for (VertexId v = 0; v < f.size(); ++v)
                if (!f.is_root(v)) {
                    CHECK(b.target(v, f.parent_slot[v]) == f.parent[v]);
                    CHECK(f.depth[v] == f.depth[f.parent[v]] + 1);
                }
        }
    }

    TEST_CASE("past, future, ball and component queries")
    {
        // a -> b -> c -> root
        const auto path = Network::from_edges(4, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}}, {});
        RngStream rng(4, 0);
        const auto f = wilson_sample(path, RootSet({3}), rng);
        auto past_b = past_of(f, 1);
        std::sort(past_b.begin(), past_b.end());
        CHECK(past_b == std::vector<VertexId>{0, 1});
        CHECK(past_of(f, 0) == std::vector<VertexId>{0});
        CHECK_THROWS_AS(past_of(f, 3), NetworkError);
        CHECK(future_of(f, 3).length() == 0);
        CHECK(future_of(f, 0).length() == 3);
        CHECK(intrinsic_ball(f, 1, 0).vertices == std::vector<VertexId>{1});
        CHECK(component_of(f, 0).size() == 4);
    }

    TEST_CASE("structural identities on random forests")
    {
        RngStream rng(5, 0);
        const auto b = box(2, 9);
        for (int trial = 0; trial < 30; ++trial) {
            const VertexId v = rng.below(81);
            const auto roots = merge_with_sink(b, v);
            const auto f = wilson_sample(b, roots, rng);
            const ForestIndex idx(f);

            std::uint64_t past_total = 0, depth_total = 0;
            for (VertexId u = 0; u < f.size(); ++u) {
                depth_total += f.depth[u];
                if (!f.is_root(u))
                    past_total += past_of(f, idx, u).size();
            }
            CHECK(past_total == depth_total);

            const auto comp_v = component_of(f, v);
            const auto comp_s = component_of(f, b.sink());
            CHECK(comp_v.size() + comp_s.size() == b.vertex_count());

            const VertexId u = rng.below(81);
            const auto fut = future_of(f, u);
            CHECK(fut.length() == f.depth[u]);
            if (!f.is_root(u)) {
                const auto up = future_of(f, f.parent[u]);
                CHECK(std::equal(up.vertices.begin(), up.vertices.end(), fut.vertices.begin() + 1));
            }

            const auto oracle_dist = forest_bfs(f, u);
            for (std::uint32_t n : {0u, 1u, 3u, 7u}) {
                const auto ball = intrinsic_ball(f, idx, u, n);
                std::size_t expect = 0, shell = 0;
                for (auto& [x, d] : oracle_dist) {
                    expect += d <= n;
                    shell += d == n;
                }
                CHECK(ball.vertices.size() == expect);
                CHECK(ball.shell.size() == shell);
                for (std::size_t i = 0; i < ball.vertices.size(); ++i)
                    CHECK(oracle_dist.at(ball.vertices[i]) == ball.distance[i]);
            }
        }
    }

    TEST_CASE("balls on a path component have at most 2n + 1 vertices")
    {
        const auto line = box(1, 30);
        RngStream rng(6, 0);
        const auto f = wilson_sample(line, sink_roots(line), rng);
        for (std::uint32_t n = 0; n < 10; ++n)
            CHECK(intrinsic_ball(f, 15, n).vertices.size() <= 2 * n + 1);
    }

    TEST_CASE("LocalWilson: attaching everything samples the same law")
    {
        const auto g = grid_2x3();
        const auto roots = sink_roots(g);
        LocalWilson lw(g, roots);
        auto lazy = [&](RngStream& r) {
            lw.reset();
            std::vector<VertexId> order{0, 1, 2, 3, 4, 5};
            std::shuffle(order.begin(), order.end(), r);
            for (auto v : order)
                lw.attach(v, r);
            OrientedForest f;
            f.roots = roots;
            f.parent.assign(g.vertex_count(), kNoVertex);
            f.parent_slot.assign(g.vertex_count(), static_cast<Slot>(kNoVertex));
            for (VertexId v = 0; v < 6; ++v) {
                f.parent[v] = lw.parent(v);
                f.parent_slot[v] = lw.parent_slot(v);
            }
            return f;
        };
        CHECK(distribution_p(g, roots, lazy, 100000, 9) > 1e-3);
    }

    TEST_CASE("LocalWilson reset and depth bookkeeping")
    {
        const auto b = box(2, 7);
        LocalWilson lw(b, sink_roots(b));
        RngStream rng(10, 0);
        lw.attach(24, rng);
        CHECK(lw.in_tree(24));
        for (VertexId v = 24; !lw.roots().contains(v); v = lw.parent(v))
            CHECK(lw.depth(v) == lw.depth(lw.parent(v)) + 1);
        lw.reset();
        for (VertexId v = 0; v < 49; ++v)
            CHECK(!lw.in_tree(v));
        CHECK(lw.in_tree(b.sink()));
        CHECK_THROWS_AS(LocalWilson(b, RootSet()), NetworkError);
    }

    TEST_CASE("local past and ball explorations match the full sampler")
    {
        const auto b = box(2, 9);
        const VertexId o = 40;
        const auto roots = sink_roots(b);
        RngStream rng(11, 0);
        LocalWilson lw(b, roots);
        std::vector<std::uint32_t> full_past, local_past, full_ball, local_ball;
        for (int i = 0; i < 20000; ++i) {
            const auto f = wilson_sample(b, roots, rng);
            full_past.push_back(static_cast<std::uint32_t>(past_of(f, o).size()));
            full_ball.push_back(static_cast<std::uint32_t>(intrinsic_ball(f, o, 3).vertices.size()));
            lw.reset();
            const auto c = explore_past(lw, o, rng, 0xFFFFFFFFu, 1u << 20);
            CHECK(!c.capped);
            local_past.push_back(static_cast<std::uint32_t>(c.vertices.size()));
            lw.reset();
            local_ball.push_back(static_cast<std::uint32_t>(explore_ball(lw, o, 3, rng, 1u << 20).vertices.size()));
        }
        CHECK(oracle::two_sample_p(pooled(full_past, 12), pooled(local_past, 12)) > 1e-3);
        CHECK(oracle::two_sample_p(pooled(full_ball, 16), pooled(local_ball, 16)) > 1e-3);
    }

    TEST_CASE("explore_ball distances and parents are consistent")
    {
        const auto b = box(3, 9);
        LocalWilson lw(b, sink_roots(b));
        RngStream rng(12, 0);
        for (int i = 0; i < 50; ++i) {
            lw.reset();
            const auto c = explore_ball(lw, 364, 6, rng, 1u << 20);
            for (std::size_t j = 1; j < c.vertices.size(); ++j) {
                const VertexId x = c.vertices[j], y = c.vertices[c.from[j]];
                CHECK(c.distance[j] == c.distance[c.from[j]] + 1);
                CHECK((lw.parent(x) == y || lw.parent(y) == x));
                CHECK(c.distance[j] <= 6);
            }
        }
    }

    TEST_CASE("radial tree samplers match explicit LocalWilson on a tree ball")
    {
        const int R = 6;
        const auto tree = Network::regular_tree_ball(3, R);
        RngStream rng(13, 0);
        RadialParams p;
        p.k = 3;
        p.radius = R;

        // Past of the root in the wired forest.
        std::vector<std::uint32_t> a, b, c, d, e, g;
        LocalWilson wired(tree, sink_roots(tree));
        LocalWilson vwired(tree, merge_with_sink(tree, 0));
        for (int i = 0; i < 20000; ++i) {
            wired.reset();
            a.push_back(static_cast<std::uint32_t>(explore_past(wired, 0, rng, 0xFFFFFFFFu, 1u << 20).vertices.size()));
            b.push_back(sample_tree_past(p, rng).size());
            vwired.reset();
            c.push_back(static_cast<std::uint32_t>(explore_past(vwired, 0, rng, 0xFFFFFFFFu, 1u << 20).vertices.size()));
            d.push_back(sample_tree_wired_component(p, rng).size());
            wired.reset();
            e.push_back(static_cast<std::uint32_t>(explore_ball(wired, 0, 3, rng, 1u << 20).vertices.size()));
            RadialParams q = p;
            q.depth_cap = 3;
            g.push_back(sample_tree_component(q, rng).size());
        }
        CHECK(oracle::two_sample_p(pooled(a, 10), pooled(b, 10)) > 1e-3);
        CHECK(oracle::two_sample_p(pooled(c, 14), pooled(d, 14)) > 1e-3);
        CHECK(oracle::two_sample_p(pooled(e, 12), pooled(g, 12)) > 1e-3);
    }

    TEST_CASE("radial component: depth equals intrinsic distance, caps reported")
    {
        RngStream rng(14, 0);
        RadialParams p;
        p.radius = 200;
        p.depth_cap = 20;
        const auto t = sample_tree_component(p, rng);
        CHECK(t.capped);
        CHECK(t.height() == 20);
        for (std::uint32_t v = 1; v < t.size(); ++v)
            CHECK(t.depth(v) == t.depth(t.parent(v)) + 1);
        RadialParams tiny = p;
        tiny.volume_cap = 5;
        CHECK(sample_tree_component(tiny, rng).size() <= 5 + 3);
        RadialParams bad;
        bad.k = 2;
        CHECK_THROWS(sample_tree_past(bad, rng));
    }

    TEST_CASE("Kesten tree generation sizes grow like 1 + n sigma^2")
    {
        RngStream rng(15, 0);
        const auto off = binary_critical_offspring();
        const int depth = 12, reps = 20000;
        std::vector<double> sum(depth + 1, 0.0), sq(depth + 1, 0.0);
        for (int i = 0; i < reps; ++i) {
            const auto t = kesten_tree_sample(depth, off, rng);
            std::vector<double> gen(depth + 1, 0.0);
            for (std::uint32_t v = 0; v < t.size(); ++v)
                gen[t.depth(v)] += 1;
            for (int n = 0; n <= depth; ++n) {
                sum[n] += gen[n];
                sq[n] += gen[n] * gen[n];
            }
        }
        for (int n = 0; n <= depth; ++n) {
            const double m = sum[n] / reps;
            const double se = std::sqrt(std::max(sq[n] / reps - m * m, 0.0) / reps);
            CHECK(std::abs(m - (1.0 + 0.5 * n)) <= 4 * se + 1e-12);
        }
    }

    TEST_CASE("Galton-Watson survival matches generating-function iteration")
    {
        RngStream rng(16, 0);
        const auto off = binary_critical_offspring();
        const int depth = 20, reps = 100000;
        double s = 0.0; // P(extinct by generation n) = f^n(0)
        for (int n = 0; n < depth; ++n)
            s = 0.25 * (1 + s) * (1 + s);
        int alive = 0;
        for (int i = 0; i < reps; ++i)
            alive += galton_watson_sample(depth, off, rng).height() == static_cast<std::uint32_t>(depth);
        const double p = 1 - s, f = static_cast<double>(alive) / reps;
        CHECK(std::abs(f - p) < 4 * std::sqrt(p * (1 - p) / reps));
    }

    TEST_CASE("conditioning on a future segment does not enlarge the past beyond T_v")
    {
        const auto tree = Network::regular_tree_ball(3, 8);
        RngStream rng(17, 0);
        LocalWilson wired(tree, sink_roots(tree));
        LocalWilson vwired(tree, merge_with_sink(tree, 0));
        std::vector<double> cond_vol, cond_depth, tv_vol, tv_depth;
        while (cond_vol.size() < 20000) {
            wired.reset();
            wired.attach(0, rng);
            if (wired.parent(0) != 1 || wired.parent(1) != 4)
                continue;
            const auto c = explore_past(wired, 0, rng, 0xFFFFFFFFu, 1u << 22);
            cond_vol.push_back(static_cast<double>(c.vertices.size()));
            cond_depth.push_back(c.distance.back());
        }
        for (int i = 0; i < 20000; ++i) {
            vwired.reset();
            const auto c = explore_past(vwired, 0, rng, 0xFFFFFFFFu, 1u << 22);
            tv_vol.push_back(static_cast<double>(c.vertices.size()));
            tv_depth.push_back(c.distance.back());
        }
        auto mean_se = [](const std::vector<double>& x) {
            const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
            double v = 0.0;
            for (double y : x)
                v += (y - m) * (y - m);
            return std::pair{m, std::sqrt(v / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()))};
        };
        const auto [cv, cvs] = mean_se(cond_vol);
        const auto [tv, tvs] = mean_se(tv_vol);
        const auto [cd, cds] = mean_se(cond_depth);
        const auto [td, tds] = mean_se(tv_depth);
        CHECK(cv <= tv + 3 * std::hypot(cvs, tvs));
        CHECK(cd <= td + 3 * std::hypot(cds, tds));
    }
}
