#include "usf/interlace.hpp"

#include <cmath>
#include <unordered_set>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

namespace usf {

namespace {

Excursion sample_excursion(const Network& net, const RootSet& roots, const std::vector<double>& root_cum,
                           double time, RngStream& rng)
{
    Excursion e;
    e.time = time;
    const double u = rng.uniform() * root_cum.back();
    auto it = std::upper_bound(root_cum.begin(), root_cum.end(), u);
    if (it == root_cum.end())
        --it;
    VertexId x = roots[static_cast<std::size_t>(it - root_cum.begin())];
    e.path.vertices.push_back(x);
    do {
        const Slot s = net.sample_slot(x, rng);
        x = net.target(x, s);
        e.path.slots.push_back(s);
        e.path.vertices.push_back(x);
    } while (!roots.contains(x));
    e.path.stopped = true;
    return e;
}

} // namespace

TrajectorySoup sample_soup(const Network& net, const RootSet& roots, double a, double b, RngStream& rng,
                           const SoupOptions& opt)
{
    if (!(b >= a))
        throw NetworkError("soup window must satisfy a <= b");
    if (roots.empty())
        throw NetworkError("soup needs a nonempty root set");
    TrajectorySoup soup;
    soup.a = a;
    soup.b = b;
    soup.roots = roots;
    std::vector<double> root_cum;
    for (VertexId r : roots)
        root_cum.push_back((root_cum.empty() ? 0.0 : root_cum.back()) + net.weight(r));
    soup.rate = root_cum.back();

    // Exponential gaps realize the Poisson count with uniform times.
    double t = a;
    while (true) {
        const double next = t + rng.exponential(soup.rate);
        if (next > b)
            break;
        if (next == t)
            continue; // duplicate timestamp: reject and redraw
        t = next;
        soup.items.push_back(sample_excursion(net, roots, root_cum, t, rng));
    }
    soup.b_extended = b;
    if (!opt.extend_to_cover)
        return soup;

    // Keep running the same Poisson process past b until every non-root
    // vertex is visited by a trajectory with time >= b.
    std::vector<char> hit(net.vertex_count(), 0);
    std::size_t missing = 0;
    for (VertexId v = 0; v < net.vertex_count(); ++v)
        if (!roots.contains(v))
            ++missing;
    t = b;
    std::uint64_t used = soup.items.size();
    while (missing > 0) {
        if (used++ >= opt.excursion_budget)
            throw CoverageError("soup coverage not reached within the excursion budget");
        const double next = t + rng.exponential(soup.rate);
        if (next == t)
            continue;
        t = next;
        soup.items.push_back(sample_excursion(net, roots, root_cum, t, rng));
        for (VertexId x : soup.items.back().path.vertices)
            if (!hit[x] && !roots.contains(x)) {
                hit[x] = 1;
                --missing;
            }
    }
    soup.b_extended = std::max(b, t);
    soup.covered = true;
    return soup;
}

SoupIndex::SoupIndex(const Network& net, const TrajectorySoup& soup) : entries_(net.vertex_count())
{
    std::vector<std::uint32_t> stamp(net.vertex_count(), 0);
    for (std::uint32_t i = 0; i < soup.items.size(); ++i) {
        const auto& p = soup.items[i].path;
        for (std::size_t j = 1; j < p.vertices.size(); ++j) {
            const VertexId x = p.vertices[j];
            if (soup.roots.contains(x) || stamp[x] == i + 1)
                continue;
            stamp[x] = i + 1;
            const VertexId from = p.vertices[j - 1];
            entries_[x].push_back({soup.items[i].time, i, from, net.reverse_slot(from, p.slots[j - 1])});
        }
    }
}

const SoupIndex::Entry* SoupIndex::first_at_or_after(VertexId v, double t) const
{
    const auto& e = entries_[v];
    auto it = std::lower_bound(e.begin(), e.end(), t, [](const Entry& x, double time) { return x.time < time; });
    return it == e.end() ? nullptr : &*it;
}

bool SoupIndex::hit_during(VertexId v, double s, double t) const
{
    const Entry* e = first_at_or_after(v, s);
    return e != nullptr && e->time < t;
}

OrientedForest ab_forest(const Network& net, const TrajectorySoup& soup, const SoupIndex& idx, double t)
{
    OrientedForest f;
    const std::size_t n = net.vertex_count();
    f.parent.assign(n, kNoVertex);
    f.parent_slot.assign(n, kNoVertex);
    f.depth.assign(n, 0);
    f.roots = soup.roots;
    f.barrier = sink_roots(net);
    for (VertexId v = 0; v < n; ++v) {
        if (soup.roots.contains(v))
            continue;
        const auto* e = idx.first_at_or_after(v, t);
        if (e == nullptr)
            throw CoverageError("vertex " + std::to_string(v) + " is not visited after time " + std::to_string(t));
        f.parent[v] = e->from;
        f.parent_slot[v] = e->back;
    }
    // Depths: every parent pointer leads toward the root set.
    std::vector<char> done(n, 0);
    for (VertexId r : f.roots)
        done[r] = 1;
    std::vector<VertexId> stack;
    for (VertexId v = 0; v < n; ++v) {
        VertexId x = v;
        while (!done[x]) {
            stack.push_back(x);
            x = f.parent[x];
            if (stack.size() > n)
                throw std::logic_error("AB_t produced a cycle");
        }
        std::uint32_t d = f.depth[x];
        while (!stack.empty()) {
            f.depth[stack.back()] = ++d;
            done[stack.back()] = 1;
            stack.pop_back();
        }
    }
    return f;
}

OrientedForest ab_forest(const Network& net, const TrajectorySoup& soup, double t)
{
    return ab_forest(net, soup, SoupIndex(net, soup), t);
}

DynamicsReport past_dynamics_check(const Network& net, const TrajectorySoup& soup, const SoupIndex& idx, VertexId u,
                                   double s, double t)
{
    DynamicsReport rep;
    if (soup.roots.contains(u))
        throw NetworkError("past_dynamics_check needs a non-root vertex");
    if (s > t)
        throw NetworkError("past_dynamics_check needs s <= t");
    if (idx.hit_during(u, s, t))
        return rep;

    const auto fs = ab_forest(net, soup, idx, s);
    const auto ft = ab_forest(net, soup, idx, t);
    auto ps = past_of(fs, u);
    ForestIndex it(ft);
    auto pt = past_of(ft, it, u);
    rep.past_s = ps.size();
    rep.past_t = pt.size();

    // Component of u in P_t(u) restricted to unvisited vertices. Inside the
    // past, the only neighbors in the forest are parent and children.
    std::unordered_set<VertexId> in_pt(pt.begin(), pt.end());
    std::vector<VertexId> comp{u};
    std::unordered_set<VertexId> seen{u};
    for (std::size_t i = 0; i < comp.size(); ++i) {
        const VertexId x = comp[i];
        auto consider = [&](VertexId y) {
            if (y == kNoVertex || !in_pt.count(y) || seen.count(y) || idx.hit_during(y, s, t))
                return;
            seen.insert(y);
            comp.push_back(y);
        };
        consider(ft.parent[x]);
        for (auto c = it.begin(x); c != it.end(x); ++c)
            consider(*c);
    }
    rep.component = comp.size();
    std::sort(ps.begin(), ps.end());
    std::sort(comp.begin(), comp.end());
    rep.verdict = ps == comp ? DynamicsVerdict::equal : DynamicsVerdict::differ;
    return rep;
}

std::uint64_t count_hitting(const TrajectorySoup& soup, const std::vector<VertexId>& K)
{
    std::vector<VertexId> set = K;
    std::sort(set.begin(), set.end());
    std::uint64_t count = 0;
    for (const auto& e : soup.items) {
        if (e.time < soup.a || e.time > soup.b)
            continue;
        for (VertexId x : e.path.vertices)
            if (std::binary_search(set.begin(), set.end(), x)) {
                ++count;
                break;
            }
    }
    return count;
}

PoissonTestReport poisson_goodness_of_fit(const std::vector<std::uint64_t>& counts, double lambda)
{
    PoissonTestReport rep;
    rep.expected_mean = lambda;
    const auto n = static_cast<double>(counts.size());
    double sum = 0.0;
    std::uint64_t max_count = 0;
    for (auto c : counts) {
        sum += static_cast<double>(c);
        max_count = std::max(max_count, c);
    }
    rep.observed_mean = sum / n;
    rep.mean_stderr = std::sqrt(lambda / n);

    boost::math::poisson_distribution<double> pois(lambda);
    std::vector<double> observed(max_count + 1, 0.0);
    for (auto c : counts)
        observed[c] += 1.0;
    // Cells [lo_i, hi_i]; the last cell absorbs the upper tail.
    struct Cell {
        double obs = 0.0;
        double exp = 0.0;
    };
    std::vector<Cell> cells;
    Cell cur;
    const auto top = static_cast<std::uint64_t>(std::max<double>(static_cast<double>(max_count), lambda * 3 + 10));
    for (std::uint64_t k = 0; k <= top; ++k) {
        cur.obs += k < observed.size() ? observed[k] : 0.0;
        cur.exp += n * boost::math::pdf(pois, static_cast<double>(k));
        if (cur.exp >= 5.0) {
            cells.push_back(cur);
            cur = Cell{};
        }
    }
    // Upper tail beyond `top`, folded into the trailing partial cell.
    cur.exp += n * boost::math::cdf(boost::math::complement(pois, static_cast<double>(top)));
    if (cells.empty()) {
        cells.push_back(cur);
    } else {
        cells.back().obs += cur.obs;
        cells.back().exp += cur.exp;
    }
    double chi = 0.0;
    for (const auto& c : cells)
        chi += (c.obs - c.exp) * (c.obs - c.exp) / c.exp;
    rep.chi_square = chi;
    rep.dof = static_cast<int>(cells.size()) - 1;
    if (rep.dof >= 1) {
        boost::math::chi_squared_distribution<double> dist(rep.dof);
        rep.p_value = boost::math::cdf(boost::math::complement(dist, chi));
    } else {
        rep.p_value = 1.0;
    }
    return rep;
}

PoissonTestReport capacity_poisson_check(const Network& net, const RootSet& roots, const std::vector<VertexId>& K,
                                         double window, std::uint64_t soups, RngStream& rng)
{
    double cap = 0.0;
    const RootSet sinks = sink_roots(net);
    if (roots.vertices() == sinks.vertices()) {
        cap = capacity(net, K);
    } else {
        VertexId v = kNoVertex;
        for (VertexId r : roots)
            if (!net.is_sink(r))
                v = r;
        if (v == kNoVertex || roots.size() != sinks.size() + 1)
            throw NetworkError("capacity_poisson_check supports the wired and single-vertex-wired root sets");
        cap = capacity_v(net, v, K);
    }
    SoupOptions opt;
    opt.extend_to_cover = false;
    std::vector<std::uint64_t> counts;
    counts.reserve(soups);
    for (std::uint64_t i = 0; i < soups; ++i) {
        const auto soup = sample_soup(net, roots, 0.0, window, rng, opt);
        counts.push_back(count_hitting(soup, K));
    }
    return poisson_goodness_of_fit(counts, window * cap);
}

} // namespace usf
