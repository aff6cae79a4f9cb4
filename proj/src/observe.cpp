#include "usf/observe.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace usf {

MarginMap::MarginMap(const Network& net) : net_(net)
{
    if (!net.has_sink())
        throw NetworkError("margin rule needs a network with a sink");
    if (net.mode() == Mode::generic) {
        table_.assign(net.vertex_count(), kNoVertex);
        std::deque<VertexId> q;
        for (VertexId s : net.sinks()) {
            table_[s] = 0;
            q.push_back(s);
        }
        while (!q.empty()) {
            const VertexId x = q.front();
            q.pop_front();
            for (Slot s = 0; s < net.degree(x); ++s) {
                const VertexId y = net.target(x, s);
                if (table_[y] == kNoVertex) {
                    table_[y] = table_[x] + 1;
                    q.push_back(y);
                }
            }
        }
    }
}

std::uint32_t l1_diameter(const std::vector<std::vector<int>>& points)
{
    if (points.size() < 2)
        return 0;
    const std::size_t d = points[0].size();
    std::int64_t best = 0;
    // Fixing the sign of the first coordinate halves the 2^d sign patterns.
    const std::uint64_t patterns = d == 0 ? 1 : (std::uint64_t{1} << (d - 1));
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
        std::int64_t lo = std::numeric_limits<std::int64_t>::max();
        std::int64_t hi = std::numeric_limits<std::int64_t>::min();
        for (const auto& p : points) {
            std::int64_t s = p[0];
            for (std::size_t i = 1; i < d; ++i)
                s += (mask >> (i - 1) & 1) ? -p[i] : p[i];
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        best = std::max(best, hi - lo);
    }
    return static_cast<std::uint32_t>(best);
}

namespace {

std::uint32_t tree_diameter(const std::vector<std::uint32_t>& from)
{
    // Heights in reverse breadth-first order; the diameter passes through the
    // vertex maximizing the sum of its two tallest branches.
    const std::size_t n = from.size();
    std::vector<std::uint32_t> best1(n, 0), best2(n, 0);
    std::uint32_t diam = 0;
    for (std::size_t i = n; i-- > 0;) {
        diam = std::max(diam, best1[i] + best2[i]);
        if (i == 0)
            break;
        const std::uint32_t h = best1[i] + 1;
        auto& b1 = best1[from[i]];
        auto& b2 = best2[from[i]];
        if (h > b1) {
            b2 = b1;
            b1 = h;
        } else if (h > b2) {
            b2 = h;
        }
    }
    return diam;
}

struct Extrinsic {
    std::uint32_t radius = 0;
    std::uint32_t diameter = 0;
};

Extrinsic extrinsic_extent(const Network& net, const std::vector<VertexId>& vs)
{
    Extrinsic e;
    const VertexId o = vs[0];
    switch (net.mode()) {
    case Mode::torus:
        throw NetworkError("extrinsic observables are not defined in torus mode");
    case Mode::box: {
        std::vector<std::vector<int>> pts;
        pts.reserve(vs.size());
        for (VertexId v : vs)
            pts.push_back(net.coords(v));
        for (const auto& p : pts) {
            std::uint32_t d = 0;
            for (std::size_t i = 0; i < p.size(); ++i)
                d += static_cast<std::uint32_t>(std::abs(p[i] - pts[0][i]));
            e.radius = std::max(e.radius, d);
        }
        e.diameter = l1_diameter(pts);
        return e;
    }
    case Mode::tree: {
        // Double sweep: in a tree metric the farthest point from the farthest
        // point of any element realizes the diameter of the set.
        VertexId far = o;
        for (VertexId v : vs) {
            const auto d = graph_distance(net, o, v);
            if (d > e.radius) {
                e.radius = d;
                far = v;
            }
        }
        for (VertexId v : vs)
            e.diameter = std::max(e.diameter, graph_distance(net, far, v));
        return e;
    }
    default: {
        for (std::size_t i = 0; i < vs.size(); ++i) {
            const auto dist = bfs_distances(net, vs[i]);
            for (VertexId w : vs) {
                e.diameter = std::max(e.diameter, dist[w]);
                if (i == 0)
                    e.radius = std::max(e.radius, dist[w]);
            }
        }
        return e;
    }
    }
}

} // namespace

std::uint32_t extrinsic_diameter(const Network& net, const std::vector<VertexId>& set)
{
    return set.empty() ? 0 : extrinsic_extent(net, set).diameter;
}

PastSummary summarize_cluster(const MarginMap& mm, const LocalCluster& c, std::uint32_t margin)
{
    const Network& net = mm.network();
    PastSummary s;
    s.origin = c.vertices.at(0);
    s.volume = c.vertices.size();
    for (auto d : c.distance)
        s.depth = std::max(s.depth, d);
    s.intrinsic_diameter = tree_diameter(c.from);
    const auto ext = extrinsic_extent(net, c.vertices);
    s.extrinsic_radius = ext.radius;
    s.extrinsic_diameter = ext.diameter;
    s.truncated = c.capped;
    for (VertexId v : c.vertices)
        if (mm.distance_to_sink(v) <= margin) {
            s.truncated = true;
            break;
        }
    return s;
}

PastSummary summarize_past(const MarginMap& mm, const OrientedForest& f, const ForestIndex& idx, VertexId v,
                           std::uint32_t margin)
{
    if (f.is_root(v))
        throw NetworkError("the past of a root is not defined");
    LocalCluster c;
    c.vertices.push_back(v);
    c.distance.push_back(0);
    c.from.push_back(kNoVertex);
    for (std::size_t i = 0; i < c.vertices.size(); ++i)
        for (auto it = idx.begin(c.vertices[i]); it != idx.end(c.vertices[i]); ++it) {
            c.vertices.push_back(*it);
            c.distance.push_back(c.distance[i] + 1);
            c.from.push_back(static_cast<std::uint32_t>(i));
        }
    return summarize_cluster(mm, c, margin);
}

PastSummary summarize_plain_tree(const PlainTree& t)
{
    std::vector<std::uint32_t> from(t.size());
    for (std::uint32_t v = 1; v < t.size(); ++v)
        from[v] = t.parent(v);
    PastSummary s;
    s.origin = 0;
    s.volume = t.size();
    s.depth = t.height();
    s.intrinsic_diameter = tree_diameter(from);
    s.extrinsic_radius = s.depth;
    s.extrinsic_diameter = s.intrinsic_diameter;
    s.truncated = t.capped;
    return s;
}

std::vector<VertexId> bulk_origins(const Network& net, std::size_t count)
{
    if (net.mode() != Mode::box)
        throw NetworkError("bulk origins need a wired box");
    const int S = net.side(), d = net.dimension();
    const int margin = (S + 3) / 4, step = std::max(1, S / 8);
    // distance_to_sink along an axis is min(x + 1, S - x).
    std::vector<int> axis;
    for (int x = margin - 1; x <= S - margin; x += step)
        axis.push_back(x);
    if (axis.empty()) {
        const int c[8] = {S / 2, S / 2, S / 2, S / 2, S / 2, S / 2, S / 2, S / 2};
        return {net.site(c)};
    }
    std::vector<std::vector<int>> cand;
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    while (true) {
        std::vector<int> x(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i)
            x[i] = axis[idx[i]];
        cand.push_back(std::move(x));
        int i = 0;
        for (; i < d; ++i) {
            if (++idx[i] < static_cast<int>(axis.size()))
                break;
            idx[i] = 0;
        }
        if (i == d)
            break;
    }
    auto l1 = [&](const std::vector<int>& a, const std::vector<int>& b) {
        int s = 0;
        for (int i = 0; i < d; ++i)
            s += std::abs(a[i] - b[i]);
        return s;
    };
    std::vector<int> center(static_cast<std::size_t>(d), S / 2);
    std::vector<int> dist(cand.size());
    std::size_t first = 0;
    for (std::size_t j = 0; j < cand.size(); ++j)
        if (l1(cand[j], center) < l1(cand[first], center))
            first = j;
    std::vector<VertexId> out;
    std::vector<char> used(cand.size(), 0);
    for (std::size_t j = 0; j < cand.size(); ++j)
        dist[j] = std::numeric_limits<int>::max();
    std::size_t next = first;
    while (out.size() < count && out.size() < cand.size()) {
        used[next] = 1;
        out.push_back(net.site(cand[next].data()));
        for (std::size_t j = 0; j < cand.size(); ++j)
            dist[j] = std::min(dist[j], l1(cand[j], cand[next]));
        int best = -1;
        for (std::size_t j = 0; j < cand.size(); ++j)
            if (!used[j] && dist[j] > best) {
                best = dist[j];
                next = j;
            }
        if (best < 0)
            break;
    }
    return out;
}

PlainTree cluster_tree(const LocalCluster& c)
{
    PlainTree t;
    for (std::size_t i = 1; i < c.vertices.size(); ++i)
        t.add_child(c.from[i]);
    t.capped = c.capped;
    t.finalize();
    return t;
}

PlainTree forest_ball_tree(const OrientedForest& f, const ForestIndex& idx, VertexId v, std::uint32_t n)
{
    PlainTree t;
    std::vector<VertexId> ids{v};
    std::vector<VertexId> came{kNoVertex};
    for (std::uint32_t i = 0; i < ids.size(); ++i) {
        if (t.depth(i) >= n)
            continue;
        const VertexId x = ids[i];
        auto visit = [&](VertexId y) {
            if (y == kNoVertex || y == came[i] || f.barrier.contains(y))
                return;
            t.add_child(i);
            ids.push_back(y);
            came.push_back(x);
        };
        visit(f.parent[x]);
        for (auto it = idx.begin(x); it != idx.end(x); ++it)
            visit(*it);
    }
    t.finalize();
    return t;
}

// ---------------------------------------------------------------------------

TailCurve::TailCurve(std::string field, std::vector<double> thresholds)
    : field_(std::move(field)),
      thresholds_(std::move(thresholds)),
      survivors_(thresholds_.size(), 0),
      ambiguous_(thresholds_.size(), 0),
      unit_sum_(thresholds_.size(), 0.0),
      unit_sq_(thresholds_.size(), 0.0)
{
}

void TailCurve::add_unit(const std::vector<double>& values, const std::vector<char>& truncated)
{
    if (values.empty())
        return;
    for (std::size_t i = 0; i < thresholds_.size(); ++i) {
        std::uint64_t s = 0, a = 0;
        for (std::size_t j = 0; j < values.size(); ++j) {
            if (values[j] >= thresholds_[i])
                ++s;
            else if (j < truncated.size() && truncated[j])
                ++a;
        }
        survivors_[i] += s;
        ambiguous_[i] += a;
        const double frac = static_cast<double>(s) / static_cast<double>(values.size());
        unit_sum_[i] += frac;
        unit_sq_[i] += frac * frac;
    }
    total_ += values.size();
    ++units_;
}

void TailCurve::merge(const TailCurve& other)
{
    if (other.units_ == 0)
        return;
    if (units_ == 0 && thresholds_.empty()) {
        *this = other;
        return;
    }
    if (other.thresholds_ != thresholds_)
        throw std::invalid_argument("merging tail curves with different thresholds");
    for (std::size_t i = 0; i < thresholds_.size(); ++i) {
        survivors_[i] += other.survivors_[i];
        ambiguous_[i] += other.ambiguous_[i];
        unit_sum_[i] += other.unit_sum_[i];
        unit_sq_[i] += other.unit_sq_[i];
    }
    total_ += other.total_;
    units_ += other.units_;
}

double TailCurve::probability(std::size_t i) const
{
    return total_ == 0 ? 0.0 : static_cast<double>(survivors_[i]) / static_cast<double>(total_);
}

double TailCurve::stderr_at(std::size_t i) const
{
    if (units_ >= 2) {
        const auto u = static_cast<double>(units_);
        const double var = std::max(0.0, (unit_sq_[i] - unit_sum_[i] * unit_sum_[i] / u) / (u - 1.0));
        return std::sqrt(var / u);
    }
    const double p = probability(i);
    return total_ == 0 ? 0.0 : std::sqrt(p * (1.0 - p) / static_cast<double>(total_));
}

double TailCurve::ambiguous_fraction(std::size_t i) const
{
    if (survivors_[i] == 0)
        return ambiguous_[i] == 0 ? 0.0 : 1.0;
    return static_cast<double>(ambiguous_[i]) / static_cast<double>(survivors_[i]);
}

void TailCurve::write_csv(std::ostream& os, bool header) const
{
    if (header)
        os << "field,R,survivors,total,p,stderr\n";
    for (std::size_t i = 0; i < thresholds_.size(); ++i)
        os << field_ << ',' << thresholds_[i] << ',' << survivors_[i] << ',' << total_ << ',' << probability(i) << ','
           << stderr_at(i) << '\n';
}

std::vector<double> dyadic_thresholds(double lo, double hi)
{
    std::vector<double> out;
    for (double r = lo; r <= hi * (1 + 1e-12); r *= 2)
        out.push_back(r);
    return out;
}

ExponentFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& y_stderr)
{
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n)
        throw InsufficientData("log-log fit needs at least two points");
    std::vector<double> lx(n), ly(n);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0) || !(y[i] > 0))
            throw InsufficientData("log-log fit needs positive data");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    ExponentFit f;
    f.points = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_min = *std::min_element(x.begin(), x.end());
    f.r_max = *std::max_element(x.begin(), x.end());
    if (n > 2) {
        double rss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = ly[i] - f.intercept - f.slope * lx[i];
            rss += r * r;
        }
        f.stderr_ = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    }
    if (y_stderr.size() == n) {
        double var = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = (lx[i] - mx) / sxx;
            const double rel = y_stderr[i] / y[i];
            var += w * w * rel * rel;
        }
        f.sampling_stderr = std::sqrt(var);
    }
    return f;
}

ExponentFit fit_exponent(const TailCurve& curve, double r_min, double r_max)
{
    std::vector<double> x, y, e;
    for (std::size_t i = 0; i < curve.thresholds().size(); ++i) {
        const double r = curve.thresholds()[i];
        if (r < r_min || r > r_max)
            continue;
        if (curve.survivors(i) < kMinSurvivors || curve.ambiguous_fraction(i) >= kMaxAmbiguous)
            continue;
        x.push_back(r);
        y.push_back(curve.probability(i));
        e.push_back(curve.stderr_at(i));
    }
    if (x.size() < 2)
        throw InsufficientData("fewer than two usable thresholds for field '" + curve.field() + "'");
    return fit_loglog(x, y, e);
}

// ---------------------------------------------------------------------------

std::vector<std::uint64_t> ball_volume_profile(const PlainTree& t, std::uint32_t n_max)
{
    std::vector<std::uint64_t> out(n_max + 1, 0);
    for (std::uint32_t v = 0; v < t.size(); ++v)
        if (t.depth(v) <= n_max)
            ++out[t.depth(v)];
    for (std::uint32_t n = 1; n <= n_max; ++n)
        out[n] += out[n - 1];
    return out;
}

std::vector<std::uint64_t> ball_volume_profile(const OrientedForest& f, const ForestIndex& idx, VertexId v,
                                               std::uint32_t n_max)
{
    return ball_volume_profile(forest_ball_tree(f, idx, v, n_max), n_max);
}

ResistanceReport effective_resistance_to_level(const PlainTree& t, std::uint32_t n)
{
    ResistanceReport rep;
    rep.lanes.assign(n + 1, 0);
    if (n == 0) {
        rep.resistance = 0.0;
        rep.conductance = std::numeric_limits<double>::infinity();
        rep.lanes[0] = 1;
        return rep;
    }
    const std::uint32_t size = t.size();
    // cond[u]: conductance from u down to level n through its subtree, in
    // units where each edge has resistance one; reach[u]: level n is below u.
    std::vector<double> res(size, 0.0);
    std::vector<double> cond(size, 0.0);
    std::vector<char> reach(size, 0);
    for (std::uint32_t u = size; u-- > 0;) {
        const std::uint32_t d = t.depth(u);
        if (d > n)
            continue;
        if (d == n) {
            reach[u] = 1;
            res[u] = 0.0;
        } else {
            double c = 0.0;
            for (auto it = t.children_begin(u); it != t.children_end(u); ++it)
                if (reach[*it]) {
                    c += 1.0 / (1.0 + res[*it]);
                    reach[u] = 1;
                }
            cond[u] = c;
            if (reach[u])
                res[u] = 1.0 / c;
        }
        if (reach[u])
            ++rep.lanes[d];
    }
    if (!reach[0])
        return rep; // infinite resistance
    rep.conductance = cond[0];
    rep.resistance = res[0];
    for (std::uint32_t k = 1; k <= n; ++k)
        if (rep.conductance > static_cast<double>(rep.lanes[k]) / k * (1.0 + 1e-12))
            rep.lemma_holds = false;
    return rep;
}

namespace {

std::uint32_t linf_from(const Network& net, const std::vector<int>& o, VertexId v)
{
    std::uint32_t best = 0;
    const auto x = net.coords(v);
    for (std::size_t i = 0; i < x.size(); ++i)
        best = std::max(best, static_cast<std::uint32_t>(std::abs(x[i] - o[i])));
    return best;
}

void check_pioneer_box(const Network& net, VertexId origin, int m)
{
    if (net.mode() != Mode::box)
        throw NetworkError("pioneer counting needs a lattice box");
    if (m < 1 || static_cast<std::uint32_t>(m) >= net.distance_to_sink(origin))
        throw NetworkError("Lambda_m must lie strictly inside the box");
}

// Breadth-first through the component of the origin, never leaving
// Lambda_m and never beyond intrinsic distance n.
template <class Children>
std::uint64_t count_pioneers(const Network& net, VertexId origin, int m, std::uint32_t n, Children children)
{
    const auto o = net.coords(origin);
    std::uint64_t count = 0;
    std::vector<std::pair<VertexId, std::uint32_t>> queue{{origin, 0}};
    std::vector<VertexId> kids;
    for (std::size_t i = 0; i < queue.size(); ++i) {
        const auto [x, d] = queue[i];
        if (d >= n)
            continue;
        kids.clear();
        children(x, kids);
        for (VertexId y : kids) {
            const auto r = linf_from(net, o, y);
            if (r > static_cast<std::uint32_t>(m))
                continue;
            if (r == static_cast<std::uint32_t>(m))
                ++count;
            queue.push_back({y, d + 1});
        }
    }
    return count;
}

} // namespace

std::uint64_t pioneer_count(const Network& net, const OrientedForest& f, const ForestIndex& idx, VertexId origin,
                            int m, std::uint32_t n)
{
    check_pioneer_box(net, origin, m);
    if (!f.is_root(origin))
        throw NetworkError("pioneer counting needs an origin-wired forest");
    return count_pioneers(net, origin, m, n, [&](VertexId x, std::vector<VertexId>& out) {
        out.insert(out.end(), idx.begin(x), idx.end(x));
    });
}

std::uint64_t pioneer_count(LocalWilson& lw, VertexId origin, int m, std::uint32_t n, RngStream& rng)
{
    check_pioneer_box(lw.network(), origin, m);
    if (!lw.roots().contains(origin))
        throw NetworkError("pioneer counting needs an origin-wired forest");
    return count_pioneers(lw.network(), origin, m, n,
                          [&](VertexId x, std::vector<VertexId>& out) { lw.children(x, rng, out); });
}

} // namespace usf
