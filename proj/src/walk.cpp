#include "usf/walk.hpp"

#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace usf {

namespace {

bool in_sorted(const std::vector<VertexId>& set, VertexId v)
{
    return std::binary_search(set.begin(), set.end(), v);
}

} // namespace

WalkPath run_walk(const Network& net, VertexId start, const StopRule& stop, RngStream& rng)
{
    if (start >= net.vertex_count())
        throw NetworkError("walk start out of range");
    std::vector<VertexId> set = stop.set;
    std::sort(set.begin(), set.end());

    WalkPath path;
    path.vertices.push_back(start);
    auto fired = [&](VertexId x, std::uint64_t t) {
        switch (stop.kind) {
        case StopKind::hit_set:
            return in_sorted(set, x);
        case StopKind::hit_sink:
            return net.is_sink(x);
        case StopKind::revisit_set:
            return t >= 1 && in_sorted(set, x);
        case StopKind::budget:
            return false;
        }
        return false;
    };
    if (stop.kind == StopKind::hit_sink && !net.has_sink())
        throw NetworkError("hit-sink rule on a network without sink");

    VertexId x = start;
    for (std::uint64_t t = 0;; ++t) {
        if (fired(x, t)) {
            path.stopped = true;
            return path;
        }
        if (t >= stop.budget) {
            path.stopped = stop.kind == StopKind::budget;
            return path;
        }
        if (net.degree(x) == 0)
            throw NetworkError("walk reached a vertex without edges");
        const Slot s = net.sample_slot(x, rng);
        x = net.target(x, s);
        path.slots.push_back(s);
        path.vertices.push_back(x);
    }
}

std::size_t LoopDecomposition::rho(std::size_t n) const
{
    auto it = std::upper_bound(ell.begin(), ell.end(), n);
    return static_cast<std::size_t>(it - ell.begin()) - 1;
}

LoopDecomposition loop_erase(const WalkPath& path)
{
    LoopDecomposition out;
    const auto& w = path.vertices;
    if (w.empty())
        return out;
    std::unordered_map<VertexId, std::size_t> last;
    last.reserve(w.size());
    for (std::size_t m = 0; m < w.size(); ++m)
        last[w[m]] = m;

    std::size_t l = 0;
    out.ell.push_back(0);
    out.erased.vertices.push_back(w[0]);
    while (true) {
        const std::size_t next = last[w[l]] + 1;
        if (next >= w.size())
            break;
        out.ell.push_back(next);
        out.erased.slots.push_back(path.slots[next - 1]);
        out.erased.vertices.push_back(w[next]);
        l = next;
    }
    out.erased.stopped = path.stopped;
    return out;
}

std::vector<std::uint64_t> regular_tree_loop_times(int k, std::size_t n, RngStream& rng, int horizon)
{
    if (k < 3)
        throw NetworkError("tree degree must be at least 3");
    std::vector<std::uint64_t> last(n + 1, 0);
    const std::size_t target = n + 1 + static_cast<std::size_t>(horizon);
    std::size_t depth = 0;
    std::uint64_t t = 0;
    const auto kk = static_cast<std::uint32_t>(k);
    while (depth < target) {
        if (depth <= n)
            last[depth] = t;
        if (depth == 0 || rng.below(kk) != 0)
            ++depth;
        else
            --depth;
        ++t;
    }
    std::vector<std::uint64_t> ell(n + 2);
    ell[0] = 0;
    for (std::size_t j = 0; j <= n; ++j)
        ell[j + 1] = last[j] + 1;
    return ell;
}

McEstimate capacity_mc(const Network& net, const std::vector<VertexId>& K, std::uint64_t walks_per_vertex,
                       RngStream& rng)
{
    if (K.empty())
        throw NetworkError("capacity of an empty set");
    if (!net.has_sink())
        throw NetworkError("capacity needs a sink");
    std::vector<VertexId> set = K;
    std::sort(set.begin(), set.end());
    McEstimate est;
    double var = 0.0;
    for (VertexId u : set) {
        if (net.is_sink(u))
            throw NetworkError("capacity set meets the sink");
        std::uint64_t escapes = 0;
        for (std::uint64_t i = 0; i < walks_per_vertex; ++i) {
            VertexId x = net.target(u, net.sample_slot(u, rng));
            while (!net.is_sink(x) && !in_sorted(set, x))
                x = net.target(x, net.sample_slot(x, rng));
            escapes += net.is_sink(x) ? 1 : 0;
        }
        const double p = static_cast<double>(escapes) / static_cast<double>(walks_per_vertex);
        const double c = net.weight(u);
        est.value += c * p;
        var += c * c * p * (1.0 - p) / static_cast<double>(walks_per_vertex);
        est.samples += walks_per_vertex;
    }
    est.stderr_ = std::sqrt(var);
    return est;
}

McEstimate cap_k(const Network& net, const std::vector<VertexId>& A, const std::vector<VertexId>& B,
                 std::uint64_t k, std::uint64_t walks_per_vertex, RngStream& rng)
{
    if (A.empty())
        throw NetworkError("cap_k of an empty set");
    if (!net.has_sink())
        throw NetworkError("cap_k needs a sink");
    std::vector<VertexId> set = B;
    std::sort(set.begin(), set.end());
    McEstimate est;
    double var = 0.0;
    for (VertexId v : A) {
        const double c = net.weight(v);
        est.samples += walks_per_vertex;
        if (k <= 1) {
            est.value += c;
            continue;
        }
        std::uint64_t survive = 0;
        for (std::uint64_t i = 0; i < walks_per_vertex; ++i) {
            VertexId x = v;
            bool ok = true;
            for (std::uint64_t t = 1; t < k; ++t) {
                x = net.target(x, net.sample_slot(x, rng));
                if (net.is_sink(x))
                    break;
                if (in_sorted(set, x)) {
                    ok = false;
                    break;
                }
            }
            survive += ok ? 1 : 0;
        }
        const double p = static_cast<double>(survive) / static_cast<double>(walks_per_vertex);
        est.value += c * p;
        var += c * c * p * (1.0 - p) / static_cast<double>(walks_per_vertex);
    }
    est.stderr_ = std::sqrt(var);
    return est;
}

McEstimate estimate_q(const Network& net, VertexId v, std::uint64_t pairs, RngStream& rng)
{
    if (!net.has_sink() || net.is_sink(v))
        throw NetworkError("estimate_q needs a non-sink start on a network with a sink");
    std::unordered_set<VertexId> trace;
    std::uint64_t good = 0;
    for (std::uint64_t i = 0; i < pairs; ++i) {
        trace.clear();
        bool ok = true;
        VertexId x = v;
        while (true) {
            x = net.target(x, net.sample_slot(x, rng));
            if (net.is_sink(x))
                break;
            if (x == v) {
                ok = false;
                break;
            }
            trace.insert(x);
        }
        if (ok) {
            VertexId y = v;
            while (true) {
                y = net.target(y, net.sample_slot(y, rng));
                if (net.is_sink(y))
                    break;
                if (y == v || trace.count(y)) {
                    ok = false;
                    break;
                }
            }
        }
        good += ok ? 1 : 0;
    }
    McEstimate est;
    est.samples = pairs;
    est.value = static_cast<double>(good) / static_cast<double>(pairs);
    est.stderr_ = std::sqrt(est.value * (1.0 - est.value) / static_cast<double>(pairs));
    return est;
}

McEstimate estimate_L_r(const Network& net, VertexId v, std::uint32_t r, std::uint64_t walks, RngStream& rng)
{
    if (!net.has_sink() || net.is_sink(v))
        throw NetworkError("estimate_L_r needs a non-sink start on a network with a sink");
    if (net.mode() == Mode::box && 4 * r > static_cast<std::uint32_t>(net.side()))
        throw NetworkError("estimate_L_r: radius exceeds a quarter of the box side");
    double sum = 0.0;
    double sum2 = 0.0;
    for (std::uint64_t i = 0; i < walks; ++i) {
        VertexId x = v;
        std::uint64_t last = 0;
        for (std::uint64_t t = 1;; ++t) {
            x = net.target(x, net.sample_slot(x, rng));
            if (net.is_sink(x))
                break;
            if (graph_distance(net, x, v) <= r)
                last = t;
        }
        const auto l = static_cast<double>(last);
        sum += l;
        sum2 += l * l;
    }
    McEstimate est;
    est.samples = walks;
    const auto n = static_cast<double>(walks);
    est.value = sum / n;
    const double var = walks > 1 ? (sum2 - sum * sum / n) / (n - 1.0) : 0.0;
    est.stderr_ = std::sqrt(std::max(var, 0.0) / n);
    return est;
}

double tree_hit_before_sink(int k, int levels)
{
    if (levels <= 1)
        return 0.0;
    const double r = 1.0 / static_cast<double>(k - 1);
    const double rn = std::pow(r, levels);
    return (r - rn) / (1.0 - rn);
}

} // namespace usf
