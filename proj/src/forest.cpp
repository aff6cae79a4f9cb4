#include "usf/forest.hpp"

#include <cmath>
#include <deque>

namespace usf {

namespace {

OrientedForest blank_forest(const Network& net, const RootSet& roots)
{
    if (roots.empty())
        throw NetworkError("root set must be nonempty");
    OrientedForest f;
    const std::size_t n = net.vertex_count();
    f.parent.assign(n, kNoVertex);
    f.parent_slot.assign(n, kNoVertex);
    f.depth.assign(n, 0);
    f.roots = roots;
    f.barrier = sink_roots(net);
    for (VertexId r : roots)
        if (r >= n)
            throw NetworkError("root out of range");
    return f;
}

void fill_depths(OrientedForest& f)
{
    const std::size_t n = f.size();
    std::vector<char> done(n, 0);
    std::vector<VertexId> stack;
    for (VertexId r : f.roots) {
        f.depth[r] = 0;
        done[r] = 1;
    }
    for (VertexId v = 0; v < n; ++v) {
        VertexId x = v;
        while (!done[x]) {
            stack.push_back(x);
            x = f.parent[x];
        }
        std::uint32_t d = f.depth[x];
        while (!stack.empty()) {
            f.depth[stack.back()] = ++d;
            done[stack.back()] = 1;
            stack.pop_back();
        }
    }
}

} // namespace

std::string check_forest(const Network& net, const OrientedForest& f)
{
    const std::size_t n = net.vertex_count();
    if (f.size() != n)
        return "forest size does not match the network";
    for (VertexId v = 0; v < n; ++v) {
        if (f.roots.contains(v)) {
            if (f.parent[v] != kNoVertex)
                return "root " + std::to_string(v) + " has a parent";
            if (f.depth[v] != 0)
                return "root " + std::to_string(v) + " has nonzero depth";
            continue;
        }
        if (f.parent[v] == kNoVertex)
            return "non-root vertex " + std::to_string(v) + " has no parent";
        if (f.parent_slot[v] >= net.degree(v) || net.target(v, f.parent_slot[v]) != f.parent[v])
            return "parent edge of " + std::to_string(v) + " is not a network edge";
        if (f.depth[v] != f.depth[f.parent[v]] + 1)
            return "depth mismatch at " + std::to_string(v);
    }
    // Depth strictly decreases along parent pointers, so following parents
    // from any vertex reaches a root in depth(v) steps; nothing else to check.
    return {};
}

std::vector<VertexId> breadth_first_order(const Network& net, const RootSet& roots,
                                          const std::vector<VertexId>& origins)
{
    const std::size_t n = net.vertex_count();
    std::vector<char> seen(n, 0);
    std::vector<VertexId> order;
    order.reserve(n);
    std::deque<VertexId> q;
    for (VertexId o : origins)
        if (!seen[o] && !roots.contains(o)) {
            seen[o] = 1;
            q.push_back(o);
        }
    auto drain = [&]() {
        while (!q.empty()) {
            const VertexId x = q.front();
            q.pop_front();
            order.push_back(x);
            for (Slot s = 0; s < net.degree(x); ++s) {
                const VertexId w = net.target(x, s);
                if (!seen[w] && !roots.contains(w)) {
                    seen[w] = 1;
                    q.push_back(w);
                }
            }
        }
    };
    drain();
    for (VertexId v = 0; v < n; ++v)
        if (!seen[v] && !roots.contains(v)) {
            seen[v] = 1;
            q.push_back(v);
            drain();
        }
    return order;
}

OrientedForest wilson_sample(const Network& net, const RootSet& roots, const std::vector<VertexId>& order,
                             RngStream& rng)
{
    OrientedForest f = blank_forest(net, roots);
    const std::size_t n = net.vertex_count();
    std::vector<char> in_tree(n, 0);
    for (VertexId r : roots)
        in_tree[r] = 1;
    std::vector<Slot> next(n, 0);
    for (VertexId u : order) {
        if (u >= n)
            throw NetworkError("order vertex out of range");
        if (in_tree[u])
            continue;
        // Overwriting next[] on revisits erases loops chronologically.
        VertexId x = u;
        while (!in_tree[x]) {
            const Slot s = net.sample_slot(x, rng);
            next[x] = s;
            x = net.target(x, s);
        }
        x = u;
        while (!in_tree[x]) {
            in_tree[x] = 1;
            f.parent_slot[x] = next[x];
            f.parent[x] = net.target(x, next[x]);
            x = f.parent[x];
        }
    }
    for (VertexId v = 0; v < n; ++v)
        if (!in_tree[v])
            throw NetworkError("Wilson order does not cover vertex " + std::to_string(v));
    f.order = order;
    fill_depths(f);
    return f;
}

OrientedForest wilson_sample(const Network& net, const RootSet& roots, RngStream& rng)
{
    std::vector<VertexId> order;
    order.reserve(net.vertex_count());
    for (VertexId v = 0; v < net.vertex_count(); ++v)
        if (!roots.contains(v))
            order.push_back(v);
    return wilson_sample(net, roots, order, rng);
}

OrientedForest aldous_broder_sample(const Network& net, const RootSet& roots, RngStream& rng,
                                    std::uint64_t step_budget)
{
    OrientedForest f = blank_forest(net, roots);
    const std::size_t n = net.vertex_count();
    std::vector<char> seen(n, 0);
    std::size_t remaining = 0;
    for (VertexId v = 0; v < n; ++v) {
        if (roots.contains(v))
            seen[v] = 1;
        else
            ++remaining;
    }
    std::vector<double> root_cum;
    double acc = 0.0;
    for (VertexId r : roots) {
        acc += net.weight(r);
        root_cum.push_back(acc);
    }
    auto leave_roots = [&](VertexId& from, Slot& slot) {
        const double u = rng.uniform() * acc;
        auto it = std::upper_bound(root_cum.begin(), root_cum.end(), u);
        if (it == root_cum.end())
            --it;
        from = roots[static_cast<std::size_t>(it - root_cum.begin())];
        slot = net.sample_slot(from, rng);
    };

    bool at_root = true;
    VertexId x = roots[0];
    for (std::uint64_t t = 0; remaining > 0; ++t) {
        if (t >= step_budget)
            throw NetworkError("Aldous-Broder step budget exhausted before cover");
        VertexId from = x;
        Slot s = 0;
        if (at_root)
            leave_roots(from, s);
        else
            s = net.sample_slot(x, rng);
        const VertexId w = net.target(from, s);
        if (roots.contains(w)) {
            at_root = true;
            x = w;
            continue;
        }
        if (!seen[w]) {
            seen[w] = 1;
            --remaining;
            f.parent[w] = from;
            f.parent_slot[w] = net.reverse_slot(from, s);
        }
        at_root = false;
        x = w;
    }
    fill_depths(f);
    return f;
}

ForestIndex::ForestIndex(const OrientedForest& f)
{
    const std::size_t n = f.size();
    offset_.assign(n + 1, 0);
    for (VertexId v = 0; v < n; ++v)
        if (f.parent[v] != kNoVertex)
            ++offset_[f.parent[v] + 1];
    for (std::size_t v = 0; v < n; ++v)
        offset_[v + 1] += offset_[v];
    list_.resize(offset_[n]);
    std::vector<std::uint32_t> fill(offset_.begin(), offset_.end() - 1);
    for (VertexId v = 0; v < n; ++v)
        if (f.parent[v] != kNoVertex)
            list_[fill[f.parent[v]]++] = v;
    root_.assign(n, kNoVertex);
    std::vector<VertexId> stack;
    for (VertexId r : f.roots) {
        root_[r] = r;
        stack.push_back(r);
        while (!stack.empty()) {
            const VertexId x = stack.back();
            stack.pop_back();
            for (auto it = begin(x); it != end(x); ++it) {
                root_[*it] = r;
                stack.push_back(*it);
            }
        }
    }
}

std::vector<VertexId> past_of(const OrientedForest& f, const ForestIndex& idx, VertexId v)
{
    if (f.roots.contains(v))
        throw NetworkError("past_of is undefined at a root");
    std::vector<VertexId> out{v};
    for (std::size_t i = 0; i < out.size(); ++i)
        for (auto it = idx.begin(out[i]); it != idx.end(out[i]); ++it)
            out.push_back(*it);
    return out;
}

std::vector<VertexId> past_of(const OrientedForest& f, VertexId v)
{
    return past_of(f, ForestIndex(f), v);
}

WalkPath future_of(const OrientedForest& f, VertexId v)
{
    WalkPath p;
    p.vertices.push_back(v);
    while (f.parent[v] != kNoVertex) {
        p.slots.push_back(f.parent_slot[v]);
        v = f.parent[v];
        p.vertices.push_back(v);
    }
    p.stopped = true;
    return p;
}

IntrinsicBall intrinsic_ball(const OrientedForest& f, const ForestIndex& idx, VertexId v, std::uint32_t n)
{
    IntrinsicBall b;
    std::vector<char> seen(f.size(), 0);
    b.vertices.push_back(v);
    b.distance.push_back(0);
    seen[v] = 1;
    for (std::size_t i = 0; i < b.vertices.size(); ++i) {
        const VertexId x = b.vertices[i];
        const std::uint32_t d = b.distance[i];
        if (d == n) {
            b.shell.push_back(x);
            continue;
        }
        auto visit = [&](VertexId y) {
            if (seen[y] || f.barrier.contains(y))
                return;
            seen[y] = 1;
            b.vertices.push_back(y);
            b.distance.push_back(d + 1);
        };
        if (f.parent[x] != kNoVertex)
            visit(f.parent[x]);
        for (auto it = idx.begin(x); it != idx.end(x); ++it)
            visit(*it);
    }
    return b;
}

IntrinsicBall intrinsic_ball(const OrientedForest& f, VertexId v, std::uint32_t n)
{
    return intrinsic_ball(f, ForestIndex(f), v, n);
}

std::vector<VertexId> component_of(const OrientedForest& f, VertexId v)
{
    ForestIndex idx(f);
    const VertexId r = idx.root_of(v);
    std::vector<VertexId> out;
    for (VertexId u = 0; u < f.size(); ++u)
        if (idx.root_of(u) == r)
            out.push_back(u);
    return out;
}

std::vector<WeightedForest> enumerate_spanning_structures(const Network& net, const RootSet& roots)
{
    if (roots.empty())
        throw NetworkError("root set must be nonempty");
    std::vector<VertexId> free;
    for (VertexId v = 0; v < net.vertex_count(); ++v)
        if (!roots.contains(v))
            free.push_back(v);
    if (free.size() > kEnumerationCap)
        throw NetworkError("enumeration is capped at " + std::to_string(kEnumerationCap) + " non-root vertices");

    const std::size_t n = net.vertex_count();
    std::vector<Slot> slot(n, kNoVertex);
    std::vector<VertexId> parent(n, kNoVertex);
    std::vector<WeightedForest> out;

    auto creates_cycle = [&](VertexId x) {
        VertexId y = parent[x];
        for (std::size_t guard = 0; guard <= free.size(); ++guard) {
            if (y == x)
                return true;
            if (y == kNoVertex || roots.contains(y))
                return false;
            y = parent[y];
        }
        return true;
    };

    auto recurse = [&](auto&& self, std::size_t i, double weight) -> void {
        if (i == free.size()) {
            out.push_back({slot, weight});
            return;
        }
        const VertexId x = free[i];
        for (Slot s = 0; s < net.degree(x); ++s) {
            slot[x] = s;
            parent[x] = net.target(x, s);
            if (!creates_cycle(x))
                self(self, i + 1, weight * net.conductance(x, s));
        }
        slot[x] = kNoVertex;
        parent[x] = kNoVertex;
    };
    recurse(recurse, 0, 1.0);
    return out;
}

OrientedForest to_forest(const Network& net, const RootSet& roots, const WeightedForest& w)
{
    OrientedForest f = blank_forest(net, roots);
    for (VertexId v = 0; v < net.vertex_count(); ++v) {
        if (roots.contains(v))
            continue;
        f.parent_slot[v] = w.parent_slot[v];
        f.parent[v] = net.target(v, w.parent_slot[v]);
    }
    fill_depths(f);
    return f;
}

Rational matrix_tree_determinant(const Network& net, const RootSet& roots)
{
    std::vector<VertexId> free;
    std::vector<int> index(net.vertex_count(), -1);
    for (VertexId v = 0; v < net.vertex_count(); ++v)
        if (!roots.contains(v)) {
            index[v] = static_cast<int>(free.size());
            free.push_back(v);
        }
    const std::size_t m = free.size();
    std::vector<std::vector<Rational>> a(m, std::vector<Rational>(m, Rational(0)));
    for (std::size_t i = 0; i < m; ++i) {
        const VertexId u = free[i];
        for (Slot s = 0; s < net.degree(u); ++s) {
            const Rational c(net.conductance(u, s));
            a[i][i] += c;
            const int j = index[net.target(u, s)];
            if (j >= 0)
                a[i][j] -= c;
        }
    }
    Rational det(1);
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        while (piv < m && a[piv][col] == 0)
            ++piv;
        if (piv == m)
            return Rational(0);
        if (piv != col) {
            std::swap(a[piv], a[col]);
            det = -det;
        }
        det *= a[col][col];
        for (std::size_t r = col + 1; r < m; ++r) {
            if (a[r][col] == 0)
                continue;
            const Rational factor = a[r][col] / a[col][col];
            for (std::size_t c = col; c < m; ++c)
                a[r][c] -= factor * a[col][c];
        }
    }
    return det;
}

std::vector<Slot> forest_key(const OrientedForest& f)
{
    std::vector<Slot> key(f.size());
    for (VertexId v = 0; v < f.size(); ++v)
        key[v] = f.parent[v] == kNoVertex ? kNoVertex : f.parent_slot[v];
    return key;
}

} // namespace usf
