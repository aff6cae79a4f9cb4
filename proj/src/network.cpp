#include "usf/network.hpp"

#include <cmath>
#include <deque>
#include <istream>
#include <numeric>
#include <sstream>

namespace usf {

RootSet::RootSet(std::vector<VertexId> vs) : vs_(std::move(vs))
{
    std::sort(vs_.begin(), vs_.end());
    vs_.erase(std::unique(vs_.begin(), vs_.end()), vs_.end());
}

int RootSet::index_of(VertexId v) const
{
    auto it = std::lower_bound(vs_.begin(), vs_.end(), v);
    if (it == vs_.end() || *it != v)
        return -1;
    return static_cast<int>(it - vs_.begin());
}

Network Network::lattice_box(const LatticeSpec& spec)
{
    if (spec.dimension < 1 || spec.dimension > kMaxDimension)
        throw NetworkError("lattice dimension out of range");
    if (spec.side < 2)
        throw NetworkError("lattice side must be at least 2");
    if (!spec.axis_conductance.empty() &&
        spec.axis_conductance.size() != static_cast<std::size_t>(spec.dimension))
        throw NetworkError("axis conductance table must have one entry per axis");
    for (double c : spec.axis_conductance)
        if (!(c > 0.0) || !std::isfinite(c))
            throw NetworkError("conductances must be positive and finite");

    Network net;
    net.mode_ = spec.boundary == Boundary::wired ? Mode::box : Mode::torus;
    net.dim_ = spec.dimension;
    net.side_ = spec.side;

    // Need S^d + 1 ids below kNoVertex.
    unsigned __int128 sites = 1;
    for (int i = 0; i < spec.dimension; ++i) {
        sites *= static_cast<unsigned>(spec.side);
        if (sites >= kNoVertex)
            throw NetworkError("lattice box too large: S^d overflows the vertex index");
    }
    const auto n = static_cast<std::uint32_t>(sites);
    std::uint32_t st = 1;
    for (int i = spec.dimension - 1; i >= 0; --i) {
        net.stride_[i] = st;
        st *= static_cast<std::uint32_t>(spec.side);
    }
    net.face_size_ = n / static_cast<std::uint32_t>(spec.side);

    net.axis_c_ = spec.axis_conductance;
    if (net.axis_c_.empty())
        net.axis_c_.assign(spec.dimension, 1.0);
    net.unit_ = std::all_of(net.axis_c_.begin(), net.axis_c_.end(), [](double c) { return c == 1.0; });
    net.axis_cum_.resize(2 * spec.dimension);
    double acc = 0.0;
    for (int s = 0; s < 2 * spec.dimension; ++s) {
        acc += net.axis_c_[s / 2];
        net.axis_cum_[s] = acc;
    }

    if (net.mode_ == Mode::box) {
        net.vertex_count_ = static_cast<std::size_t>(n) + 1;
        net.sinks_ = {n};
        const std::uint64_t sd = 2ULL * spec.dimension * net.face_size_;
        if (sd >= kNoVertex)
            throw NetworkError("lattice box too large: sink degree overflows");
        net.sink_degree_ = static_cast<std::uint32_t>(sd);
    } else {
        net.vertex_count_ = n;
    }
    return net;
}

Network Network::regular_tree_ball(int degree, int radius)
{
    if (degree < 3)
        throw NetworkError("tree degree must be at least 3");
    if (radius < 1)
        throw NetworkError("tree radius must be at least 1");
    Network net;
    net.mode_ = Mode::tree;
    net.tree_k_ = degree;
    net.tree_r_ = radius;
    net.level_start_.push_back(0);
    net.level_start_.push_back(1);
    unsigned __int128 width = static_cast<unsigned>(degree);
    unsigned __int128 next = 1;
    for (int level = 1; level <= radius; ++level) {
        next += width;
        if (next + 1 >= kNoVertex)
            throw NetworkError("tree ball too large for the vertex index");
        net.level_start_.push_back(static_cast<VertexId>(next));
        width *= static_cast<unsigned>(degree - 1);
    }
    const VertexId n = net.level_start_.back();
    const std::uint64_t leaves = n - net.level_start_[radius];
    net.vertex_count_ = static_cast<std::size_t>(n) + 1;
    net.sinks_ = {n};
    net.sink_degree_ = static_cast<std::uint32_t>(leaves * static_cast<std::uint64_t>(degree - 1));
    return net;
}

Network Network::from_edges(std::size_t vertex_count, const std::vector<EdgeRecord>& edges,
                            std::vector<VertexId> sinks)
{
    if (vertex_count == 0 || vertex_count >= kNoVertex)
        throw NetworkError("vertex count out of range");
    Network net;
    net.mode_ = Mode::generic;
    net.vertex_count_ = vertex_count;
    std::sort(sinks.begin(), sinks.end());
    sinks.erase(std::unique(sinks.begin(), sinks.end()), sinks.end());
    net.sink_flag_.assign(vertex_count, 0);
    for (VertexId s : sinks) {
        if (s >= vertex_count)
            throw NetworkError("sink id out of range");
        net.sink_flag_[s] = 1;
    }
    net.sinks_ = std::move(sinks);

    std::vector<std::uint32_t> deg(vertex_count, 0);
    for (const auto& e : edges) {
        if (e.u >= vertex_count || e.w >= vertex_count)
            throw NetworkError("edge endpoint out of range");
        if (e.u == e.w)
            throw NetworkError("self-loops are not supported");
        if (!(e.conductance > 0.0) || !std::isfinite(e.conductance))
            throw NetworkError("conductances must be positive and finite");
        ++deg[e.u];
        ++deg[e.w];
    }
    net.offsets_.assign(vertex_count + 1, 0);
    for (std::size_t v = 0; v < vertex_count; ++v)
        net.offsets_[v + 1] = net.offsets_[v] + deg[v];
    const std::size_t m = net.offsets_.back();
    net.targets_.resize(m);
    net.cond_.resize(m);
    net.rev_.resize(m);
    std::vector<std::uint32_t> fill(vertex_count, 0);
    net.unit_ = true;
    for (const auto& e : edges) {
        const Slot su = fill[e.u]++;
        const Slot sw = fill[e.w]++;
        net.targets_[net.offsets_[e.u] + su] = e.w;
        net.targets_[net.offsets_[e.w] + sw] = e.u;
        net.cond_[net.offsets_[e.u] + su] = e.conductance;
        net.cond_[net.offsets_[e.w] + sw] = e.conductance;
        net.rev_[net.offsets_[e.u] + su] = sw;
        net.rev_[net.offsets_[e.w] + sw] = su;
        if (e.conductance != 1.0)
            net.unit_ = false;
    }
    net.weight_.assign(vertex_count, 0.0);
    net.cum_.resize(m);
    for (std::size_t v = 0; v < vertex_count; ++v) {
        double acc = 0.0;
        for (std::size_t i = net.offsets_[v]; i < net.offsets_[v + 1]; ++i) {
            acc += net.cond_[i];
            net.cum_[i] = acc;
        }
        net.weight_[v] = acc;
    }
    for (std::size_t v = 0; v < vertex_count; ++v)
        if (deg[v] == 0 && vertex_count > 1)
            throw NetworkError("isolated vertex " + std::to_string(v));
    auto dist = bfs_distances(net, 0, true);
    for (auto d : dist)
        if (d == kNoVertex)
            throw NetworkError("graph is disconnected");
    return net;
}

double Network::conductance(VertexId v, Slot s) const
{
    switch (mode_) {
    case Mode::box:
    case Mode::torus:
        if (v == sink())
            return axis_c_[s / face_size_ / 2];
        return axis_c_[s >> 1];
    case Mode::tree:
        return 1.0;
    case Mode::generic:
        return cond_[offsets_[v] + s];
    }
    return 0.0;
}

VertexId Network::sink_slot_site(Slot s) const
{
    const std::uint32_t face = s / face_size_;
    const std::uint32_t j = s % face_size_;
    const int axis = static_cast<int>(face >> 1);
    const std::uint32_t st = stride_[axis];
    const std::uint32_t x = (face & 1u) == 0 ? static_cast<std::uint32_t>(side_) - 1 : 0;
    return (j / st) * st * static_cast<std::uint32_t>(side_) + x * st + j % st;
}

Slot Network::reverse_slot(VertexId v, Slot s) const
{
    switch (mode_) {
    case Mode::box:
    case Mode::torus: {
        if (v == sink())
            return s / face_size_;
        const VertexId w = lattice_target(v, s);
        if (w == sink() && mode_ == Mode::box) {
            const int axis = static_cast<int>(s >> 1);
            const std::uint32_t st = stride_[axis];
            const std::uint32_t j = (v / (st * static_cast<std::uint32_t>(side_))) * st + v % st;
            return s * face_size_ + j;
        }
        return s ^ 1u;
    }
    case Mode::tree: {
        const auto k = static_cast<std::uint32_t>(tree_k_);
        if (v == sink())
            return 1 + s % (k - 1);
        if (v == 0)
            return 0;
        if (s == 0)
            return v <= k ? v - 1 : 1 + (v - k - 1) % (k - 1);
        if (v >= level_start_[tree_r_])
            return (v - level_start_[tree_r_]) * (k - 1) + (s - 1);
        return 0;
    }
    case Mode::generic:
        return rev_[offsets_[v] + s];
    }
    return 0;
}

double Network::weight(VertexId v) const
{
    switch (mode_) {
    case Mode::box:
    case Mode::torus: {
        double c = 2.0 * std::accumulate(axis_c_.begin(), axis_c_.end(), 0.0);
        return v == sink() ? c * face_size_ : c;
    }
    case Mode::tree:
        return static_cast<double>(degree(v));
    case Mode::generic:
        return weight_[v];
    }
    return 0.0;
}

Slot Network::sample_weighted_slot(VertexId v, RngStream& rng) const
{
    if (mode_ == Mode::generic) {
        const double* first = cum_.data() + offsets_[v];
        const double* last = cum_.data() + offsets_[v + 1];
        const double u = rng.uniform() * weight_[v];
        const double* it = std::upper_bound(first, last, u);
        if (it == last)
            --it;
        return static_cast<Slot>(it - first);
    }
    // Weighted lattice: choose the axis direction, then (for the sink) the face position.
    const double u = rng.uniform() * axis_cum_.back();
    auto it = std::upper_bound(axis_cum_.begin(), axis_cum_.end(), u);
    if (it == axis_cum_.end())
        --it;
    const auto dir = static_cast<Slot>(it - axis_cum_.begin());
    if (v == sink())
        return dir * face_size_ + rng.below(face_size_);
    return dir;
}

void Network::coords(VertexId v, int* x) const
{
    for (int i = 0; i < dim_; ++i)
        x[i] = static_cast<int>((v / stride_[i]) % static_cast<std::uint32_t>(side_));
}

std::vector<int> Network::coords(VertexId v) const
{
    std::vector<int> x(dim_);
    coords(v, x.data());
    return x;
}

VertexId Network::site(const int* x) const
{
    VertexId v = 0;
    for (int i = 0; i < dim_; ++i) {
        if (x[i] < 0 || x[i] >= side_)
            throw NetworkError("lattice coordinate out of range");
        v += static_cast<VertexId>(x[i]) * stride_[i];
    }
    return v;
}

int Network::tree_level(VertexId v) const
{
    if (v == sink())
        return tree_r_ + 1;
    auto it = std::upper_bound(level_start_.begin(), level_start_.end(), v);
    return static_cast<int>(it - level_start_.begin()) - 1;
}

VertexId Network::tree_parent(VertexId v) const
{
    if (v == 0 || v == sink())
        return kNoVertex;
    return tree_target(v, 0);
}

std::uint32_t Network::distance_to_sink(VertexId v) const
{
    if (!has_sink())
        throw NetworkError("network has no sink");
    if (is_sink(v))
        return 0;
    switch (mode_) {
    case Mode::box: {
        std::uint32_t best = kNoVertex;
        for (int i = 0; i < dim_; ++i) {
            const auto x = (v / stride_[i]) % static_cast<std::uint32_t>(side_);
            best = std::min({best, x + 1, static_cast<std::uint32_t>(side_) - x});
        }
        return best;
    }
    case Mode::tree:
        return static_cast<std::uint32_t>(tree_r_ + 1 - tree_level(v));
    default: {
        // Multi-source BFS from the sinks.
        std::vector<std::uint32_t> dist(vertex_count_, kNoVertex);
        std::deque<VertexId> q;
        for (VertexId s : sinks_) {
            dist[s] = 0;
            q.push_back(s);
        }
        while (!q.empty()) {
            const VertexId x = q.front();
            q.pop_front();
            if (x == v)
                return dist[x];
            for (Slot s = 0; s < degree(x); ++s) {
                const VertexId y = target(x, s);
                if (dist[y] == kNoVertex) {
                    dist[y] = dist[x] + 1;
                    q.push_back(y);
                }
            }
        }
        return dist[v];
    }
    }
}

std::string Network::describe() const
{
    std::ostringstream os;
    switch (mode_) {
    case Mode::box:
    case Mode::torus:
        os << (mode_ == Mode::box ? "box" : "torus") << " d=" << dim_ << " S=" << side_;
        if (!unit_) {
            os << " c=";
            for (std::size_t i = 0; i < axis_c_.size(); ++i)
                os << (i ? "," : "") << axis_c_[i];
        }
        break;
    case Mode::tree:
        os << "tree k=" << tree_k_ << " R=" << tree_r_;
        break;
    case Mode::generic:
        os << "generic n=" << vertex_count_ << " m=" << targets_.size() / 2;
        break;
    }
    return os.str();
}

RootSet merge_with_sink(const Network& net, VertexId v)
{
    if (!net.has_sink())
        throw NetworkError("merge_with_sink needs a network with a sink");
    if (v >= net.vertex_count())
        throw NetworkError("vertex out of range");
    if (net.is_sink(v))
        throw NetworkError("vertex is already a sink");
    std::vector<VertexId> roots = net.sinks();
    roots.push_back(v);
    return RootSet(std::move(roots));
}

RootSet sink_roots(const Network& net)
{
    return RootSet(net.sinks());
}

std::uint32_t graph_distance(const Network& net, VertexId u, VertexId w)
{
    if (u >= net.vertex_count() || w >= net.vertex_count())
        throw NetworkError("vertex out of range");
    if (net.is_sink(u) || net.is_sink(w))
        throw NetworkError("graph_distance is undefined at a sink");
    if (u == w)
        return 0;
    switch (net.mode()) {
    case Mode::box:
    case Mode::torus: {
        std::uint32_t d = 0;
        const auto S = static_cast<std::uint32_t>(net.side());
        for (int i = 0; i < net.dimension(); ++i) {
            const auto a = (u / net.stride(i)) % S;
            const auto b = (w / net.stride(i)) % S;
            std::uint32_t diff = a > b ? a - b : b - a;
            if (net.mode() == Mode::torus)
                diff = std::min(diff, S - diff);
            d += diff;
        }
        return d;
    }
    case Mode::tree: {
        int lu = net.tree_level(u);
        int lw = net.tree_level(w);
        std::uint32_t d = 0;
        while (lu > lw) {
            u = net.tree_parent(u);
            --lu;
            ++d;
        }
        while (lw > lu) {
            w = net.tree_parent(w);
            --lw;
            ++d;
        }
        while (u != w) {
            u = net.tree_parent(u);
            w = net.tree_parent(w);
            d += 2;
        }
        return d;
    }
    case Mode::generic:
        return bfs_distances(net, u)[w];
    }
    return kNoVertex;
}

std::vector<std::uint32_t> bfs_distances(const Network& net, VertexId src, bool through_sinks)
{
    std::vector<std::uint32_t> dist(net.vertex_count(), kNoVertex);
    std::deque<VertexId> q;
    dist[src] = 0;
    q.push_back(src);
    while (!q.empty()) {
        const VertexId x = q.front();
        q.pop_front();
        if (x != src && net.is_sink(x) && !through_sinks)
            continue;
        for (Slot s = 0; s < net.degree(x); ++s) {
            const VertexId y = net.target(x, s);
            if (dist[y] == kNoVertex) {
                dist[y] = dist[x] + 1;
                q.push_back(y);
            }
        }
    }
    if (!through_sinks)
        for (VertexId s : net.sinks())
            if (s != src)
                dist[s] = kNoVertex;
    return dist;
}

Network parse_edge_list(std::istream& in)
{
    std::vector<EdgeRecord> edges;
    std::vector<VertexId> sinks;
    std::string line;
    std::size_t lineno = 0;
    VertexId max_id = 0;
    bool any = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first))
            continue;
        if (first == "sinks:") {
            long long id;
            while (ls >> id) {
                if (id < 0 || id >= static_cast<long long>(kNoVertex))
                    throw NetworkError("line " + std::to_string(lineno) + ": bad sink id");
                sinks.push_back(static_cast<VertexId>(id));
                max_id = std::max(max_id, static_cast<VertexId>(id));
                any = true;
            }
            continue;
        }
        long long u, w;
        double c = 0.0;
        try {
            u = std::stoll(first);
        } catch (const std::exception&) {
            throw NetworkError("line " + std::to_string(lineno) + ": expected `u w conductance`");
        }
        if (!(ls >> w >> c))
            throw NetworkError("line " + std::to_string(lineno) + ": expected `u w conductance`");
        std::string extra;
        if (ls >> extra)
            throw NetworkError("line " + std::to_string(lineno) + ": trailing tokens");
        if (u < 0 || w < 0 || u >= static_cast<long long>(kNoVertex) || w >= static_cast<long long>(kNoVertex))
            throw NetworkError("line " + std::to_string(lineno) + ": vertex id out of range");
        edges.push_back({static_cast<VertexId>(u), static_cast<VertexId>(w), c});
        max_id = std::max({max_id, static_cast<VertexId>(u), static_cast<VertexId>(w)});
        any = true;
    }
    if (!any)
        throw NetworkError("empty edge list");
    return Network::from_edges(static_cast<std::size_t>(max_id) + 1, edges, std::move(sinks));
}

std::string check_network(const Network& net)
{
    const std::size_t n = net.vertex_count();
    for (VertexId v = 0; v < n; ++v) {
        double sum = 0.0;
        for (Slot s = 0; s < net.degree(v); ++s) {
            const VertexId w = net.target(v, s);
            const double c = net.conductance(v, s);
            if (w >= n)
                return "slot target out of range at vertex " + std::to_string(v);
            if (!(c > 0.0) || !std::isfinite(c))
                return "non-positive conductance at vertex " + std::to_string(v);
            const Slot r = net.reverse_slot(v, s);
            if (r >= net.degree(w) || net.target(w, r) != v || net.reverse_slot(w, r) != s ||
                net.conductance(w, r) != c)
                return "asymmetric slot pair at vertex " + std::to_string(v);
            sum += c;
        }
        if (std::abs(sum - net.weight(v)) > 1e-9 * std::max(1.0, sum))
            return "vertex weight mismatch at " + std::to_string(v);
    }
    auto dist = bfs_distances(net, 0, true);
    for (auto d : dist)
        if (d == kNoVertex)
            return "graph is disconnected";
    return {};
}

} // namespace usf
