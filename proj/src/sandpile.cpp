#include "usf/sandpile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "usf/walk.hpp"

namespace usf {

namespace {

void require_unit(const Network& net)
{
    if (!net.unit_conductances())
        throw SandpileError("sandpiles need unit conductances");
    if (!net.has_sink())
        throw SandpileError("sandpiles need a sink");
}

constexpr std::uint64_t kToppleBudget = std::uint64_t{1} << 40;

// Topples until stable. `h(u)` returns a mutable height (fetched lazily if
// needed); `bump(u)` records one toppling of u.
template <class Height, class Bump>
std::uint64_t topple_all(const Network& net, VertexId seed, ToppleOrder order, RngStream* rng, Height&& h,
                         Bump&& bump, std::vector<VertexId>& pending, std::vector<char>& queued)
{
    std::uint64_t total = 0;
    pending.clear();
    h(seed) += 1;
    if (h(seed) >= static_cast<std::int32_t>(net.degree(seed))) {
        pending.push_back(seed);
        queued[seed] = 1;
    }
    std::size_t head = 0;
    while (head < pending.size()) {
        VertexId x;
        if (order == ToppleOrder::fifo) {
            x = pending[head++];
        } else {
            const std::size_t live = pending.size() - head;
            const std::size_t j = head + static_cast<std::size_t>(rng->below(live));
            std::swap(pending[j], pending[head]);
            x = pending[head++];
        }
        queued[x] = 0;
        const auto deg = static_cast<std::int32_t>(net.degree(x));
        auto& hx = h(x);
        if (hx < deg)
            continue;
        hx -= deg;
        bump(x);
        if (++total > kToppleBudget)
            throw SandpileError("toppling budget exceeded");
        for (Slot s = 0; s < static_cast<Slot>(deg); ++s) {
            const VertexId y = net.target(x, s);
            if (net.is_sink(y))
                continue;
            auto& hy = h(y);
            ++hy;
            if (hy >= static_cast<std::int32_t>(net.degree(y)) && !queued[y]) {
                queued[y] = 1;
                pending.push_back(y);
            }
        }
        if (h(x) >= deg && !queued[x]) {
            queued[x] = 1;
            pending.push_back(x);
        }
        // Compact the consumed prefix now and then.
        if (head > 4096 && head * 2 > pending.size()) {
            pending.erase(pending.begin(), pending.begin() + static_cast<std::ptrdiff_t>(head));
            head = 0;
        }
    }
    return total;
}

// Height from burning times, following the slot order (neighbor id, slot).
template <class Time>
std::int32_t burn_height(const Network& net, VertexId u, Slot parent_slot, Time&& t)
{
    const std::uint32_t tu = t(u);
    const VertexId p = net.target(u, parent_slot);
    std::int32_t below = 0, rank = 0;
    for (Slot s = 0; s < net.degree(u); ++s) {
        const VertexId w = net.target(u, s);
        const std::uint32_t tw = t(w);
        if (tw + 1 < tu) {
            ++below;
        } else if (tw + 1 == tu) {
            if (w < p || (w == p && s < parent_slot))
                ++rank;
        }
    }
    return static_cast<std::int32_t>(net.degree(u)) - below - 1 - rank;
}

} // namespace

bool is_stable(const Network& net, const SandpileConfig& c)
{
    for (VertexId v = 0; v < net.vertex_count(); ++v)
        if (!net.is_sink(v) && (c.height[v] < 0 || c.height[v] >= static_cast<std::int32_t>(net.degree(v))))
            return false;
    return true;
}

std::pair<SandpileConfig, Odometer> stabilize(const Network& net, const SandpileConfig& config, VertexId seed,
                                              ToppleOrder order, RngStream* rng)
{
    require_unit(net);
    if (net.is_sink(seed))
        throw SandpileError("grains must be added at a non-sink vertex");
    if (order == ToppleOrder::random && rng == nullptr)
        throw SandpileError("random toppling order needs a random stream");
    SandpileConfig out = config;
    Odometer odo;
    odo.topple_count.assign(net.vertex_count(), 0);
    std::vector<VertexId> pending;
    std::vector<char> queued(net.vertex_count(), 0);
    odo.av_size = topple_all(
        net, seed, order, rng, [&](VertexId u) -> std::int32_t& { return out.height[u]; },
        [&](VertexId u) {
            if (odo.topple_count[u] == std::numeric_limits<std::uint32_t>::max())
                throw SandpileError("odometer overflow");
            if (odo.topple_count[u]++ == 0)
                odo.avc.push_back(u);
        },
        pending, queued);
    std::sort(odo.avc.begin(), odo.avc.end());
    if (net.mode() != Mode::torus)
        odo.avc_extrinsic_diameter = extrinsic_diameter(net, odo.avc);
    out.stable = true;
    return {std::move(out), std::move(odo)};
}

bool conservation_holds(const Network& net, const SandpileConfig& initial, const SandpileConfig& final_config,
                        VertexId seed, const Odometer& odo)
{
    for (VertexId u = 0; u < net.vertex_count(); ++u) {
        if (net.is_sink(u))
            continue;
        std::int64_t expect = initial.height[u] + (u == seed ? 1 : 0);
        for (Slot s = 0; s < net.degree(u); ++s)
            expect += odo.topple_count[net.target(u, s)];
        expect -= static_cast<std::int64_t>(odo.topple_count[u]) * net.degree(u);
        if (expect != final_config.height[u])
            return false;
    }
    return true;
}

SandpileConfig tree_to_recurrent(const Network& net, const OrientedForest& tree)
{
    require_unit(net);
    if (tree.roots.vertices() != sink_roots(net).vertices())
        throw SandpileError("the burning bijection needs a forest rooted at the sinks");
    SandpileConfig c;
    c.height.assign(net.vertex_count(), 0);
    auto t = [&](VertexId w) { return tree.depth[w]; };
    for (VertexId u = 0; u < net.vertex_count(); ++u)
        if (!net.is_sink(u))
            c.height[u] = burn_height(net, u, tree.parent_slot[u], t);
    return c;
}

bool is_recurrent(const Network& net, const SandpileConfig& config, std::vector<std::uint32_t>* burn_time)
{
    require_unit(net);
    const std::size_t n = net.vertex_count();
    std::vector<std::uint32_t> time(n, kNoVertex);
    std::vector<std::uint32_t> burnt_edges(n, 0);
    std::vector<VertexId> round, next;
    for (VertexId s : net.sinks()) {
        time[s] = 0;
        round.push_back(s);
    }
    std::size_t burnt = round.size();
    for (std::uint32_t t = 0; !round.empty(); ++t) {
        next.clear();
        for (VertexId w : round)
            for (Slot s = 0; s < net.degree(w); ++s) {
                const VertexId u = net.target(w, s);
                if (time[u] != kNoVertex && time[u] <= t)
                    continue;
                ++burnt_edges[u];
                if (time[u] == kNoVertex &&
                    config.height[u] >= static_cast<std::int32_t>(net.degree(u) - burnt_edges[u])) {
                    time[u] = t + 1;
                    next.push_back(u);
                }
            }
        burnt += next.size();
        std::swap(round, next);
    }
    if (burn_time)
        *burn_time = time;
    return burnt == n;
}

OrientedForest recurrent_to_tree(const Network& net, const SandpileConfig& config)
{
    std::vector<std::uint32_t> time;
    if (!is_recurrent(net, config, &time))
        throw SandpileError("configuration is not recurrent");
    OrientedForest f;
    const std::size_t n = net.vertex_count();
    f.parent.assign(n, kNoVertex);
    f.parent_slot.assign(n, kNoVertex);
    f.depth = time;
    f.roots = sink_roots(net);
    f.barrier = f.roots;
    std::vector<std::pair<VertexId, Slot>> prev;
    for (VertexId u = 0; u < n; ++u) {
        if (net.is_sink(u))
            continue;
        std::int32_t below = 0;
        prev.clear();
        for (Slot s = 0; s < net.degree(u); ++s) {
            const VertexId w = net.target(u, s);
            if (time[w] + 1 < time[u])
                ++below;
            else if (time[w] + 1 == time[u])
                prev.push_back({w, s});
        }
        std::sort(prev.begin(), prev.end());
        const std::int32_t rank = static_cast<std::int32_t>(net.degree(u)) - below - 1 - config.height[u];
        if (rank < 0 || rank >= static_cast<std::int32_t>(prev.size()))
            throw SandpileError("burning produced an inconsistent rank");
        f.parent_slot[u] = prev[static_cast<std::size_t>(rank)].second;
        f.parent[u] = prev[static_cast<std::size_t>(rank)].first;
    }
    return f;
}

SandpileConfig uniform_recurrent_sample(const Network& net, RngStream& rng)
{
    return tree_to_recurrent(net, wilson_sample(net, sink_roots(net), rng));
}

// ---------------------------------------------------------------------------

LazySandpile::LazySandpile(const Network& net)
    : net_(net),
      lw_(net, sink_roots(net)),
      known_(net.vertex_count(), 0),
      base_(net.vertex_count(), 0),
      touched_stamp_(net.vertex_count(), 0),
      work_(net.vertex_count(), 0),
      count_(net.vertex_count(), 0),
      queued_(net.vertex_count(), 0)
{
    require_unit(net);
}

std::int32_t LazySandpile::height(VertexId u, RngStream& rng)
{
    if (known_[u] == epoch_)
        return base_[u];
    lw_.attach(u, rng);
    for (Slot s = 0; s < net_.degree(u); ++s)
        lw_.attach(net_.target(u, s), rng);
    auto t = [&](VertexId w) { return lw_.depth(w); };
    base_[u] = burn_height(net_, u, lw_.parent_slot(u), t);
    known_[u] = epoch_;
    return base_[u];
}

LazySandpile::Avalanche LazySandpile::avalanche(VertexId seed, RngStream& rng)
{
    if (net_.is_sink(seed))
        throw SandpileError("grains must be added at a non-sink vertex");
    if (++avalanche_epoch_ == 0) {
        std::fill(touched_stamp_.begin(), touched_stamp_.end(), 0);
        avalanche_epoch_ = 1;
    }
    Avalanche av;
    auto h = [&](VertexId u) -> std::int32_t& {
        if (touched_stamp_[u] != avalanche_epoch_) {
            touched_stamp_[u] = avalanche_epoch_;
            work_[u] = height(u, rng);
            count_[u] = 0;
        }
        return work_[u];
    };
    av.size = topple_all(
        net_, seed, ToppleOrder::fifo, nullptr, h,
        [&](VertexId u) {
            if (count_[u] == std::numeric_limits<std::uint32_t>::max())
                throw SandpileError("odometer overflow");
            if (count_[u]++ == 0)
                av.cluster.push_back(u);
        },
        pending_, queued_);
    av.counts.reserve(av.cluster.size());
    for (VertexId u : av.cluster)
        av.counts.push_back(count_[u]);
    return av;
}

AvalancheReport avalanche_statistics(const Network& net, const std::vector<VertexId>& origins, std::uint64_t M,
                                     std::uint32_t margin, const std::vector<double>& size_thresholds,
                                     const std::vector<double>& diameter_thresholds, RngStream& rng)
{
    AvalancheReport rep;
    rep.size = TailCurve("avalanche_size", size_thresholds);
    rep.cluster = TailCurve("avalanche_cluster", size_thresholds);
    rep.diameter = TailCurve("avalanche_diameter", diameter_thresholds);
    const MarginMap mm(net);
    LazySandpile pile(net);
    std::vector<double> sz, cl, dm;
    std::vector<char> tr;
    for (std::uint64_t i = 0; i < M; ++i) {
        pile.reset();
        sz.clear();
        cl.clear();
        dm.clear();
        tr.clear();
        for (VertexId o : origins) {
            const auto av = pile.avalanche(o, rng);
            AvalancheRecord r;
            r.sample = i;
            r.origin = o;
            r.size = av.size;
            r.cluster = av.cluster.size();
            r.diameter = extrinsic_diameter(net, av.cluster);
            for (VertexId u : av.cluster)
                if (mm.distance_to_sink(u) <= margin) {
                    r.truncated = true;
                    break;
                }
            sz.push_back(static_cast<double>(r.size));
            cl.push_back(static_cast<double>(r.cluster));
            dm.push_back(r.diameter);
            tr.push_back(r.truncated);
            rep.records.push_back(r);
        }
        rep.size.add_unit(sz, tr);
        rep.cluster.add_unit(cl, tr);
        rep.diameter.add_unit(dm, tr);
    }
    return rep;
}

DharReport dhar_check(const Network& net, VertexId v, std::uint64_t M, RngStream& rng)
{
    require_unit(net);
    const auto green = green_function(net, v);
    const std::size_t n = net.vertex_count();
    std::vector<double> sum(n, 0.0), sq(n, 0.0);
    for (std::uint64_t i = 0; i < M; ++i) {
        const auto cfg = uniform_recurrent_sample(net, rng);
        const auto [after, odo] = stabilize(net, cfg, v);
        for (VertexId u : odo.avc) {
            const double c = odo.topple_count[u];
            sum[u] += c;
            sq[u] += c * c;
        }
    }
    DharReport rep;
    rep.samples = M;
    rep.passed = true;
    const auto m = static_cast<double>(M);
    for (VertexId u = 0; u < n; ++u) {
        if (net.is_sink(u))
            continue;
        DharEntry e;
        e.u = u;
        e.mean = sum[u] / m;
        e.stderr_ = M > 1 ? std::sqrt(std::max(0.0, (sq[u] - sum[u] * sum[u] / m) / (m - 1)) / m) : 0.0;
        e.green = green[u];
        e.expected = green[u] / net.degree(u);
        const double diff = std::abs(e.mean - e.expected);
        const double z = e.stderr_ > 0 ? diff / e.stderr_ : (diff < 1e-12 ? 0.0 : std::numeric_limits<double>::infinity());
        rep.worst_z = std::max(rep.worst_z, z);
        if (z > 3.0)
            rep.passed = false;
        rep.entries.push_back(e);
    }
    return rep;
}

} // namespace usf
