#include "usf/forest.hpp"

namespace usf {

LocalWilson::LocalWilson(const Network& net, RootSet roots)
    : net_(net),
      roots_(std::move(roots)),
      stamp_(net.vertex_count(), 0),
      slot_(net.vertex_count(), 0),
      depth_(net.vertex_count(), 0),
      root_(net.vertex_count(), 0)
{
    if (roots_.empty())
        throw NetworkError("LocalWilson needs a nonempty root set");
    if (roots_.size() > 255)
        throw NetworkError("LocalWilson supports at most 255 roots");
    reset();
}

void LocalWilson::reset(RootSet roots)
{
    if (roots.empty() || roots.size() > 255)
        throw NetworkError("LocalWilson root set must have 1..255 vertices");
    roots_ = std::move(roots);
    reset();
}

void LocalWilson::reset()
{
    if (epoch_ >= 0xFFFFFFF0u) {
        std::fill(stamp_.begin(), stamp_.end(), 0);
        epoch_ = 0;
    }
    epoch_ += 2;
    for (std::size_t i = 0; i < roots_.size(); ++i) {
        const VertexId r = roots_[i];
        stamp_[r] = epoch_ + 1;
        depth_[r] = 0;
        root_[r] = static_cast<std::uint8_t>(i);
    }
}

void LocalWilson::attach(VertexId v, RngStream& rng)
{
    if (in_tree(v))
        return;
    VertexId x = v;
    std::uint64_t steps = 0;
    while (!in_tree(x)) {
        const Slot s = net_.sample_slot(x, rng);
        slot_[x] = s;
        x = net_.target(x, s);
        ++steps;
    }
    steps_ += steps;
    path_.clear();
    x = v;
    while (!in_tree(x)) {
        path_.push_back(x);
        x = net_.target(x, slot_[x]);
    }
    std::uint32_t d = depth_[x];
    const std::uint8_t r = root_[x];
    for (auto it = path_.rbegin(); it != path_.rend(); ++it) {
        stamp_[*it] = epoch_ + 1;
        depth_[*it] = ++d;
        root_[*it] = r;
    }
    attached_ += path_.size();
}

void LocalWilson::children(VertexId x, RngStream& rng, std::vector<VertexId>& out)
{
    const std::uint32_t deg = net_.degree(x);
    for (Slot s = 0; s < deg; ++s) {
        const VertexId w = net_.target(x, s);
        if (roots_.contains(w))
            continue;
        attach(w, rng);
        const Slot ps = slot_[w];
        if (net_.target(w, ps) == x && net_.reverse_slot(w, ps) == s)
            out.push_back(w);
    }
}

LocalCluster explore_past(LocalWilson& lw, VertexId v, RngStream& rng, std::uint32_t depth_cap,
                          std::size_t volume_cap)
{
    LocalCluster c;
    lw.attach(v, rng);
    c.vertices.push_back(v);
    c.distance.push_back(0);
    c.from.push_back(kNoVertex);
    std::vector<VertexId> kids;
    for (std::size_t i = 0; i < c.vertices.size(); ++i) {
        if (c.distance[i] >= depth_cap) {
            c.capped = true;
            continue;
        }
        if (c.vertices.size() >= volume_cap) {
            c.capped = true;
            break;
        }
        kids.clear();
        lw.children(c.vertices[i], rng, kids);
        for (VertexId w : kids) {
            c.vertices.push_back(w);
            c.distance.push_back(c.distance[i] + 1);
            c.from.push_back(static_cast<std::uint32_t>(i));
        }
    }
    return c;
}

LocalCluster explore_ball(LocalWilson& lw, VertexId v, std::uint32_t n, RngStream& rng, std::size_t volume_cap)
{
    const Network& net = lw.network();
    LocalCluster c;
    lw.attach(v, rng);
    c.vertices.push_back(v);
    c.distance.push_back(0);
    c.from.push_back(kNoVertex);
    // Membership of the ball: a tree path never revisits a vertex, so the
    // only way back into the ball is through the vertex we came from.
    auto came_from = [&](std::size_t i) { return i == 0 ? kNoVertex : c.vertices[c.from[i]]; };
    std::vector<VertexId> kids;
    for (std::size_t i = 0; i < c.vertices.size(); ++i) {
        const VertexId x = c.vertices[i];
        if (c.distance[i] >= n)
            continue;
        if (c.vertices.size() >= volume_cap) {
            c.capped = true;
            break;
        }
        const VertexId p = lw.parent(x);
        if (p != kNoVertex && p != came_from(i) && !net.is_sink(p)) {
            c.vertices.push_back(p);
            c.distance.push_back(c.distance[i] + 1);
            c.from.push_back(static_cast<std::uint32_t>(i));
        }
        kids.clear();
        lw.children(x, rng, kids);
        for (VertexId w : kids) {
            if (w == came_from(i))
                continue;
            c.vertices.push_back(w);
            c.distance.push_back(c.distance[i] + 1);
            c.from.push_back(static_cast<std::uint32_t>(i));
        }
    }
    return c;
}

} // namespace usf
