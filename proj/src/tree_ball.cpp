#include "usf/tree_ball.hpp"

#include <stdexcept>

#include "usf/walk.hpp"

namespace usf {

void PlainTree::reset()
{
    parent_.assign(1, kNoParent);
    depth_.assign(1, 0);
    offset_.clear();
    kids_.clear();
    capped = false;
}

std::uint32_t PlainTree::add_child(std::uint32_t p)
{
    parent_.push_back(p);
    depth_.push_back(depth_[p] + 1);
    return static_cast<std::uint32_t>(parent_.size() - 1);
}

void PlainTree::finalize()
{
    const std::size_t n = parent_.size();
    offset_.assign(n + 1, 0);
    for (std::size_t v = 1; v < n; ++v)
        ++offset_[parent_[v] + 1];
    for (std::size_t v = 0; v < n; ++v)
        offset_[v + 1] += offset_[v];
    kids_.resize(offset_[n]);
    std::vector<std::uint32_t> fill(offset_.begin(), offset_.end() - 1);
    for (std::size_t v = 1; v < n; ++v)
        kids_[fill[parent_[v]]++] = static_cast<std::uint32_t>(v);
}

namespace {

std::vector<double> hit_table(const RadialParams& p)
{
    if (p.k < 3 || p.radius < 1)
        throw std::invalid_argument("radial sampler needs k >= 3 and radius >= 1");
    std::vector<double> h(static_cast<std::size_t>(p.radius) + 1);
    for (int level = 0; level <= p.radius; ++level)
        h[level] = tree_hit_before_sink(p.k, p.radius + 1 - level);
    return h;
}

// Breadth-first growth. `spine_len` > 0 adds a distinguished chain from the
// root (the future ray) of that many edges; candidates(v, on_spine) gives
// the number of off-spine candidate children of v.
template <class Candidates>
PlainTree grow(const RadialParams& p, RngStream& rng, std::uint32_t spine_len, Candidates candidates)
{
    const auto h = hit_table(p);
    PlainTree t;
    std::vector<char> spine{spine_len > 0 ? char(1) : char(0)};
    for (std::uint32_t i = 0; i < t.size(); ++i) {
        const std::uint32_t d = t.depth(i);
        if (d >= p.depth_cap) {
            t.capped = true;
            continue;
        }
        if (t.size() >= p.volume_cap) {
            t.capped = true;
            break;
        }
        if (d >= static_cast<std::uint32_t>(p.radius))
            continue; // leaves of the ball have only sink slots below them
        if (spine[i] && d < spine_len) {
            t.add_child(i);
            spine.push_back(1);
        }
        const int c = candidates(i, spine[i] != 0);
        for (int j = 0; j < c; ++j)
            if (rng.uniform() < h[d]) {
                t.add_child(i);
                spine.push_back(0);
            }
    }
    t.finalize();
    return t;
}

int sample_offspring(const std::vector<double>& pmf, RngStream& rng)
{
    double u = rng.uniform();
    for (std::size_t j = 0; j + 1 < pmf.size(); ++j) {
        if (u < pmf[j])
            return static_cast<int>(j);
        u -= pmf[j];
    }
    return static_cast<int>(pmf.size()) - 1;
}

} // namespace

PlainTree sample_tree_past(const RadialParams& p, RngStream& rng)
{
    return grow(p, rng, 0, [&](std::uint32_t, bool) { return p.k - 1; });
}

PlainTree sample_tree_wired_component(const RadialParams& p, RngStream& rng)
{
    return grow(p, rng, 0, [&](std::uint32_t v, bool) { return v == 0 ? p.k : p.k - 1; });
}

PlainTree sample_tree_component(const RadialParams& p, RngStream& rng)
{
    const auto spine = static_cast<std::uint32_t>(p.radius);
    return grow(p, rng, spine, [&](std::uint32_t v, bool on_spine) {
        if (v == 0)
            return p.k - 1;
        return on_spine ? p.k - 2 : p.k - 1;
    });
}

std::vector<double> binary_critical_offspring()
{
    return {0.25, 0.5, 0.25};
}

PlainTree kesten_tree_sample(std::uint32_t depth, const std::vector<double>& offspring, RngStream& rng,
                             std::uint32_t volume_cap)
{
    // Size-biased law: P(j) = j p_j / mean.
    double mean = 0.0;
    for (std::size_t j = 0; j < offspring.size(); ++j)
        mean += static_cast<double>(j) * offspring[j];
    std::vector<double> biased(offspring.size());
    for (std::size_t j = 0; j < offspring.size(); ++j)
        biased[j] = static_cast<double>(j) * offspring[j] / mean;

    PlainTree t;
    std::vector<char> spine{1};
    for (std::uint32_t i = 0; i < t.size(); ++i) {
        if (t.depth(i) >= depth) {
            t.capped = true;
            continue;
        }
        if (t.size() >= volume_cap) {
            t.capped = true;
            break;
        }
        if (spine[i]) {
            const int n = sample_offspring(biased, rng);
            t.add_child(i);
            spine.push_back(1);
            for (int j = 1; j < n; ++j) {
                t.add_child(i);
                spine.push_back(0);
            }
        } else {
            const int n = sample_offspring(offspring, rng);
            for (int j = 0; j < n; ++j) {
                t.add_child(i);
                spine.push_back(0);
            }
        }
    }
    t.finalize();
    return t;
}

PlainTree galton_watson_sample(std::uint32_t depth, const std::vector<double>& offspring, RngStream& rng,
                               std::uint32_t volume_cap)
{
    PlainTree t;
    for (std::uint32_t i = 0; i < t.size(); ++i) {
        if (t.depth(i) >= depth) {
            t.capped = true;
            continue;
        }
        if (t.size() >= volume_cap) {
            t.capped = true;
            break;
        }
        const int n = sample_offspring(offspring, rng);
        for (int j = 0; j < n; ++j)
            t.add_child(i);
    }
    t.finalize();
    return t;
}

} // namespace usf
