#include <stdexcept>

#include "usf/observe.hpp"

namespace usf {

std::vector<double> tree_even_returns(const PlainTree& t, std::uint32_t n_max)
{
    if (t.capped && t.height() < n_max + 1)
        throw std::invalid_argument("tree is cut too shallow for exact returns up to n_max");
    const std::uint32_t size = t.size();
    // Vertices are in breadth-first order, so the ball of radius m is a prefix.
    std::vector<std::uint32_t> prefix(n_max + 1, 0);
    for (std::uint32_t v = 0; v < size; ++v)
        if (t.depth(v) <= n_max)
            prefix[t.depth(v)] = v + 1;
    for (std::uint32_t m = 1; m <= n_max; ++m)
        prefix[m] = std::max(prefix[m], prefix[m - 1]);

    std::vector<double> inv_deg(prefix[n_max]);
    for (std::uint32_t v = 0; v < inv_deg.size(); ++v)
        inv_deg[v] = t.degree(v) == 0 ? 0.0 : 1.0 / t.degree(v);
    const double deg0 = t.degree(0);

    std::vector<double> out(n_max + 1, 0.0);
    std::vector<double> cur(prefix[n_max], 0.0), q(prefix[n_max], 0.0), next(prefix[n_max], 0.0);
    cur[0] = 1.0;
    for (std::uint32_t m = 0;; ++m) {
        const std::uint32_t live = prefix[m];
        double s = 0.0;
        for (std::uint32_t u = 0; u < live; ++u)
            s += cur[u] * cur[u] * inv_deg[u];
        out[m] = s * deg0;
        if (m == n_max)
            break;
        const std::uint32_t grow = prefix[m + 1];
        for (std::uint32_t u = 0; u < live; ++u)
            q[u] = cur[u] * inv_deg[u];
        for (std::uint32_t u = live; u < grow; ++u)
            q[u] = 0.0;
        next[0] = 0.0;
        for (std::uint32_t u = 1; u < grow; ++u)
            next[u] = q[t.parent(u)];
        for (std::uint32_t u = 1; u < grow; ++u)
            next[t.parent(u)] += q[u];
        std::swap(cur, next);
    }
    return out;
}

std::vector<std::uint32_t> tree_walk_max_displacement(const PlainTree& t, const std::vector<std::uint64_t>& checkpoints,
                                                      RngStream& rng)
{
    std::vector<std::uint32_t> out;
    out.reserve(checkpoints.size());
    std::uint32_t x = 0, best = 0;
    std::uint64_t step = 0;
    const std::uint32_t edge = t.height();
    for (std::uint64_t target : checkpoints) {
        for (; step < target; ++step) {
            const std::uint32_t deg = t.degree(x);
            if (deg == 0)
                break;
            const auto j = static_cast<std::uint32_t>(rng.below(deg));
            if (x != 0)
                x = j == 0 ? t.parent(x) : t.children_begin(x)[j - 1];
            else
                x = t.children_begin(x)[j];
            const std::uint32_t d = t.depth(x);
            if (d > best) {
                best = d;
                if (t.capped && d >= edge)
                    throw std::runtime_error("walk reached the cut of a truncated tree");
            }
        }
        out.push_back(best);
    }
    return out;
}

DimensionFit spectral_dimension(const std::vector<double>& even_returns, std::uint32_t n_lo, std::uint32_t n_hi)
{
    std::vector<double> x, y;
    for (std::uint64_t n = 1; n <= n_hi && n < even_returns.size(); n *= 2)
        if (n >= n_lo) {
            x.push_back(static_cast<double>(n));
            y.push_back(even_returns[n]);
        }
    DimensionFit d;
    d.fit = fit_loglog(x, y);
    d.value = -2.0 * d.fit.slope;
    return d;
}

DimensionFit volume_dimension(const std::vector<double>& n, const std::vector<double>& mean_volume)
{
    DimensionFit d;
    d.fit = fit_loglog(n, mean_volume);
    d.value = d.fit.slope;
    return d;
}

DimensionFit walk_dimension(const std::vector<double>& n, const std::vector<double>& mean_displacement)
{
    DimensionFit d;
    d.fit = fit_loglog(n, mean_displacement);
    d.value = 1.0 / d.fit.slope;
    return d;
}

} // namespace usf
