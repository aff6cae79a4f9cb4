#include "usf/walk.hpp"

#include <cmath>

namespace usf {

namespace {

// One step of the sink-killed Markov operator: q = p P restricted to sites.
void kernel_step(const Network& net, const std::vector<double>& p, std::vector<double>& q)
{
    std::fill(q.begin(), q.end(), 0.0);
    const auto n = static_cast<VertexId>(net.vertex_count());
    for (VertexId u = 0; u < n; ++u) {
        const double mass = p[u];
        if (mass == 0.0 || net.is_sink(u))
            continue;
        const double scale = mass / net.weight(u);
        const std::uint32_t deg = net.degree(u);
        for (Slot s = 0; s < deg; ++s) {
            const VertexId w = net.target(u, s);
            if (!net.is_sink(w))
                q[w] += scale * net.conductance(u, s);
        }
    }
}

// p_m(0, 0) for the simple walk on the cycle Z_S, m = 0..N.
std::vector<long double> cycle_returns(int S, int N)
{
    std::vector<long double> p(S, 0.0L), q(S);
    p[0] = 1.0L;
    std::vector<long double> out(N + 1);
    out[0] = 1.0L;
    for (int m = 1; m <= N; ++m) {
        std::fill(q.begin(), q.end(), 0.0L);
        for (int x = 0; x < S; ++x) {
            q[(x + 1) % S] += 0.5L * p[x];
            q[(x + S - 1) % S] += 0.5L * p[x];
        }
        std::swap(p, q);
        out[m] = p[0];
    }
    return out;
}

// Returns of the unit-conductance torus: a d-dimensional walk splits its
// steps multinomially among the axes, so
// p_n = n! d^{-n} [x^n] (sum_m q_m x^m / m!)^d with q the cycle returns.
std::vector<double> torus_returns(int d, int S, int N)
{
    const auto q = cycle_returns(S, N);
    std::vector<long double> a(N + 1);
    long double fact = 1.0L;
    for (int m = 0; m <= N; ++m) {
        if (m > 0)
            fact *= m;
        a[m] = q[m] / fact;
    }
    std::vector<long double> b = a;
    for (int rep = 1; rep < d; ++rep) {
        std::vector<long double> c(N + 1, 0.0L);
        for (int i = 0; i <= N; ++i) {
            if (b[i] == 0.0L)
                continue;
            for (int j = 0; i + j <= N; ++j)
                c[i + j] += b[i] * a[j];
        }
        b.swap(c);
    }
    std::vector<double> out(N + 1);
    long double scale = 1.0L; // n! / d^n
    for (int n = 0; n <= N; ++n) {
        if (n > 0)
            scale *= static_cast<long double>(n) / d;
        out[n] = static_cast<double>(scale * b[n]);
    }
    return out;
}

// Distance-from-root chain of the k-regular tree; level `absorb` (if >= 0)
// is the wired sink.
std::vector<double> tree_distance_chain_returns(int k, int N, int absorb)
{
    const int levels = absorb >= 0 ? absorb : N + 1;
    std::vector<double> p(levels + 1, 0.0), q(levels + 1);
    p[0] = 1.0;
    std::vector<double> out(N + 1);
    out[0] = 1.0;
    const double down = 1.0 / k;
    const double up = 1.0 - down;
    for (int n = 1; n <= N; ++n) {
        std::fill(q.begin(), q.end(), 0.0);
        q[1] += p[0];
        for (int j = 1; j < levels; ++j) {
            q[j - 1] += down * p[j];
            if (j + 1 < levels || absorb < 0)
                q[j + 1] += up * p[j];
        }
        std::swap(p, q);
        out[n] = p[0];
    }
    return out;
}

} // namespace

std::vector<std::vector<double>> heat_kernel(const Network& net, VertexId v, int T, std::size_t memory_budget)
{
    if (T < 0)
        throw NetworkError("heat kernel horizon must be nonnegative");
    const std::size_t need = (static_cast<std::size_t>(T) + 2) * net.vertex_count() * sizeof(double);
    if (need > memory_budget)
        throw NetworkError("heat kernel needs " + std::to_string(need) + " bytes, budget is " +
                           std::to_string(memory_budget));
    std::vector<std::vector<double>> out;
    out.reserve(T + 1);
    std::vector<double> p(net.vertex_count(), 0.0);
    p[v] = 1.0;
    out.push_back(p);
    std::vector<double> q(net.vertex_count());
    for (int n = 1; n <= T; ++n) {
        kernel_step(net, out.back(), q);
        out.push_back(q);
    }
    return out;
}

std::vector<double> regular_tree_return_probabilities(int k, int N)
{
    return tree_distance_chain_returns(k, N, -1);
}

std::vector<double> regular_tree_sup_kernel(int k, int N)
{
    std::vector<double> p(N + 2, 0.0), q(N + 2);
    p[0] = 1.0;
    std::vector<double> out(N + 1);
    out[0] = 1.0;
    const double down = 1.0 / k;
    const double up = 1.0 - down;
    for (int n = 1; n <= N; ++n) {
        std::fill(q.begin(), q.end(), 0.0);
        q[1] += p[0];
        for (int j = 1; j <= n; ++j) {
            q[j - 1] += down * p[j];
            q[j + 1] += up * p[j];
        }
        std::swap(p, q);
        double best = p[0];
        double count = k;
        for (int j = 1; j <= n; ++j) {
            best = std::max(best, p[j] / count);
            count *= (k - 1);
        }
        out[n] = best;
    }
    return out;
}

std::vector<double> return_probabilities(const Network& net, VertexId v, int N)
{
    if (N < 0)
        throw NetworkError("return horizon must be nonnegative");
    if (net.mode() == Mode::torus && net.unit_conductances())
        return torus_returns(net.dimension(), net.side(), N);
    if (net.mode() == Mode::tree && v == 0)
        return tree_distance_chain_returns(net.tree_degree(), N, net.tree_radius() + 1);
    std::vector<double> p(net.vertex_count(), 0.0), q(net.vertex_count());
    p[v] = 1.0;
    std::vector<double> out(N + 1);
    out[0] = 1.0;
    for (int n = 1; n <= N; ++n) {
        kernel_step(net, p, q);
        std::swap(p, q);
        out[n] = p[v];
    }
    return out;
}

double weight_ratio(const Network& net)
{
    if (net.mode() != Mode::generic)
        return 1.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (VertexId v = 0; v < net.vertex_count(); ++v) {
        if (net.is_sink(v))
            continue;
        lo = std::min(lo, net.weight(v));
        hi = std::max(hi, net.weight(v));
    }
    return hi / lo;
}

BubbleReport bubble_from_returns(const std::vector<double>& returns, double ratio)
{
    BubbleReport r;
    r.weight_ratio = ratio;
    double acc = 0.0;
    for (std::size_t n = 0; n < returns.size(); ++n) {
        acc += static_cast<double>(n + 1) * returns[n];
        r.partial_sums.push_back(acc);
    }
    const std::size_t N = returns.size() - 1;
    r.alpha = 4.0 * ratio * acc;
    if (N >= 4) {
        const double late = r.partial_sums[N] - r.partial_sums[N / 2];
        const double early = r.partial_sums[N / 2] - r.partial_sums[N / 4];
        r.growth_ratio = early > 0.0 ? late / early : 0.0;
        r.diverged = r.growth_ratio >= kBubbleGrowthThreshold;
    }
    return r;
}

BubbleReport bubble_diagram(const Network& net, VertexId v, int N)
{
    return bubble_from_returns(return_probabilities(net, v, N), weight_ratio(net));
}

} // namespace usf
