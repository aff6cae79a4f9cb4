#include "usf/walk.hpp"

#include <cmath>

namespace usf {

std::vector<double> solve_dirichlet(const Network& net, const std::vector<char>& pinned,
                                    const std::vector<double>& pinned_value, const std::vector<double>& rhs,
                                    SolveReport* report, double tol)
{
    const std::size_t n = net.vertex_count();
    if (pinned.size() != n || pinned_value.size() != n || rhs.size() != n)
        throw SolveError("solve_dirichlet: vector sizes do not match the network");

    std::vector<double> x(n, 0.0);
    std::vector<double> b(n, 0.0);
    for (VertexId u = 0; u < n; ++u) {
        if (pinned[u]) {
            x[u] = pinned_value[u];
            continue;
        }
        double acc = rhs[u];
        for (Slot s = 0; s < net.degree(u); ++s) {
            const VertexId w = net.target(u, s);
            if (pinned[w])
                acc += net.conductance(u, s) * pinned_value[w];
        }
        b[u] = acc;
    }

    auto apply = [&](const std::vector<double>& p, std::vector<double>& out) {
        for (VertexId u = 0; u < n; ++u) {
            if (pinned[u]) {
                out[u] = 0.0;
                continue;
            }
            double acc = net.weight(u) * p[u];
            for (Slot s = 0; s < net.degree(u); ++s) {
                const VertexId w = net.target(u, s);
                if (!pinned[w])
                    acc -= net.conductance(u, s) * p[w];
            }
            out[u] = acc;
        }
    };
    auto dot = [&](const std::vector<double>& a, const std::vector<double>& c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            acc += a[i] * c[i];
        return acc;
    };

    const double bnorm = std::sqrt(dot(b, b));
    SolveReport rep;
    if (bnorm == 0.0) {
        if (report)
            *report = rep;
        return x;
    }

    // x starts at zero on free vertices, so r = b.
    std::vector<double> sol(n, 0.0);
    std::vector<double> r = b;
    std::vector<double> z(n), p(n), ap(n);
    for (VertexId u = 0; u < n; ++u)
        z[u] = pinned[u] ? 0.0 : r[u] / net.weight(u);
    p = z;
    double rz = dot(r, z);
    std::size_t free_count = 0;
    for (char c : pinned)
        free_count += c ? 0 : 1;
    const std::size_t max_iter = std::max<std::size_t>(1000, 20 * free_count);
    double rel = 1.0;
    std::size_t it = 0;
    for (; it < max_iter; ++it) {
        rel = std::sqrt(dot(r, r)) / bnorm;
        if (rel <= tol)
            break;
        apply(p, ap);
        const double alpha = rz / dot(p, ap);
        for (std::size_t i = 0; i < n; ++i) {
            sol[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for (VertexId u = 0; u < n; ++u)
            z[u] = pinned[u] ? 0.0 : r[u] / net.weight(u);
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i)
            p[i] = z[i] + beta * p[i];
    }
    // Recompute the true residual to guard against drift in the recurrence.
    apply(sol, ap);
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        res += (b[i] - ap[i]) * (b[i] - ap[i]);
    rel = std::sqrt(res) / bnorm;
    rep.iterations = it;
    rep.relative_residual = rel;
    if (report)
        *report = rep;
    if (!(rel <= 10.0 * tol))
        throw SolveError("Dirichlet solve did not converge: relative residual " + std::to_string(rel));
    for (VertexId u = 0; u < n; ++u)
        if (!pinned[u])
            x[u] = sol[u];
    return x;
}

std::vector<double> green_function(const Network& net, VertexId v, SolveReport* report)
{
    if (!net.has_sink())
        throw NetworkError("green_function needs a sink");
    if (v >= net.vertex_count() || net.is_sink(v))
        throw NetworkError("green_function: source must be a non-sink vertex");
    const std::size_t n = net.vertex_count();
    std::vector<char> pinned(n, 0);
    for (VertexId s : net.sinks())
        pinned[s] = 1;
    std::vector<double> zero(n, 0.0);
    std::vector<double> rhs(n, 0.0);
    rhs[v] = 1.0;
    // L f = e_v gives G(u, v) = c(v) f(u), hence G(v, u) = c(u) f(u).
    auto f = solve_dirichlet(net, pinned, zero, rhs, report);
    for (VertexId u = 0; u < n; ++u)
        f[u] *= net.weight(u);
    for (VertexId s : net.sinks())
        f[s] = 0.0;
    return f;
}

namespace {

void check_set(const Network& net, const std::vector<VertexId>& K)
{
    if (K.empty())
        throw NetworkError("capacity of an empty set");
    if (!net.has_sink())
        throw NetworkError("capacity needs a sink");
    for (VertexId u : K)
        if (u >= net.vertex_count() || net.is_sink(u))
            throw NetworkError("capacity set must consist of non-sink vertices");
}

// Effective conductance between K (potential 1) and the pinned-zero set.
double effective_conductance(const Network& net, const std::vector<VertexId>& K, const std::vector<char>& zero_set)
{
    const std::size_t n = net.vertex_count();
    std::vector<char> pinned = zero_set;
    std::vector<double> value(n, 0.0);
    for (VertexId u : K) {
        pinned[u] = 1;
        value[u] = 1.0;
    }
    std::vector<double> rhs(n, 0.0);
    const auto phi = solve_dirichlet(net, pinned, value, rhs);
    std::vector<VertexId> set = K;
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    double flow = 0.0;
    for (VertexId u : set)
        for (Slot s = 0; s < net.degree(u); ++s)
            flow += net.conductance(u, s) * (1.0 - phi[net.target(u, s)]);
    return flow;
}

} // namespace

double capacity(const Network& net, const std::vector<VertexId>& K)
{
    check_set(net, K);
    if (net.mode() == Mode::tree && K.size() == 1 && K[0] == 0) {
        // Root of a tree ball: escape is gambler's ruin along the distance.
        const int k = net.tree_degree();
        return k * (1.0 - tree_hit_before_sink(k, net.tree_radius() + 1));
    }
    std::vector<char> zero(net.vertex_count(), 0);
    for (VertexId s : net.sinks())
        zero[s] = 1;
    return effective_conductance(net, K, zero);
}

double capacity_v(const Network& net, VertexId v, const std::vector<VertexId>& K)
{
    check_set(net, K);
    if (v >= net.vertex_count() || net.is_sink(v))
        throw NetworkError("capacity_v: v must be a non-sink vertex");
    if (std::find(K.begin(), K.end(), v) != K.end())
        return capacity(net, K) + net.weight(v);
    std::vector<char> zero(net.vertex_count(), 0);
    for (VertexId s : net.sinks())
        zero[s] = 1;
    zero[v] = 1;
    return effective_conductance(net, K, zero);
}

double i_functional(const Network& net, const std::vector<VertexId>& A)
{
    check_set(net, A);
    double total = 0.0;
    for (VertexId u : A) {
        const auto g = green_function(net, u);
        for (VertexId w : A)
            total += net.weight(u) * net.weight(w) * g[w];
    }
    return total;
}

} // namespace usf
