#pragma once

// Independent reference computations for the unit tests. Everything here is
// dense linear algebra or brute force over edge subsets, deliberately
// sharing no code paths with the library beyond the Network accessors.

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "usf/network.hpp"

namespace oracle {

using usf::Network;
using usf::Slot;
using usf::VertexId;

// Transition matrix restricted to the non-sink vertices, with index maps.
struct Reduced {
    std::vector<VertexId> ids;    // reduced index -> vertex
    std::vector<int> pos;         // vertex -> reduced index or -1
    Eigen::MatrixXd P;
};

inline Reduced reduced(const Network& net)
{
    Reduced r;
    r.pos.assign(net.vertex_count(), -1);
    for (VertexId v = 0; v < net.vertex_count(); ++v)
        if (!net.is_sink(v)) {
            r.pos[v] = static_cast<int>(r.ids.size());
            r.ids.push_back(v);
        }
    const auto n = static_cast<Eigen::Index>(r.ids.size());
    r.P = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const VertexId v = r.ids[static_cast<std::size_t>(i)];
        for (Slot s = 0; s < net.degree(v); ++s) {
            const VertexId w = net.target(v, s);
            if (r.pos[w] >= 0)
                r.P(i, r.pos[w]) += net.conductance(v, s) / net.weight(v);
        }
    }
    return r;
}

// Expected visits G(v, .) before absorption at the sinks: (I - P)^{-1}.
inline std::vector<double> green(const Network& net, VertexId v)
{
    const auto r = reduced(net);
    const auto n = r.P.rows();
    const Eigen::MatrixXd G = (Eigen::MatrixXd::Identity(n, n) - r.P).inverse();
    std::vector<double> out(net.vertex_count(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j)
        out[r.ids[static_cast<std::size_t>(j)]] = G(r.pos[v], j);
    return out;
}

// P_u(walk started at u hits `targets` at some time >= 1 before the sinks),
// by first-step analysis with a dense solve for the hitting probabilities.
inline double return_probability(const Network& net, VertexId u, const std::vector<VertexId>& targets)
{
    std::vector<char> in_t(net.vertex_count(), 0);
    for (auto t : targets)
        in_t[t] = 1;
    const auto r = reduced(net);
    const auto n = r.P.rows();
    // h = P_x(hit targets at time >= 0 before the sinks): h = 1 on targets.
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (in_t[r.ids[static_cast<std::size_t>(i)]]) {
            b(i) = 1.0;
            continue;
        }
        A.row(i) -= r.P.row(i);
    }
    const Eigen::VectorXd h = A.partialPivLu().solve(b);
    double p = 0.0;
    for (Slot s = 0; s < net.degree(u); ++s) {
        const VertexId w = net.target(u, s);
        if (r.pos[w] >= 0)
            p += net.conductance(u, s) / net.weight(u) * h(r.pos[w]);
    }
    return p;
}

inline double capacity(const Network& net, const std::vector<VertexId>& K)
{
    double cap = 0.0;
    for (auto u : K)
        cap += net.weight(u) * (1.0 - return_probability(net, u, K));
    return cap;
}

// Weighted Laplacian determinant with the given rows/columns deleted.
inline double laplacian_minor(const Network& net, const std::vector<VertexId>& deleted)
{
    std::vector<int> pos(net.vertex_count(), -1);
    int n = 0;
    for (VertexId v = 0; v < net.vertex_count(); ++v)
        if (std::find(deleted.begin(), deleted.end(), v) == deleted.end())
            pos[v] = n++;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (VertexId v = 0; v < net.vertex_count(); ++v) {
        if (pos[v] < 0)
            continue;
        for (Slot s = 0; s < net.degree(v); ++s) {
            const double c = net.conductance(v, s);
            L(pos[v], pos[v]) += c;
            const VertexId w = net.target(v, s);
            if (pos[w] >= 0)
                L(pos[v], pos[w]) -= c;
        }
    }
    return L.determinant();
}

// Edge list (one entry per undirected edge, parallel edges distinct) read
// off the slot structure: slot s at v with v < target, or the lower slot of
// a loop-free pair.
struct Edge {
    VertexId a, b;
    double c;
};

inline std::vector<Edge> edges_of(const Network& net)
{
    std::vector<Edge> out;
    for (VertexId v = 0; v < net.vertex_count(); ++v)
        for (Slot s = 0; s < net.degree(v); ++s) {
            const VertexId w = net.target(v, s);
            if (v < w)
                out.push_back({v, w, net.conductance(v, s)});
        }
    return out;
}

// All spanning forests with one root per component, as edge subsets: the
// subsets of size n - |roots| that are acyclic once the roots are merged.
// Returns the list of total weights (product of conductances).
inline std::vector<double> brute_force_forest_weights(const Network& net, const std::vector<VertexId>& roots)
{
    const auto edges = edges_of(net);
    const std::size_t m = edges.size();
    const std::size_t need = net.vertex_count() - roots.size();
    std::vector<double> out;
    std::vector<int> uf(net.vertex_count());
    std::function<int(int)> find = [&](int x) { return uf[x] == x ? x : uf[x] = find(uf[x]); };
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcountll(mask)) != need)
            continue;
        std::iota(uf.begin(), uf.end(), 0);
        for (std::size_t i = 1; i < roots.size(); ++i)
            uf[find(static_cast<int>(roots[i]))] = find(static_cast<int>(roots[0]));
        bool ok = true;
        double w = 1.0;
        for (std::size_t e = 0; e < m && ok; ++e)
            if (mask >> e & 1) {
                const int a = find(static_cast<int>(edges[e].a)), b = find(static_cast<int>(edges[e].b));
                if (a == b)
                    ok = false;
                else
                    uf[a] = b;
                w *= edges[e].c;
            }
        if (ok)
            out.push_back(w);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Pearson chi-square p-value of observed counts against expected
// probabilities (cells with zero probability must have zero counts).
inline double chi_square_p(const std::vector<double>& observed, const std::vector<double>& prob)
{
    double total = std::accumulate(observed.begin(), observed.end(), 0.0);
    double chi = 0.0;
    int cells = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (prob[i] <= 0.0) {
            if (observed[i] > 0)
                return 0.0;
            continue;
        }
        const double e = total * prob[i];
        chi += (observed[i] - e) * (observed[i] - e) / e;
        ++cells;
    }
    if (cells < 2)
        return 1.0;
    boost::math::chi_squared_distribution<double> dist(cells - 1);
    return boost::math::cdf(boost::math::complement(dist, chi));
}

// Two-sample chi-square homogeneity test on count maps.
template <class Key>
double two_sample_p(const std::map<Key, double>& a, const std::map<Key, double>& b)
{
    std::map<Key, std::pair<double, double>> joint;
    double na = 0, nb = 0;
    for (auto& [k, v] : a) {
        joint[k].first += v;
        na += v;
    }
    for (auto& [k, v] : b) {
        joint[k].second += v;
        nb += v;
    }
    double chi = 0.0;
    for (auto& [k, ab] : joint) {
        const double tot = ab.first + ab.second;
        const double ea = tot * na / (na + nb), eb = tot * nb / (na + nb);
        chi += (ab.first - ea) * (ab.first - ea) / ea + (ab.second - eb) * (ab.second - eb) / eb;
    }
    const int dof = static_cast<int>(joint.size()) - 1;
    if (dof < 1)
        return 1.0;
    boost::math::chi_squared_distribution<double> dist(dof);
    return boost::math::cdf(boost::math::complement(dist, chi));
}

} // namespace oracle
