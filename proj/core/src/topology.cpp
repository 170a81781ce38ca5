#include "feelsim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "feelsim/errors.hpp"

namespace feelsim {

GraphKind graph_kind_from_string(const std::string& s) {
    if (s == "complete") return GraphKind::complete;
    if (s == "ring") return GraphKind::ring;
    if (s == "star") return GraphKind::star;
    if (s == "erdos_renyi" || s == "er" || s == "random") return GraphKind::erdos_renyi;
    throw ParameterError("unknown graph kind: " + s);
}

std::string to_string(GraphKind kind) {
    switch (kind) {
        case GraphKind::complete: return "complete";
        case GraphKind::ring: return "ring";
        case GraphKind::star: return "star";
        case GraphKind::erdos_renyi: return "erdos_renyi";
    }
    return "?";
}

std::vector<int> Graph::degrees() const {
    std::vector<int> deg(n, 0);
    for (const auto& [i, j] : edges) {
        deg[i] += 1;
        deg[j] += 1;
    }
    return deg;
}

std::vector<std::vector<int>> Graph::adjacency() const {
    std::vector<std::vector<int>> adj(n);
    for (const auto& [i, j] : edges) {
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    return adj;
}

bool Graph::connected() const {
    if (n == 0) return false;
    const auto adj = adjacency();
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v : adj[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                count += 1;
                stack.push_back(v);
            }
        }
    }
    return count == n;
}

namespace {

Graph finalize(int n, const std::set<std::pair<int, int>>& edge_set) {
    Graph g;
    g.n = n;
    g.edges.assign(edge_set.begin(), edge_set.end());
    return g;
}

Graph sample_er(int n, double p, RngStream& rng) {
    std::set<std::pair<int, int>> edge_set;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (rng.next_double() < p) {
                edge_set.emplace(i, j);
            }
        }
    }
    return finalize(n, edge_set);
}

}  // namespace

Graph build_graph(GraphKind kind, int n, double p, RngStream rng) {
    if (n < 2) {
        throw ParameterError("build_graph: need n >= 2 nodes");
    }
    switch (kind) {
        case GraphKind::complete: {
            Graph g;
            g.n = n;
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    g.edges.emplace_back(i, j);
                }
            }
            return g;
        }
        case GraphKind::ring: {
            Graph g;
            g.n = n;
            if (n == 2) {
                g.edges.emplace_back(0, 1);
                return g;
            }
            std::set<std::pair<int, int>> edge_set;
            for (int i = 0; i < n; ++i) {
                const int j = (i + 1) % n;
                edge_set.emplace(std::min(i, j), std::max(i, j));
            }
            return finalize(n, edge_set);
        }
        case GraphKind::star: {
            Graph g;
            g.n = n;
            for (int i = 1; i < n; ++i) {
                g.edges.emplace_back(0, i);
            }
            return g;
        }
        case GraphKind::erdos_renyi: {
            if (!(p > 0.0 && p <= 1.0)) {
                throw ParameterError("build_graph: ER probability must be in (0, 1]");
            }
            Graph g;
            for (int attempt = 0; attempt < 100; ++attempt) {
                g = sample_er(n, p, rng);
                if (g.connected()) {
                    return g;
                }
            }
            // Repair: keep the last sample and add a ring backbone over a
            // random node permutation so the result is connected.
            std::vector<int> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            shuffle(rng, perm);
            std::set<std::pair<int, int>> edge_set(g.edges.begin(), g.edges.end());
            for (int i = 0; i < n; ++i) {
                const int a = perm[i];
                const int b = perm[(i + 1) % n];
                if (a != b) {
                    edge_set.emplace(std::min(a, b), std::max(a, b));
                }
            }
            g = finalize(n, edge_set);
            if (!g.connected()) {
                throw ConnectivityError("build_graph: ER repair failed to connect the graph");
            }
            return g;
        }
    }
    throw ParameterError("build_graph: unknown kind");
}

MixingMatrix metropolis_weights(const Graph& g) {
    if (!g.connected()) {
        throw ConnectivityError(
            "metropolis_weights: graph is disconnected (lambda would be 1)");
    }
    const int n = g.n;
    const std::vector<int> deg = g.degrees();
    Mat theta(n, n);
    for (const auto& [i, j] : g.edges) {
        const double w = 1.0 / (1.0 + static_cast<double>(std::max(deg[i], deg[j])));
        theta(i, j) = w;
        theta(j, i) = w;
    }
    for (int i = 0; i < n; ++i) {
        double off = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j != i) off += theta(i, j);
        }
        theta(i, i) = 1.0 - off;
    }
    MixingMatrix m;
    m.lambda_value = mixing_lambda(theta);
    m.theta = std::move(theta);
    return m;
}

double mixing_lambda(const Mat& theta) {
    const std::vector<double> eig = sym_eigvals(theta);
    if (eig.empty()) {
        throw DimensionError("mixing_lambda: empty matrix");
    }
    if (std::abs(eig.front() - 1.0) > 1e-9) {
        throw NumericError("mixing_lambda: leading eigenvalue is not 1");
    }
    if (eig.size() == 1) {
        return 0.0;
    }
    const double second = std::abs(eig[1]);
    const double last = std::abs(eig.back());
    return std::max(second, last);
}

std::vector<ContractionRow> contraction_check(const MixingMatrix& m, int k_max) {
    if (k_max < 1) {
        throw ParameterError("contraction_check: k_max must be >= 1");
    }
    const std::size_t n = m.theta.rows;
    const Mat proj = Mat::average_projector(n);
    std::vector<ContractionRow> rows;
    rows.reserve(k_max);
    Mat power = Mat::identity(n);
    double lambda_pow = 1.0;
    for (int k = 1; k <= k_max; ++k) {
        power = matmul(power, m.theta);
        lambda_pow *= m.lambda_value;
        const double norm = spectral_norm(sub(power, proj));
        if (norm > lambda_pow + 1e-8) {
            throw NumericError("contraction_check: ||Theta^k - P|| exceeds lambda^k at k=" +
                               std::to_string(k));
        }
        rows.push_back({k, norm, lambda_pow});
    }
    return rows;
}

void validate_mixing(const MixingMatrix& m, const Graph& g) {
    const std::size_t n = m.theta.rows;
    if (!m.theta.square() || static_cast<int>(n) != g.n) {
        throw DimensionError("validate_mixing: shape mismatch");
    }
    std::set<std::pair<int, int>> edge_set(g.edges.begin(), g.edges.end());
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        double col_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = m.theta(i, j);
            if (v < 0.0) {
                throw NumericError("validate_mixing: negative entry");
            }
            if (std::abs(v - m.theta(j, i)) > 1e-12) {
                throw NumericError("validate_mixing: asymmetric entry");
            }
            if (i != j) {
                const auto key = std::make_pair(std::min<int>(i, j), std::max<int>(i, j));
                const bool has_edge = edge_set.count(key) > 0;
                if (!has_edge && v != 0.0) {
                    throw NumericError("validate_mixing: weight on a non-edge");
                }
                if (has_edge && !(v > 0.0)) {
                    throw NumericError("validate_mixing: zero weight on an edge");
                }
            }
            row_sum += v;
            col_sum += m.theta(j, i);
        }
        if (std::abs(row_sum - 1.0) > 1e-9 || std::abs(col_sum - 1.0) > 1e-9) {
            throw NumericError("validate_mixing: row/column sum is not 1");
        }
    }
    if (g.connected()) {
        if (!(m.lambda_value >= 0.0 && m.lambda_value < 1.0)) {
            throw NumericError("validate_mixing: lambda outside [0, 1)");
        }
    }
}

}  // namespace feelsim
