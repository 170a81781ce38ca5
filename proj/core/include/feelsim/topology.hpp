#pragma once

#include <string>
#include <utility>
#include <vector>

#include "feelsim/linalg.hpp"
#include "feelsim/rng.hpp"

namespace feelsim {

enum class GraphKind { complete, ring, star, erdos_renyi };

GraphKind graph_kind_from_string(const std::string& s);
std::string to_string(GraphKind kind);

// Simple undirected graph on nodes 0..n-1. Edges are stored as (i, j) with
// i < j, sorted, no duplicates, no self-loops.
struct Graph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;

    [[nodiscard]] std::vector<int> degrees() const;
    [[nodiscard]] std::vector<std::vector<int>> adjacency() const;
    [[nodiscard]] bool connected() const;
};

// complete: all n(n-1)/2 edges.
// ring: edges (i, (i+1) mod n).
// star: hub 0 connected to all others.
// erdos_renyi: each pair independently with probability p; if disconnected,
//   resampled up to 100 times, then repaired with a ring backbone over a
//   random node permutation.
// Throws ParameterError on n < 2 or (ER) p outside (0, 1].
Graph build_graph(GraphKind kind, int n, double p, RngStream rng);

// Symmetric doubly stochastic gossip matrix with its cached spectral value
// lambda = max(|lambda_2|, |lambda_N|).
struct MixingMatrix {
    Mat theta;
    double lambda_value = 0.0;
};

// Metropolis-Hastings weights: theta_ij = 1/(1 + max(deg_i, deg_j)) on edges,
// diagonal takes the residual mass. Requires a connected graph
// (ConnectivityError otherwise, since lambda would be 1).
MixingMatrix metropolis_weights(const Graph& g);

// lambda of an already-built doubly stochastic matrix. Verifies that the
// leading eigenvalue is 1 within 1e-9 (NumericError otherwise).
double mixing_lambda(const Mat& theta);

struct ContractionRow {
    int k = 0;
    double norm = 0.0;        // ||Theta^k - P||_2
    double lambda_pow = 0.0;  // lambda^k
};

// Verifies ||Theta^k - P||_2 <= lambda^k + 1e-8 for k = 1..k_max and returns
// the table. Throws NumericError if any row violates the inequality.
std::vector<ContractionRow> contraction_check(const MixingMatrix& m, int k_max);

// Checks all doubly stochastic invariants (symmetry, row/col sums, sign,
// support pattern vs. the graph, lambda in [0,1)). Throws on violation.
void validate_mixing(const MixingMatrix& m, const Graph& g);

}  // namespace feelsim
