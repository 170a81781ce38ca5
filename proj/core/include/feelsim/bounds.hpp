#pragma once

#include <vector>

#include "feelsim/data.hpp"
#include "feelsim/model.hpp"
#include "feelsim/rng.hpp"

namespace feelsim {

// Every constant feeding the closed-form generalization bounds.
struct BoundConstants {
    double R = 0.0;        // sub-Gaussian scale of the loss
    double L = 0.0;        // Lipschitz constant of the loss in w
    Vec xi;                // per-client gradient-variance bounds
    Vec D;                 // per-client heterogeneity (total variation)
    double sigma_sq = 0.0; // total channel-noise variance (DFL: sum over devices)
    double lambda = 0.0;   // mixing spectral value, in [0, 1)
    std::size_t d = 0;     // parameter dimension
    int n_devices = 0;
    int samples_per_device = 0;
    int rounds = 0;
    Vec eta;  // learning-rate schedule, length == rounds

    void validate() const;  // throws ParameterError
};

// Empirical estimates of R, L, xi and D from probe models:
//   probe p is gauss_vector(rng.substream(p), d, probe_scale), followed by any
//   supplied checkpoints;
//   R  = (max - min per-sample loss over all probes x samples) / 2
//   L  = max per-sample gradient norm
//   xi_i = max over probes of sqrt(mean_j ||g_j - gbar||^2) within client i
//   D  = heterogeneity(partition)
// sigma_sq / lambda / d / n / N / T / eta are left for the caller to fill.
// Throws ParameterError on probe_models < 10 or an empty partition.
BoundConstants estimate_constants(const ModelSpec& spec, const ClientPartition& partition,
                                  int probe_models, RngStream rng,
                                  double probe_scale = 1.0,
                                  const std::vector<Vec>* checkpoints = nullptr);

// CFL bound: sqrt( sum_t (R^2 eta_t^2 / (sigma^2 N^3 n)) *
//                  sum_i [xi_i^2 + L^2 (4 D_i^2 + 1)] ).
// Throws ParameterError when sigma_sq == 0 (the bound needs channel noise).
double bound_cfl(const BoundConstants& c);

// DFL bound: sqrt( sum_t [ sum_{k=1..t} 2 R^2 lambda^{2k} V(t-k) / (sigma^2 N^3 n)
//                        + sum_{k=1..t} 2 R^2 d lambda^{2k} / (N^3 n)
//                        + 2 R^2 V(t) / (sigma^2 N n) ] )
// with V(t) = eta_t^2 * sum_i (xi_i^2 + L^2 (4 D_i^2 + 1)) and eta_0 := eta_1.
// Double sums use compensated accumulation. Throws ParameterError when
// sigma_sq == 0.
double bound_dfl(const BoundConstants& c);

// Generic information-theoretic bound from user-supplied per-client mutual
// information values: sqrt( (2 R^2 / (n N)) * sum_i mi_i ).
double bound_generic(const Vec& mi, double R, int n, int N);

}  // namespace feelsim
