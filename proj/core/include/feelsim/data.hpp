#pragma once

#include <cstddef>
#include <vector>

#include "feelsim/rng.hpp"

namespace feelsim {

// Gaussian class-conditional mixture: class c draws features from
// N(mean_c, stddev^2 * I).
struct MixtureSpec {
    int classes = 0;
    int feature_dim = 0;
    std::vector<Vec> means;  // one per class
    double stddev = 1.0;

    void validate() const;  // throws ParameterError
};

// Class means placed independently on a sphere of the given radius.
MixtureSpec make_sphere_mixture(int classes, int feature_dim, double radius,
                                double stddev, RngStream rng);

struct LabeledDataset {
    std::vector<Vec> features;
    std::vector<int> labels;

    [[nodiscard]] std::size_t size() const { return labels.size(); }
    // Label histogram normalized to a probability vector.
    [[nodiscard]] Vec label_marginal(int classes) const;
};

// Labels drawn from class_probs, features from the labeled class.
LabeledDataset gen_synthetic(const MixtureSpec& spec, std::size_t total,
                             const Vec& class_probs, RngStream rng);

// N equally sized local datasets plus their label marginals.
struct ClientPartition {
    int classes = 0;
    std::vector<LabeledDataset> clients;
    std::vector<Vec> label_marginals;

    [[nodiscard]] int devices() const { return static_cast<int>(clients.size()); }
    // Uniform mixture of the client marginals.
    [[nodiscard]] Vec mixture_marginal() const;
};

// Splits ds across n_devices devices: per class, device proportions are drawn
// from Dir(alpha * 1_N) and converted to counts by largest remainder; sizes
// are then equalized to exactly per_device samples each by moving surplus
// samples (taken from an over-full client's most-represented class) to
// under-full clients. Throws CapacityError if ds cannot supply
// n_devices * per_device samples.
ClientPartition dirichlet_partition(const LabeledDataset& ds, int classes,
                                    int n_devices, double alpha, int per_device,
                                    RngStream rng);

// Per-client total variation between the client's label marginal and the
// uniform mixture of all client marginals: D_i = 1/2 sum_c |p_i(c) - pbar(c)|.
// With shared class-conditional features this equals the TV between the full
// data distributions.
Vec heterogeneity(const ClientPartition& p);

// Test set drawn from the uniform mixture of client label marginals with the
// spec's class-conditional feature law.
LabeledDataset global_test_set(const MixtureSpec& spec, const ClientPartition& p,
                               std::size_t m, RngStream rng);

}  // namespace feelsim
