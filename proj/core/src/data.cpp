#include "feelsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "feelsim/errors.hpp"
#include "feelsim/linalg.hpp"

namespace feelsim {

void MixtureSpec::validate() const {
    if (classes < 2) {
        throw ParameterError("MixtureSpec: need at least 2 classes");
    }
    if (feature_dim < 1) {
        throw ParameterError("MixtureSpec: feature_dim must be >= 1");
    }
    if (!(stddev > 0.0)) {
        throw ParameterError("MixtureSpec: stddev must be > 0");
    }
    if (static_cast<int>(means.size()) != classes) {
        throw ParameterError("MixtureSpec: one mean per class required");
    }
    for (int a = 0; a < classes; ++a) {
        if (static_cast<int>(means[a].size()) != feature_dim) {
            throw ParameterError("MixtureSpec: mean dimension mismatch");
        }
        for (int b = a + 1; b < classes; ++b) {
            if (nrm2(vsub(means[a], means[b])) == 0.0) {
                throw ParameterError("MixtureSpec: class means must be distinct");
            }
        }
    }
}

MixtureSpec make_sphere_mixture(int classes, int feature_dim, double radius,
                                double stddev, RngStream rng) {
    if (!(radius > 0.0)) {
        throw ParameterError("make_sphere_mixture: radius must be > 0");
    }
    MixtureSpec spec;
    spec.classes = classes;
    spec.feature_dim = feature_dim;
    spec.stddev = stddev;
    spec.means.reserve(classes);
    for (int c = 0; c < classes; ++c) {
        Vec dir;
        double norm = 0.0;
        do {
            dir = gauss_vector(rng, feature_dim, 1.0);
            norm = nrm2(dir);
        } while (norm < 1e-12);
        scale(radius / norm, dir);
        spec.means.push_back(std::move(dir));
    }
    spec.validate();
    return spec;
}

Vec LabeledDataset::label_marginal(int classes) const {
    Vec marginal(classes, 0.0);
    for (int lab : labels) {
        marginal[lab] += 1.0;
    }
    if (!labels.empty()) {
        scale(1.0 / static_cast<double>(labels.size()), marginal);
    }
    return marginal;
}

namespace {

int sample_categorical(RngStream& rng, const Vec& probs) {
    const double u = rng.next_double();
    double acc = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
        acc += probs[c];
        if (u < acc) {
            return static_cast<int>(c);
        }
    }
    return static_cast<int>(probs.size()) - 1;
}

void check_simplex(const Vec& probs) {
    double total = 0.0;
    for (double p : probs) {
        if (p < 0.0) {
            throw ParameterError("class_probs: negative probability");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ParameterError("class_probs: probabilities must sum to 1");
    }
}

}  // namespace

LabeledDataset gen_synthetic(const MixtureSpec& spec, std::size_t total,
                             const Vec& class_probs, RngStream rng) {
    spec.validate();
    if (static_cast<int>(class_probs.size()) != spec.classes) {
        throw ParameterError("gen_synthetic: class_probs length mismatch");
    }
    check_simplex(class_probs);
    LabeledDataset ds;
    ds.features.reserve(total);
    ds.labels.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        const int label = sample_categorical(rng, class_probs);
        Vec x = gauss_vector(rng, spec.feature_dim, spec.stddev);
        axpy(1.0, spec.means[label], x);
        ds.features.push_back(std::move(x));
        ds.labels.push_back(label);
    }
    return ds;
}

Vec ClientPartition::mixture_marginal() const {
    Vec mix(classes, 0.0);
    for (const Vec& marginal : label_marginals) {
        axpy(1.0, marginal, mix);
    }
    if (!label_marginals.empty()) {
        scale(1.0 / static_cast<double>(label_marginals.size()), mix);
    }
    return mix;
}

namespace {

// Largest-remainder rounding of proportions * total into integer counts.
std::vector<int> largest_remainder_counts(const Vec& proportions, int total) {
    const std::size_t n = proportions.size();
    std::vector<int> counts(n, 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    remainders.reserve(n);
    int assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double exact = proportions[i] * total;
        counts[i] = static_cast<int>(std::floor(exact));
        assigned += counts[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    // Ties broken by lower index for determinism.
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int r = 0; r < total - assigned; ++r) {
        counts[remainders[r % n].second] += 1;
    }
    return counts;
}

struct Sample {
    int source_index;
    int label;
};

}  // namespace

ClientPartition dirichlet_partition(const LabeledDataset& ds, int classes,
                                    int n_devices, double alpha, int per_device,
                                    RngStream rng) {
    if (n_devices < 1 || per_device < 1) {
        throw ParameterError("dirichlet_partition: need n_devices >= 1, per_device >= 1");
    }
    if (!(alpha > 0.0)) {
        throw ParameterError("dirichlet_partition: alpha must be > 0");
    }
    const std::size_t need = static_cast<std::size_t>(n_devices) * per_device;
    if (ds.size() < need) {
        throw CapacityError("dirichlet_partition: source dataset smaller than N*n");
    }

    // Class index pools, shuffled once so assignment order is unbiased.
    std::vector<std::vector<int>> class_pool(classes);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const int lab = ds.labels[i];
        if (lab < 0 || lab >= classes) {
            throw ParameterError("dirichlet_partition: label out of range");
        }
        class_pool[lab].push_back(static_cast<int>(i));
    }
    {
        RngStream pool_rng = rng.substream(0xC0FFEE);
        for (auto& pool : class_pool) {
            shuffle(pool_rng, pool);
        }
    }

    // Per-class quotas summing to exactly N*n, proportional to the source
    // class counts. Allocating quotas instead of the whole oversampled pool
    // keeps the later size-equalization small, which is what preserves the
    // drawn heterogeneity.
    std::vector<int> quota(classes, 0);
    {
        const double ratio =
            static_cast<double>(need) / static_cast<double>(ds.size());
        Vec exact(classes, 0.0);
        int assigned_total = 0;
        std::vector<std::pair<double, int>> rem;
        for (int c = 0; c < classes; ++c) {
            exact[c] = ratio * static_cast<double>(class_pool[c].size());
            quota[c] = static_cast<int>(std::floor(exact[c]));
            assigned_total += quota[c];
            rem.emplace_back(exact[c] - std::floor(exact[c]), c);
        }
        std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        int leftover = static_cast<int>(need) - assigned_total;
        for (std::size_t k = 0; leftover > 0; k = (k + 1) % rem.size()) {
            const int c = rem[k].second;
            if (quota[c] < static_cast<int>(class_pool[c].size())) {
                quota[c] += 1;
                leftover -= 1;
            }
        }
    }

    for (int attempt = 0; attempt < 100; ++attempt) {
        RngStream draw_rng = rng.substream(0xD12A, static_cast<std::uint64_t>(attempt));
        std::vector<std::vector<Sample>> assigned(n_devices);

        for (int c = 0; c < classes; ++c) {
            if (quota[c] == 0) continue;
            const Vec proportions = dirichlet_sample(draw_rng, alpha,
                                                     static_cast<std::size_t>(n_devices));
            const std::vector<int> counts = largest_remainder_counts(proportions, quota[c]);
            int cursor = 0;
            for (int dev = 0; dev < n_devices; ++dev) {
                for (int k = 0; k < counts[dev]; ++k) {
                    assigned[dev].push_back({class_pool[c][cursor++], c});
                }
            }
        }

        // Equalize to exactly per_device samples each: over-full clients
        // surrender samples from their currently most-represented class,
        // under-full clients absorb from that surplus pool. Both the pool
        // and the fill order are shuffled so the transfer does not correlate
        // class content with device index (an index-ordered fill would give
        // index-adjacent devices similar classes, which biases fixed-wiring
        // topologies).
        RngStream transfer_rng =
            rng.substream(0xF111, static_cast<std::uint64_t>(attempt));
        std::vector<Sample> surplus;
        for (int dev = 0; dev < n_devices; ++dev) {
            auto& mine = assigned[dev];
            if (static_cast<int>(mine.size()) <= per_device) continue;
            std::vector<int> hist(classes, 0);
            for (const Sample& s : mine) hist[s.label] += 1;
            while (static_cast<int>(mine.size()) > per_device) {
                const int top =
                    static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
                // Take the last held sample of the top class.
                for (std::size_t k = mine.size(); k-- > 0;) {
                    if (mine[k].label == top) {
                        surplus.push_back(mine[k]);
                        mine.erase(mine.begin() + static_cast<std::ptrdiff_t>(k));
                        hist[top] -= 1;
                        break;
                    }
                }
            }
        }
        shuffle(transfer_rng, surplus);
        std::vector<int> fill_order(n_devices);
        std::iota(fill_order.begin(), fill_order.end(), 0);
        shuffle(transfer_rng, fill_order);
        bool filled = true;
        std::size_t pool_cursor = 0;
        for (int dev_pos = 0; dev_pos < n_devices && filled; ++dev_pos) {
            auto& mine = assigned[fill_order[dev_pos]];
            while (static_cast<int>(mine.size()) < per_device) {
                if (pool_cursor >= surplus.size()) {
                    filled = false;
                    break;
                }
                mine.push_back(surplus[pool_cursor++]);
            }
        }
        if (!filled) continue;  // redraw proportions

        ClientPartition part;
        part.classes = classes;
        part.clients.resize(n_devices);
        part.label_marginals.resize(n_devices);
        for (int dev = 0; dev < n_devices; ++dev) {
            LabeledDataset& client = part.clients[dev];
            client.features.reserve(per_device);
            client.labels.reserve(per_device);
            for (const Sample& s : assigned[dev]) {
                client.features.push_back(ds.features[s.source_index]);
                client.labels.push_back(s.label);
            }
            part.label_marginals[dev] = client.label_marginal(classes);
        }
        return part;
    }
    throw CapacityError(
        "dirichlet_partition: could not fill every client after 100 redraws");
}

Vec heterogeneity(const ClientPartition& p) {
    const Vec mix = p.mixture_marginal();
    Vec d(p.devices(), 0.0);
    for (int dev = 0; dev < p.devices(); ++dev) {
        double tv = 0.0;
        for (int c = 0; c < p.classes; ++c) {
            tv += std::abs(p.label_marginals[dev][c] - mix[c]);
        }
        d[dev] = 0.5 * tv;
    }
    return d;
}

LabeledDataset global_test_set(const MixtureSpec& spec, const ClientPartition& p,
                               std::size_t m, RngStream rng) {
    if (m < 1) {
        throw ParameterError("global_test_set: m must be >= 1");
    }
    return gen_synthetic(spec, m, p.mixture_marginal(), rng);
}

}  // namespace feelsim
