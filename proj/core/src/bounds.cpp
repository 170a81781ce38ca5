#include "feelsim/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "feelsim/errors.hpp"
#include "feelsim/linalg.hpp"

namespace feelsim {

void BoundConstants::validate() const {
    if (R < 0.0 || L < 0.0) throw ParameterError("BoundConstants: R, L must be >= 0");
    if (!(lambda >= 0.0 && lambda < 1.0)) {
        throw ParameterError("BoundConstants: lambda must be in [0, 1)");
    }
    if (n_devices < 1 || samples_per_device < 1) {
        throw ParameterError("BoundConstants: need N >= 1 and n >= 1");
    }
    if (rounds < 0) throw ParameterError("BoundConstants: rounds must be >= 0");
    if (static_cast<int>(xi.size()) != n_devices ||
        static_cast<int>(D.size()) != n_devices) {
        throw ParameterError("BoundConstants: xi and D must have one entry per device");
    }
    if (static_cast<int>(eta.size()) != rounds) {
        throw ParameterError("BoundConstants: eta schedule length must equal rounds");
    }
    for (double v : xi) {
        if (v < 0.0) throw ParameterError("BoundConstants: xi entries must be >= 0");
    }
    for (double v : D) {
        if (v < 0.0) throw ParameterError("BoundConstants: D entries must be >= 0");
    }
    for (double v : eta) {
        if (!(v > 0.0)) throw ParameterError("BoundConstants: eta entries must be > 0");
    }
    if (sigma_sq < 0.0) throw ParameterError("BoundConstants: sigma_sq must be >= 0");
}

BoundConstants estimate_constants(const ModelSpec& spec, const ClientPartition& partition,
                                  int probe_models, RngStream rng, double probe_scale,
                                  const std::vector<Vec>* checkpoints) {
    spec.validate();
    if (probe_models < 10) {
        throw ParameterError("estimate_constants: need at least 10 probe models");
    }
    if (partition.devices() < 1) {
        throw ParameterError("estimate_constants: empty partition");
    }
    for (const auto& client : partition.clients) {
        if (client.size() == 0) {
            throw ParameterError("estimate_constants: empty client dataset");
        }
    }

    std::vector<Vec> probes;
    probes.reserve(static_cast<std::size_t>(probe_models) +
                   (checkpoints != nullptr ? checkpoints->size() : 0));
    for (int p = 0; p < probe_models; ++p) {
        RngStream probe_rng = rng.substream(static_cast<std::uint64_t>(p));
        probes.push_back(gauss_vector(probe_rng, spec.param_dim(), probe_scale));
    }
    if (checkpoints != nullptr) {
        for (const Vec& w : *checkpoints) {
            if (w.size() != spec.param_dim()) {
                throw DimensionError("estimate_constants: checkpoint has wrong length");
            }
            probes.push_back(w);
        }
    }

    const int n_dev = partition.devices();
    BoundConstants out;
    out.xi.assign(n_dev, 0.0);
    out.D = heterogeneity(partition);
    out.d = spec.param_dim();
    out.n_devices = n_dev;
    out.samples_per_device = static_cast<int>(partition.clients.front().size());

    double loss_min = std::numeric_limits<double>::infinity();
    double loss_max = -std::numeric_limits<double>::infinity();
    double grad_norm_max = 0.0;

    std::vector<Vec> sample_grads;
    for (const Vec& w : probes) {
        for (int i = 0; i < n_dev; ++i) {
            const LabeledDataset& client = partition.clients[i];
            const std::size_t n = client.size();
            sample_grads.assign(n, Vec());
            Vec mean_grad(spec.param_dim(), 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                const Batch single = Batch::of(client, {static_cast<int>(j)});
                const double l = loss(spec, w, single);
                loss_min = std::min(loss_min, l);
                loss_max = std::max(loss_max, l);
                sample_grads[j] = grad(spec, w, single);
                grad_norm_max = std::max(grad_norm_max, nrm2(sample_grads[j]));
                axpy(1.0, sample_grads[j], mean_grad);
            }
            scale(1.0 / static_cast<double>(n), mean_grad);
            double var = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const Vec dev = vsub(sample_grads[j], mean_grad);
                const double norm = nrm2(dev);
                var += norm * norm;
            }
            const double std_dev = std::sqrt(var / static_cast<double>(n));
            out.xi[i] = std::max(out.xi[i], std_dev);
        }
    }

    out.R = (loss_max - loss_min) / 2.0;
    out.L = grad_norm_max;
    return out;
}

namespace {

// Per-round aggregate V(t) = eta_t^2 * sum_i (xi_i^2 + L^2 (4 D_i^2 + 1)).
double client_mass(const BoundConstants& c) {
    double mass = 0.0;
    for (int i = 0; i < c.n_devices; ++i) {
        mass += c.xi[i] * c.xi[i] + c.L * c.L * (4.0 * c.D[i] * c.D[i] + 1.0);
    }
    return mass;
}

// eta at index t with the convention eta_0 := eta_1 (V(0) uses the first rate).
double eta_at(const BoundConstants& c, int t) {
    if (c.eta.empty()) return 0.0;
    return t <= 0 ? c.eta.front() : c.eta[static_cast<std::size_t>(t - 1)];
}

struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        const double y = v - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

}  // namespace

double bound_cfl(const BoundConstants& c) {
    c.validate();
    if (c.rounds == 0) {
        return 0.0;
    }
    if (c.sigma_sq == 0.0) {
        throw ParameterError("bound_cfl: undefined at sigma_sq == 0");
    }
    const double mass = client_mass(c);
    const double n3 = std::pow(static_cast<double>(c.n_devices), 3);
    const double denom = c.sigma_sq * n3 * static_cast<double>(c.samples_per_device);
    KahanSum total;
    for (int t = 1; t <= c.rounds; ++t) {
        const double eta_t = eta_at(c, t);
        total.add(c.R * c.R * eta_t * eta_t * mass / denom);
    }
    return std::sqrt(total.sum);
}

double bound_dfl(const BoundConstants& c) {
    c.validate();
    if (c.rounds == 0) {
        return 0.0;
    }
    if (c.sigma_sq == 0.0) {
        throw ParameterError("bound_dfl: undefined at sigma_sq == 0");
    }
    const double mass = client_mass(c);
    const double n1 = static_cast<double>(c.n_devices);
    const double n3 = n1 * n1 * n1;
    const double n = static_cast<double>(c.samples_per_device);
    const double r_sq = c.R * c.R;
    const double lam_sq = c.lambda * c.lambda;

    auto v_of = [&](int t) {
        const double e = eta_at(c, t);
        return e * e * mass;
    };

    KahanSum total;
    for (int t = 1; t <= c.rounds; ++t) {
        double lam_pow = 1.0;  // lambda^{2k}
        KahanSum mixing_term;
        KahanSum dim_term;
        for (int k = 1; k <= t; ++k) {
            lam_pow *= lam_sq;
            if (lam_pow == 0.0) break;
            mixing_term.add(lam_pow * v_of(t - k));
            dim_term.add(lam_pow);
        }
        total.add(2.0 * r_sq * mixing_term.sum / (c.sigma_sq * n3 * n));
        total.add(2.0 * r_sq * static_cast<double>(c.d) * dim_term.sum / (n3 * n));
        total.add(2.0 * r_sq * v_of(t) / (c.sigma_sq * n1 * n));
    }
    return std::sqrt(total.sum);
}

double bound_generic(const Vec& mi, double R, int n, int N) {
    if (n < 1 || N < 1) {
        throw ParameterError("bound_generic: need n >= 1 and N >= 1");
    }
    if (R < 0.0) {
        throw ParameterError("bound_generic: R must be >= 0");
    }
    if (static_cast<int>(mi.size()) != N) {
        throw ParameterError("bound_generic: one MI value per device required");
    }
    double total = 0.0;
    for (double v : mi) {
        if (v < 0.0) {
            throw ParameterError("bound_generic: MI values must be >= 0");
        }
        total += v;
    }
    return std::sqrt(2.0 * R * R * total / (static_cast<double>(n) * N));
}

}  // namespace feelsim
