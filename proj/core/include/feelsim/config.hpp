#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feelsim/bounds.hpp"
#include "feelsim/channel.hpp"
#include "feelsim/model.hpp"
#include "feelsim/topology.hpp"
#include "feelsim/trainer.hpp"

namespace feelsim {

// One sweep-axis point for the SNR axis: either "noiseless" or a dB value.
struct SnrPoint {
    bool noiseless = false;
    double snr_db = 0.0;

    [[nodiscard]] std::string label() const;
};

// Full experiment configuration, parsed from flat `key = value` text with
// `#` comments. Unknown keys are rejected.
struct ExperimentConfig {
    // problem (desk scale: small enough that a full sweep runs in seconds,
    // hard enough that topology/heterogeneity/noise effects are visible)
    int devices = 10;
    int samples_per_device = 50;
    int classes = 10;
    int feature_dim = 6;
    int hidden = 0;  // 0 selects the logistic model
    double mean_radius = 2.0;
    double class_std = 1.0;
    double dirichlet_alpha = 0.1;
    double oversample = 2.0;
    int test_size = 4000;

    // trainer
    Mode mode = Mode::cfl;
    Method method = Method::fedsgd;
    int rounds = 300;
    double lr = 1.2;
    LrSchedule lr_schedule = LrSchedule::constant;
    int batch_size = 8;
    double beta = 0.1;
    double beta_decay = 1.0;
    double mu_prox = 0.1;
    int eval_every = 10;
    int threads = 1;

    // topology (DFL only)
    GraphKind topology = GraphKind::complete;
    double er_p = 0.2;
    std::vector<double> dfl_sigma_scales;  // empty = all 1

    // channel
    NoiseMode noise_mode = NoiseMode::snr_db;
    double snr_db = 40.0;
    double sigma = 0.0;
    PowerRef power_ref = PowerRef::unit;

    // constants estimation
    int probe_models = 12;
    double probe_scale = 1.0;

    // harness
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::string out_dir = "out";
    bool plots = true;

    // sweep axes (empty = not swept)
    std::vector<double> sweep_alpha;
    std::vector<GraphKind> sweep_topology;
    std::vector<SnrPoint> sweep_snr_db;
    std::vector<Method> sweep_method;
    std::vector<double> sweep_lr;
    std::vector<std::uint64_t> sweep_seed;

    [[nodiscard]] ModelSpec model_spec() const;
    [[nodiscard]] TrainConfig train_config(std::uint64_t run_seed) const;
    [[nodiscard]] ChannelSpec channel_spec() const;
    void validate() const;  // throws ConfigError naming the offending key
};

// Parses and validates; errors carry the file name and line number.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

// Canonical echo of a resolved config. Reparsing the result yields an
// identical config.
std::string render_config(const ExperimentConfig& cfg);

// Inputs for the `bound` subcommand: a BoundConstants block plus optional
// per-client mutual-information values for the generic bound.
struct BoundInputs {
    BoundConstants constants;
    std::optional<Vec> mi;
    bool sigma_given = false;
};

// Constants file format: same key=value text. Keys: R, L, xi, D (scalar or
// per-device list), sigma_sq, lambda, d, devices, samples_per_device, rounds,
// eta (scalar or per-round list), mi (list, optional).
BoundInputs parse_bound_inputs(const std::string& path);
BoundInputs parse_bound_inputs_text(const std::string& text, const std::string& origin);

}  // namespace feelsim
