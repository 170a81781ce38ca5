#pragma once

#include <optional>
#include <string>
#include <vector>

#include "feelsim/bounds.hpp"
#include "feelsim/config.hpp"
#include "feelsim/data.hpp"
#include "feelsim/trainer.hpp"

namespace feelsim {

// Everything a single run produces, before and after persistence.
struct ExperimentOutcome {
    RunResult run;
    BoundConstants constants;
    double bound_value = 0.0;
    bool bound_defined = false;  // false when the channel was noiseless
    std::uint64_t seed = 0;
    std::string out_dir;
};

// Builds mixture/partition/test set/topology/channel for (cfg, seed), trains,
// estimates the bound constants (the final model joins the probe set), and
// evaluates the matching bound with the executed eta schedule.
ExperimentOutcome execute_run(const ExperimentConfig& cfg, std::uint64_t seed);

// execute_run plus artifacts: config.resolved, metrics.csv, summary.json and
// (unless disabled) SVG plots under out_dir.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                                 const std::string& out_dir, bool plots);

std::string metrics_csv(const RunResult& run);
std::string summary_json(const ExperimentOutcome& outcome, const ExperimentConfig& cfg);

// One sweep point: the base config with any swept axes overridden.
struct SweepPoint {
    ExperimentConfig cfg;
    std::uint64_t seed = 0;
    std::string combo;  // axis-value slug, "base" when nothing is swept
};

struct SweepRow {
    std::string combo;
    ExperimentConfig cfg;  // point config (for axis columns)
    std::uint64_t seed = 0;
    bool aggregate = false;
    bool failed = false;
    std::string error;
    double final_acc = 0.0;
    double final_gap = 0.0;
    double final_train_loss = 0.0;
    double final_test_loss = 0.0;
    double bound_value = 0.0;
    bool bound_defined = false;
    double lambda = 0.0;
    double mean_d = 0.0;
    bool diverged = false;
    double acc_std = 0.0;  // aggregate rows
    double gap_std = 0.0;  // aggregate rows
};

std::vector<SweepPoint> expand_sweep(const ExperimentConfig& base);

// Runs every point (continuing past per-point failures), writes per-point
// artifacts under out_dir/runs/<combo>/seed<k>, the aggregate sweep.csv, and
// a test-accuracy chart per combo. Returns all rows (per-seed + aggregates).
std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::string& out_dir,
                                bool plots, bool quiet);

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace feelsim
