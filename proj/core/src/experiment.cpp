#include "feelsim/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "feelsim/errors.hpp"
#include "feelsim/io.hpp"
#include "feelsim/linalg.hpp"
#include "feelsim/svg.hpp"

namespace feelsim {

namespace {

using nlohmann::json;

struct Problem {
    MixtureSpec mixture;
    ClientPartition partition;
    LabeledDataset test;
    std::optional<MixingMatrix> mixing;
};

Problem build_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
    Problem p;
    const RngStream root(seed);
    p.mixture = make_sphere_mixture(cfg.classes, cfg.feature_dim, cfg.mean_radius,
                                    cfg.class_std, root.substream(stream::kMixture));
    const auto total = static_cast<std::size_t>(
        std::ceil(cfg.oversample * cfg.devices * cfg.samples_per_device));
    const Vec uniform(cfg.classes, 1.0 / cfg.classes);
    const LabeledDataset source =
        gen_synthetic(p.mixture, total, uniform, root.substream(stream::kDataGen));
    p.partition = dirichlet_partition(source, cfg.classes, cfg.devices,
                                      cfg.dirichlet_alpha, cfg.samples_per_device,
                                      root.substream(stream::kPartition));
    p.test = global_test_set(p.mixture, p.partition,
                             static_cast<std::size_t>(cfg.test_size),
                             root.substream(stream::kTestSet));
    if (cfg.mode == Mode::dfl) {
        const Graph g = build_graph(cfg.topology, cfg.devices, cfg.er_p,
                                    root.substream(stream::kGraph));
        p.mixing = metropolis_weights(g);
    }
    return p;
}

// Total noise variance entering the bound: the aggregate draw's variance for
// CFL, the sum of per-device variances for DFL. Empirical power mode varies
// sigma per round; the snapshot uses the mean of sigma_t^2.
double total_sigma_sq(const ExperimentConfig& cfg, const RunResult& run) {
    if (run.sigma_used.empty()) return 0.0;
    double mean_sq = 0.0;
    for (double s : run.sigma_used) {
        mean_sq += s * s;
    }
    mean_sq /= static_cast<double>(run.sigma_used.size());
    if (cfg.mode == Mode::cfl) {
        return mean_sq;
    }
    double scale_sq = 0.0;
    if (cfg.dfl_sigma_scales.empty()) {
        scale_sq = static_cast<double>(cfg.devices);
    } else {
        for (double s : cfg.dfl_sigma_scales) {
            scale_sq += s * s;
        }
    }
    return mean_sq * scale_sq;
}

}  // namespace

ExperimentOutcome execute_run(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const Problem problem = build_problem(cfg, seed);
    const ModelSpec spec = cfg.model_spec();
    const TrainConfig train = cfg.train_config(seed);
    const ChannelSpec channel = cfg.channel_spec();

    ExperimentOutcome out;
    out.seed = seed;
    if (cfg.mode == Mode::cfl) {
        out.run = run_cfl(train, spec, problem.partition, channel, problem.test);
    } else {
        const Vec* scales =
            cfg.dfl_sigma_scales.empty() ? nullptr : &cfg.dfl_sigma_scales;
        out.run = run_dfl(train, spec, problem.partition, *problem.mixing, channel,
                          problem.test, scales);
    }

    const RngStream root(seed);
    // A diverged run's non-finite model would poison the probe set.
    std::vector<Vec> checkpoints;
    if (!out.run.diverged && all_finite(out.run.final_model)) {
        checkpoints.push_back(out.run.final_model);
    }
    out.constants = estimate_constants(spec, problem.partition, cfg.probe_models,
                                       root.substream(stream::kProbe),
                                       cfg.probe_scale, &checkpoints);
    out.constants.sigma_sq = total_sigma_sq(cfg, out.run);
    out.constants.lambda = out.run.lambda;
    out.constants.rounds = static_cast<int>(out.run.eta_used.size());
    out.constants.eta = Vec(out.run.eta_used.begin(), out.run.eta_used.end());

    if (out.constants.rounds == 0) {
        out.bound_value = 0.0;
        out.bound_defined = true;
    } else if (out.constants.sigma_sq > 0.0) {
        out.bound_value = cfg.mode == Mode::cfl ? bound_cfl(out.constants)
                                                : bound_dfl(out.constants);
        out.bound_defined = true;
    } else {
        out.bound_value = std::numeric_limits<double>::quiet_NaN();
        out.bound_defined = false;
    }
    return out;
}

std::string metrics_csv(const RunResult& run) {
    std::string csv = "round,train_loss,test_loss,test_acc,gap\n";
    for (const RoundMetrics& m : run.metrics) {
        csv += join_csv_row({std::to_string(m.round), fmt_g17(m.train_loss),
                             fmt_g17(m.test_loss), fmt_g17(m.test_acc),
                             fmt_g17(m.gap)});
    }
    return csv;
}

std::string summary_json(const ExperimentOutcome& outcome, const ExperimentConfig& cfg) {
    const RunResult& run = outcome.run;
    json j;
    j["mode"] = to_string(cfg.mode);
    j["method"] = to_string(cfg.method);
    j["seed"] = outcome.seed;
    j["diverged"] = run.diverged;
    if (run.diverged) {
        j["diverged_round"] = run.diverged_round;
    }
    if (!run.metrics.empty()) {
        const RoundMetrics& f = run.metrics.back();
        j["final"] = {{"round", f.round},
                      {"train_loss", f.train_loss},
                      {"test_loss", f.test_loss},
                      {"test_acc", f.test_acc},
                      {"gap", f.gap}};
    }
    const BoundConstants& c = outcome.constants;
    j["constants"] = {{"R", c.R},
                      {"L", c.L},
                      {"xi", c.xi},
                      {"D", c.D},
                      {"sigma_sq", c.sigma_sq},
                      {"lambda", c.lambda},
                      {"d", c.d},
                      {"devices", c.n_devices},
                      {"samples_per_device", c.samples_per_device},
                      {"rounds", c.rounds},
                      {"eta", c.eta},
                      // R is a loss-range proxy for the sub-Gaussian scale,
                      // estimated from random and trained probe models.
                      {"estimation", "probe-based empirical estimates"}};
    if (outcome.bound_defined) {
        j["bound_value"] = outcome.bound_value;
    } else {
        j["bound_value"] = nullptr;
        j["bound_note"] = "undefined: noiseless channel (sigma_sq = 0)";
    }
    // Wall-clock stays out of the file so re-runs are byte-identical.
    j["lambda"] = run.lambda;
    return j.dump(2) + "\n";
}

namespace {

void write_run_plots(const std::string& out_dir, const RunResult& run) {
    std::vector<double> rounds;
    std::vector<double> train_loss;
    std::vector<double> test_loss;
    std::vector<double> acc;
    std::vector<double> gap;
    for (const RoundMetrics& m : run.metrics) {
        rounds.push_back(m.round);
        train_loss.push_back(m.train_loss);
        test_loss.push_back(m.test_loss);
        acc.push_back(m.test_acc);
        gap.push_back(m.gap);
    }
    atomic_write_file(out_dir + "/loss.svg",
                      render_line_chart("Loss", "round", "loss",
                                        {{"train", rounds, train_loss},
                                         {"test", rounds, test_loss}}));
    atomic_write_file(out_dir + "/accuracy.svg",
                      render_line_chart("Test accuracy", "round", "accuracy",
                                        {{"test_acc", rounds, acc}}));
    atomic_write_file(out_dir + "/gap.svg",
                      render_line_chart("Generalization gap", "round",
                                        "test loss - train loss",
                                        {{"gap", rounds, gap}}));
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                                 const std::string& out_dir, bool plots) {
    ExperimentOutcome outcome = execute_run(cfg, seed);
    outcome.out_dir = out_dir;
    ExperimentConfig resolved = cfg;
    resolved.seed = seed;
    resolved.out_dir = out_dir;
    atomic_write_file(out_dir + "/config.resolved", render_config(resolved));
    atomic_write_file(out_dir + "/metrics.csv", metrics_csv(outcome.run));
    atomic_write_file(out_dir + "/summary.json", summary_json(outcome, resolved));
    if (plots) {
        write_run_plots(out_dir, outcome.run);
    }
    return outcome;
}

namespace {

// Short form for directory names and chart legends; sweep.csv keeps the
// exact 17-digit values.
std::string slug_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    std::string s = buf;
    for (char& c : s) {
        if (c == '.') c = 'p';
        if (c == '-') c = 'm';
        if (c == '+') c = '_';
    }
    return s;
}

}  // namespace

std::vector<SweepPoint> expand_sweep(const ExperimentConfig& base) {
    base.validate();
    // Cross product over the axes that are present, in a fixed axis order.
    std::vector<ExperimentConfig> combos{base};
    std::vector<std::vector<std::string>> combo_tags{{}};

    auto apply_axis = [&](auto&& values, auto&& apply, auto&& tag) {
        if (values.empty()) return;
        std::vector<ExperimentConfig> next;
        std::vector<std::vector<std::string>> next_tags;
        for (std::size_t ci = 0; ci < combos.size(); ++ci) {
            for (const auto& v : values) {
                ExperimentConfig cfg = combos[ci];
                apply(cfg, v);
                auto tags = combo_tags[ci];
                tags.push_back(tag(v));
                next.push_back(std::move(cfg));
                next_tags.push_back(std::move(tags));
            }
        }
        combos = std::move(next);
        combo_tags = std::move(next_tags);
    };

    apply_axis(
        base.sweep_alpha,
        [](ExperimentConfig& c, double a) { c.dirichlet_alpha = a; },
        [](double a) { return "alpha" + slug_double(a); });
    apply_axis(
        base.sweep_topology,
        [](ExperimentConfig& c, GraphKind k) { c.topology = k; },
        [](GraphKind k) { return to_string(k); });
    apply_axis(
        base.sweep_snr_db,
        [](ExperimentConfig& c, const SnrPoint& p) {
            if (p.noiseless) {
                c.noise_mode = NoiseMode::noiseless;
            } else {
                c.noise_mode = NoiseMode::snr_db;
                c.snr_db = p.snr_db;
            }
        },
        [](const SnrPoint& p) {
            return p.noiseless ? std::string("noiseless") : "snr" + slug_double(p.snr_db);
        });
    apply_axis(
        base.sweep_method,
        [](ExperimentConfig& c, Method m) { c.method = m; },
        [](Method m) { return to_string(m); });
    apply_axis(
        base.sweep_lr,
        [](ExperimentConfig& c, double lr) { c.lr = lr; },
        [](double lr) { return "lr" + slug_double(lr); });

    const std::vector<std::uint64_t>& seeds =
        base.sweep_seed.empty() ? base.seeds : base.sweep_seed;

    std::vector<SweepPoint> points;
    points.reserve(combos.size() * seeds.size());
    for (std::size_t ci = 0; ci < combos.size(); ++ci) {
        std::string combo;
        for (const std::string& tag : combo_tags[ci]) {
            if (!combo.empty()) combo += "_";
            combo += tag;
        }
        if (combo.empty()) combo = "base";
        for (std::uint64_t seed : seeds) {
            points.push_back({combos[ci], seed, combo});
        }
    }
    return points;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string csv =
        "combo,alpha,topology,snr,method,lr,seed,final_acc,final_gap,"
        "final_train_loss,final_test_loss,bound,lambda,mean_D,diverged,"
        "acc_std,gap_std,status\n";
    for (const SweepRow& r : rows) {
        const std::string snr = r.cfg.noise_mode == NoiseMode::noiseless
                                    ? "noiseless"
                                    : (r.cfg.noise_mode == NoiseMode::snr_db
                                           ? fmt_g17(r.cfg.snr_db)
                                           : "sigma" + fmt_g17(r.cfg.sigma));
        std::string status = "ok";
        if (r.failed) {
            status = "error: " + r.error;
            // keep the row RFC-4180 clean without quoting
            for (char& ch : status) {
                if (ch == ',' || ch == '\n') ch = ';';
            }
        } else if (r.diverged) {
            status = "diverged";
        }
        csv += join_csv_row(
            {r.combo, fmt_g17(r.cfg.dirichlet_alpha),
             r.cfg.mode == Mode::dfl ? to_string(r.cfg.topology) : "-", snr,
             to_string(r.cfg.method), fmt_g17(r.cfg.lr),
             r.aggregate ? "mean" : std::to_string(r.seed),
             r.failed ? "" : fmt_g17(r.final_acc),
             r.failed ? "" : fmt_g17(r.final_gap),
             r.failed ? "" : fmt_g17(r.final_train_loss),
             r.failed ? "" : fmt_g17(r.final_test_loss),
             r.bound_defined ? fmt_g17(r.bound_value) : "",
             r.failed ? "" : fmt_g17(r.lambda), r.failed ? "" : fmt_g17(r.mean_d),
             r.diverged ? "1" : "0", r.aggregate ? fmt_g17(r.acc_std) : "",
             r.aggregate ? fmt_g17(r.gap_std) : "", status});
    }
    return csv;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::string& out_dir,
                                bool plots, bool quiet) {
    const std::vector<SweepPoint> points = expand_sweep(base);
    if (!quiet) {
        std::map<std::string, int> combos;
        for (const SweepPoint& p : points) combos[p.combo] += 1;
        std::fprintf(stdout, "sweep: %zu combinations x seeds = %zu runs\n",
                     combos.size(), points.size());
        std::fflush(stdout);
    }

    std::vector<SweepRow> rows;
    // Per-combo accumulated metrics for aggregates and the sweep chart.
    struct ComboAccum {
        ExperimentConfig cfg;
        std::vector<double> accs;
        std::vector<double> gaps;
        std::vector<SweepRow> seed_rows;
        // mean test-acc trajectory across seeds
        std::vector<double> rounds;
        std::vector<double> acc_sum;
        int curves = 0;
    };
    std::vector<std::string> combo_order;
    std::map<std::string, ComboAccum> accum;

    for (const SweepPoint& point : points) {
        if (accum.find(point.combo) == accum.end()) {
            combo_order.push_back(point.combo);
            accum[point.combo].cfg = point.cfg;
        }
        SweepRow row;
        row.combo = point.combo;
        row.cfg = point.cfg;
        row.seed = point.seed;
        const std::string run_dir =
            out_dir + "/runs/" + point.combo + "/seed" + std::to_string(point.seed);
        try {
            const ExperimentOutcome outcome =
                run_experiment(point.cfg, point.seed, run_dir, plots);
            const RoundMetrics& f = outcome.run.metrics.back();
            row.final_acc = f.test_acc;
            row.final_gap = f.gap;
            row.final_train_loss = f.train_loss;
            row.final_test_loss = f.test_loss;
            row.bound_value = outcome.bound_value;
            row.bound_defined = outcome.bound_defined;
            row.lambda = outcome.run.lambda;
            double mean_d = 0.0;
            for (double d : outcome.constants.D) mean_d += d;
            row.mean_d = outcome.constants.D.empty()
                             ? 0.0
                             : mean_d / static_cast<double>(outcome.constants.D.size());
            row.diverged = outcome.run.diverged;

            ComboAccum& acc = accum[point.combo];
            if (!outcome.run.diverged) {
                acc.accs.push_back(row.final_acc);
                acc.gaps.push_back(row.final_gap);
                if (acc.rounds.empty()) {
                    for (const RoundMetrics& m : outcome.run.metrics) {
                        acc.rounds.push_back(m.round);
                        acc.acc_sum.push_back(m.test_acc);
                    }
                    acc.curves = 1;
                } else if (acc.rounds.size() == outcome.run.metrics.size()) {
                    for (std::size_t i = 0; i < acc.rounds.size(); ++i) {
                        acc.acc_sum[i] += outcome.run.metrics[i].test_acc;
                    }
                    acc.curves += 1;
                }
            }
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        if (!quiet) {
            std::fprintf(stdout, "  %s seed=%llu %s\n", point.combo.c_str(),
                         static_cast<unsigned long long>(point.seed),
                         row.failed ? row.error.c_str()
                                    : (row.diverged ? "diverged" : "ok"));
            std::fflush(stdout);
        }
        accum[point.combo].seed_rows.push_back(row);
        rows.push_back(std::move(row));
    }

    // Aggregates: mean and std of the per-seed finals.
    std::vector<SweepRow> with_aggregates = rows;
    for (const std::string& combo : combo_order) {
        const ComboAccum& acc = accum[combo];
        if (acc.accs.empty()) continue;
        SweepRow agg;
        agg.combo = combo;
        agg.cfg = acc.cfg;
        agg.aggregate = true;
        const auto n = static_cast<double>(acc.accs.size());
        for (double v : acc.accs) agg.final_acc += v;
        for (double v : acc.gaps) agg.final_gap += v;
        agg.final_acc /= n;
        agg.final_gap /= n;
        double acc_var = 0.0;
        double gap_var = 0.0;
        for (double v : acc.accs) acc_var += (v - agg.final_acc) * (v - agg.final_acc);
        for (double v : acc.gaps) gap_var += (v - agg.final_gap) * (v - agg.final_gap);
        agg.acc_std = std::sqrt(acc_var / n);
        agg.gap_std = std::sqrt(gap_var / n);
        // lambda / bound / mean_D are deterministic per combo up to seeds;
        // report the mean of the defined values.
        double bound_sum = 0.0;
        int bound_count = 0;
        double lambda_sum = 0.0;
        double mean_d_sum = 0.0;
        double train_sum = 0.0;
        double test_sum = 0.0;
        int ok_count = 0;
        for (const SweepRow& r : acc.seed_rows) {
            if (r.failed) continue;
            ok_count += 1;
            lambda_sum += r.lambda;
            mean_d_sum += r.mean_d;
            train_sum += r.final_train_loss;
            test_sum += r.final_test_loss;
            if (r.bound_defined) {
                bound_sum += r.bound_value;
                bound_count += 1;
            }
        }
        if (ok_count > 0) {
            agg.lambda = lambda_sum / ok_count;
            agg.mean_d = mean_d_sum / ok_count;
            agg.final_train_loss = train_sum / ok_count;
            agg.final_test_loss = test_sum / ok_count;
        }
        if (bound_count > 0) {
            agg.bound_value = bound_sum / bound_count;
            agg.bound_defined = true;
        }
        with_aggregates.push_back(agg);
    }

    atomic_write_file(out_dir + "/sweep.csv", sweep_csv(with_aggregates));

    if (plots) {
        std::vector<Series> series;
        for (const std::string& combo : combo_order) {
            const ComboAccum& acc = accum[combo];
            if (acc.curves == 0) continue;
            Series s;
            s.name = combo;
            s.x = acc.rounds;
            s.y = acc.acc_sum;
            for (double& v : s.y) v /= acc.curves;
            series.push_back(std::move(s));
        }
        if (!series.empty()) {
            atomic_write_file(out_dir + "/sweep_accuracy.svg",
                              render_line_chart("Mean test accuracy", "round",
                                                "accuracy", series));
        }
    }
    return with_aggregates;
}

}  // namespace feelsim
