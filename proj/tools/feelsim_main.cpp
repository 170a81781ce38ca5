// feelsim: federated edge learning simulator over noisy channels.
//
// Subcommands:
//   simulate <config>    run one experiment, write metrics/summary/plots
//   sweep <config>       cross swept axes x seeds, write sweep.csv
//   bound <constants>    evaluate the closed-form generalization bounds
//   topology             print mixing-matrix spectrum and contraction table
//   partition <config>   print per-client label histograms and D_i values
//
// Exit codes: 0 ok, 2 config error, 3 runtime error, 4 diverged (simulate).

#include <cmath>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "feelsim/bounds.hpp"
#include "feelsim/config.hpp"
#include "feelsim/errors.hpp"
#include "feelsim/experiment.hpp"
#include "feelsim/io.hpp"
#include "feelsim/topology.hpp"

namespace {

using namespace feelsim;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitDiverged = 4;

struct CommonOpts {
    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool has_seed_override = false;
    bool quiet = false;
    bool no_plots = false;
};

ExperimentConfig load_config(const CommonOpts& opts) {
    ExperimentConfig cfg = parse_config(opts.config_path);
    if (opts.has_seed_override) {
        cfg.seed = opts.seed_override;
    }
    if (!opts.out_override.empty()) {
        cfg.out_dir = opts.out_override;
    }
    if (opts.no_plots) {
        cfg.plots = false;
    }
    return cfg;
}

int cmd_simulate(const CommonOpts& opts) {
    const ExperimentConfig cfg = load_config(opts);
    const ExperimentOutcome outcome =
        run_experiment(cfg, cfg.seed, cfg.out_dir, cfg.plots);
    if (!opts.quiet) {
        const RoundMetrics& f = outcome.run.metrics.back();
        std::printf("run: mode=%s method=%s seed=%llu rounds=%d\n",
                    to_string(cfg.mode).c_str(), to_string(cfg.method).c_str(),
                    static_cast<unsigned long long>(outcome.seed), cfg.rounds);
        std::printf("final: round=%d train_loss=%s test_loss=%s test_acc=%s gap=%s\n",
                    f.round, fmt_fixed(f.train_loss).c_str(),
                    fmt_fixed(f.test_loss).c_str(), fmt_fixed(f.test_acc).c_str(),
                    fmt_fixed(f.gap).c_str());
        if (outcome.bound_defined) {
            std::printf("bound: %s (lambda=%s)\n", fmt_g17(outcome.bound_value).c_str(),
                        fmt_fixed(outcome.run.lambda).c_str());
        } else {
            std::printf("bound: undefined (noiseless channel)\n");
        }
        std::printf("artifacts: %s\n", cfg.out_dir.c_str());
        if (outcome.run.diverged) {
            std::printf("status: DIVERGED at round %d\n", outcome.run.diverged_round);
        }
    }
    return outcome.run.diverged ? kExitDiverged : kExitOk;
}

int cmd_sweep(const CommonOpts& opts) {
    const ExperimentConfig cfg = load_config(opts);
    run_sweep(cfg, cfg.out_dir, cfg.plots, opts.quiet);
    if (!opts.quiet) {
        std::printf("sweep written to %s/sweep.csv\n", cfg.out_dir.c_str());
    }
    return kExitOk;
}

int cmd_bound(const std::string& path, bool quiet) {
    const BoundInputs in = parse_bound_inputs(path);
    std::string csv = "bound,value\n";
    if (!quiet) {
        std::printf("constants: R=%s L=%s N=%d n=%d T=%d lambda=%s sigma_sq=%s d=%zu\n",
                    fmt_g17(in.constants.R).c_str(), fmt_g17(in.constants.L).c_str(),
                    in.constants.n_devices, in.constants.samples_per_device,
                    in.constants.rounds, fmt_g17(in.constants.lambda).c_str(),
                    fmt_g17(in.constants.sigma_sq).c_str(), in.constants.d);
    }
    if (in.constants.rounds == 0 || in.sigma_given) {
        const double cfl = bound_cfl(in.constants);
        const double dfl = bound_dfl(in.constants);
        if (!quiet) {
            std::printf("CFL bound:     %s\n", fmt_g17(cfl).c_str());
            std::printf("DFL bound:     %s\n", fmt_g17(dfl).c_str());
        }
        csv += "cfl," + fmt_g17(cfl) + "\n";
        csv += "dfl," + fmt_g17(dfl) + "\n";
    } else if (!quiet) {
        std::printf("CFL/DFL bounds: undefined (sigma_sq = 0)\n");
    }
    if (in.mi.has_value()) {
        const double gen = bound_generic(*in.mi, in.constants.R,
                                         in.constants.samples_per_device,
                                         in.constants.n_devices);
        if (!quiet) {
            std::printf("generic bound: %s\n", fmt_g17(gen).c_str());
        }
        csv += "generic," + fmt_g17(gen) + "\n";
    }
    std::printf("%s", csv.c_str());
    return kExitOk;
}

int cmd_topology(const std::string& kind, int n, double p, std::uint64_t seed,
                 int k_max) {
    const GraphKind gk = graph_kind_from_string(kind);
    const Graph g = build_graph(gk, n, p, RngStream(seed, stream::kGraph));
    const MixingMatrix mixing = metropolis_weights(g);
    std::printf("n,edges,lambda\n%d,%zu,%s\n", g.n, g.edges.size(),
                fmt_g17(mixing.lambda_value).c_str());
    std::printf("k,norm,lambda_pow\n");
    for (const ContractionRow& row : contraction_check(mixing, k_max)) {
        std::printf("%d,%s,%s\n", row.k, fmt_g17(row.norm).c_str(),
                    fmt_g17(row.lambda_pow).c_str());
    }
    return kExitOk;
}

int cmd_partition(const CommonOpts& opts) {
    const ExperimentConfig cfg = load_config(opts);
    const RngStream root(cfg.seed);
    const MixtureSpec mixture =
        make_sphere_mixture(cfg.classes, cfg.feature_dim, cfg.mean_radius,
                            cfg.class_std, root.substream(stream::kMixture));
    const auto total = static_cast<std::size_t>(cfg.oversample * cfg.devices *
                                                cfg.samples_per_device);
    const Vec uniform(cfg.classes, 1.0 / cfg.classes);
    const LabeledDataset source =
        gen_synthetic(mixture, total, uniform, root.substream(stream::kDataGen));
    const ClientPartition part =
        dirichlet_partition(source, cfg.classes, cfg.devices, cfg.dirichlet_alpha,
                            cfg.samples_per_device, root.substream(stream::kPartition));
    const Vec d = heterogeneity(part);

    std::string header = "client";
    for (int c = 0; c < cfg.classes; ++c) {
        header += ",class" + std::to_string(c);
    }
    header += ",D";
    std::printf("%s\n", header.c_str());
    for (int dev = 0; dev < part.devices(); ++dev) {
        std::string row = std::to_string(dev);
        const auto n = static_cast<double>(part.clients[dev].size());
        for (int c = 0; c < cfg.classes; ++c) {
            const auto count =
                static_cast<long>(std::lround(part.label_marginals[dev][c] * n));
            row += "," + std::to_string(count);
        }
        row += "," + fmt_g17(d[dev]);
        std::printf("%s\n", row.c_str());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feelsim: federated edge learning simulator over noisy channels"};
    app.require_subcommand(1);

    CommonOpts opts;

    auto add_common = [&](CLI::App* sub, bool with_config) {
        if (with_config) {
            sub->add_option("config", opts.config_path, "key = value config file")
                ->required();
        }
        sub->add_option("--seed", opts.seed_override, "override the config seed")
            ->each([&](const std::string&) { opts.has_seed_override = true; });
        sub->add_option("--out", opts.out_override, "override out_dir");
        sub->add_flag("--quiet", opts.quiet, "suppress progress output");
        sub->add_flag("--no-plots", opts.no_plots, "skip SVG plot generation");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "run one experiment");
    add_common(simulate, true);

    CLI::App* sweep = app.add_subcommand("sweep", "run a config sweep");
    add_common(sweep, true);

    std::string bound_path;
    CLI::App* bound = app.add_subcommand("bound", "evaluate generalization bounds");
    bound->add_option("constants", bound_path, "constants file")->required();
    bound->add_flag("--quiet", opts.quiet, "CSV only");

    std::string topo_kind = "complete";
    int topo_n = 10;
    double topo_p = 0.01;
    std::uint64_t topo_seed = 0;
    int topo_kmax = 10;
    CLI::App* topo = app.add_subcommand("topology", "inspect a mixing matrix");
    topo->add_option("--kind", topo_kind, "complete|ring|star|erdos_renyi")->required();
    topo->add_option("--n", topo_n, "node count")->required();
    topo->add_option("--p", topo_p, "ER edge probability");
    topo->add_option("--seed", topo_seed, "ER seed");
    topo->add_option("--k-max", topo_kmax, "contraction table depth");

    CLI::App* partition = app.add_subcommand("partition", "inspect a data partition");
    add_common(partition, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(opts);
        if (sweep->parsed()) return cmd_sweep(opts);
        if (bound->parsed()) return cmd_bound(bound_path, opts.quiet);
        if (topo->parsed()) {
            return cmd_topology(topo_kind, topo_n, topo_p, topo_seed, topo_kmax);
        }
        if (partition->parsed()) return cmd_partition(opts);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const ParameterError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
