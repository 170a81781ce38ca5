#include <doctest.h>

#include <cmath>
#include <set>

#include "feelsim/errors.hpp"
#include "feelsim/linalg.hpp"
#include "feelsim/trainer.hpp"
#include "test_helpers.hpp"

using namespace feelsim;

namespace {

MixtureSpec mix_for(int classes, int feature_dim) {
    return make_sphere_mixture(classes, feature_dim, 3.0, 1.0, RngStream(1234, 9));
}

ClientPartition make_partition(std::vector<LabeledDataset> clients, int classes) {
    ClientPartition p;
    p.classes = classes;
    for (LabeledDataset& ds : clients) {
        p.label_marginals.push_back(ds.label_marginal(classes));
        p.clients.push_back(std::move(ds));
    }
    return p;
}

// Test fixture: N clients of n samples each plus a test set, all synthetic.
struct Instance {
    ModelSpec spec;
    ClientPartition partition;
    LabeledDataset test;
};

Instance make_instance(int devices, int per_device, int classes = 3,
                       int feature_dim = 4, std::uint64_t seed = 5) {
    Instance inst;
    inst.spec.arch = Arch::logistic;
    inst.spec.feature_dim = feature_dim;
    inst.spec.classes = classes;
    const MixtureSpec mixture = mix_for(classes, feature_dim);
    const Vec uniform(classes, 1.0 / classes);
    std::vector<LabeledDataset> clients;
    for (int i = 0; i < devices; ++i) {
        clients.push_back(gen_synthetic(mixture, per_device, uniform,
                                        RngStream(seed, 100 + i)));
    }
    inst.partition = make_partition(std::move(clients), classes);
    inst.test = gen_synthetic(mixture, 300, uniform, RngStream(seed, 999));
    return inst;
}

// Straight-line reimplementation of the centralized update rule
//   W <- W - (eta_t/N) sum_i g_i + eps_t
// with the same batch schedule and noise substreams as the trainer.
Vec oracle_cfl(const TrainConfig& cfg, const ModelSpec& spec,
               const ClientPartition& part, const ChannelSpec& channel) {
    const RngStream root(cfg.seed);
    const int n_dev = part.devices();
    std::vector<BatchScheduler> sched;
    for (int i = 0; i < n_dev; ++i) {
        sched.emplace_back(static_cast<int>(part.clients[i].size()), cfg.batch_size,
                           root.substream(stream::kShuffle, i));
    }
    Vec w(spec.param_dim(), 0.0);
    for (int t = 1; t <= cfg.rounds; ++t) {
        Vec gsum(w.size(), 0.0);
        for (int i = 0; i < n_dev; ++i) {
            const Vec g = grad(spec, w, Batch::of(part.clients[i], sched[i].next()));
            for (std::size_t j = 0; j < w.size(); ++j) {
                gsum[j] += g[j];
            }
        }
        const double coef = cfg.eta(t) / static_cast<double>(n_dev);
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] = w[j] - coef * gsum[j];
        }
        RngStream noise = root.substream(stream::kChannelNoise, t);
        const double sigma = resolve_sigma(channel, w);
        if (sigma > 0.0) {
            for (std::size_t j = 0; j < w.size(); ++j) {
                w[j] = w[j] + sigma * noise.next_gauss();
            }
        }
    }
    return w;
}

// Straight-line reimplementation of the decentralized update rule
//   W_i <- sum_j theta_ij W_j - eta_t g_i + eps_i_t.
std::vector<Vec> oracle_dfl(const TrainConfig& cfg, const ModelSpec& spec,
                            const ClientPartition& part, const MixingMatrix& mixing,
                            const ChannelSpec& channel) {
    const RngStream root(cfg.seed);
    const int n_dev = part.devices();
    const std::size_t dim = spec.param_dim();
    std::vector<BatchScheduler> sched;
    for (int i = 0; i < n_dev; ++i) {
        sched.emplace_back(static_cast<int>(part.clients[i].size()), cfg.batch_size,
                           root.substream(stream::kShuffle, i));
    }
    std::vector<Vec> models(n_dev, Vec(dim, 0.0));
    for (int t = 1; t <= cfg.rounds; ++t) {
        std::vector<Vec> batch_grads(n_dev);
        std::vector<Vec> mixed(n_dev, Vec(dim, 0.0));
        for (int i = 0; i < n_dev; ++i) {
            for (int j = 0; j < n_dev; ++j) {
                const double theta_ij = mixing.theta(i, j);
                if (theta_ij == 0.0) continue;
                for (std::size_t k = 0; k < dim; ++k) {
                    mixed[i][k] += theta_ij * models[j][k];
                }
            }
            batch_grads[i] =
                grad(spec, models[i], Batch::of(part.clients[i], sched[i].next()));
        }
        const double eta_t = cfg.eta(t);
        for (int i = 0; i < n_dev; ++i) {
            for (std::size_t k = 0; k < dim; ++k) {
                mixed[i][k] -= eta_t * batch_grads[i][k];
            }
            const double sigma = resolve_sigma(channel, mixed[i]);
            if (sigma > 0.0) {
                RngStream noise = root.substream(stream::kChannelNoise, t, i);
                for (std::size_t k = 0; k < dim; ++k) {
                    mixed[i][k] += sigma * noise.next_gauss();
                }
            }
            models[i] = mixed[i];
        }
    }
    return models;
}

}  // namespace

TEST_CASE("run_cfl: zero rounds returns the zero model and one metrics row") {
    const Instance inst = make_instance(2, 8);
    TrainConfig cfg;
    cfg.rounds = 0;
    ChannelSpec noiseless;
    const RunResult result = run_cfl(cfg, inst.spec, inst.partition, noiseless, inst.test);
    CHECK(nrm2(result.final_model) == 0.0);
    REQUIRE(result.metrics.size() == 1);
    CHECK(result.metrics[0].round == 0);
    CHECK(result.metrics[0].test_acc ==
          doctest::Approx(accuracy(inst.spec, result.final_model, inst.test)));
    CHECK(std::abs(result.metrics[0].train_loss - std::log(3.0)) < 1e-12);
    CHECK(std::abs(result.metrics[0].gap) < 1e-12);
}

TEST_CASE("run_cfl: N=1 noiseless equals plain centralized SGD bitwise") {
    const Instance inst = make_instance(1, 12);
    TrainConfig cfg;
    cfg.rounds = 7;
    cfg.batch_size = 4;
    cfg.lr = 0.2;
    cfg.seed = 42;
    ChannelSpec noiseless;
    const RunResult result = run_cfl(cfg, inst.spec, inst.partition, noiseless, inst.test);

    // Plain SGD with the same per-epoch shuffled batches.
    const RngStream root(cfg.seed);
    BatchScheduler sched(12, 4, root.substream(stream::kShuffle, 0));
    Vec w(inst.spec.param_dim(), 0.0);
    for (int t = 1; t <= cfg.rounds; ++t) {
        const Vec g = grad(inst.spec, w, Batch::of(inst.partition.clients[0], sched.next()));
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] = w[j] - cfg.lr * g[j];
        }
    }
    CHECK(result.final_model == w);
}

TEST_CASE("run_cfl: 3-round trajectory matches the straight-line oracle bitwise") {
    const Instance inst = make_instance(2, 8);
    TrainConfig cfg;
    cfg.rounds = 3;
    cfg.batch_size = 4;
    cfg.lr = 0.1;
    cfg.seed = 7;

    SUBCASE("noiseless") {
        ChannelSpec channel;
        const RunResult result =
            run_cfl(cfg, inst.spec, inst.partition, channel, inst.test);
        CHECK(result.final_model == oracle_cfl(cfg, inst.spec, inst.partition, channel));
    }
    SUBCASE("with channel noise") {
        ChannelSpec channel;
        channel.mode = NoiseMode::sigma;
        channel.value = 0.05;
        const RunResult result =
            run_cfl(cfg, inst.spec, inst.partition, channel, inst.test);
        CHECK(result.final_model == oracle_cfl(cfg, inst.spec, inst.partition, channel));
    }
}

TEST_CASE("run_dfl: 2-round star trajectory matches the straight-line oracle bitwise") {
    const Instance inst = make_instance(3, 6);
    const MixingMatrix mixing =
        metropolis_weights(build_graph(GraphKind::star, 3, 0, RngStream(0)));
    TrainConfig cfg;
    cfg.mode = Mode::dfl;
    cfg.rounds = 2;
    cfg.batch_size = 3;
    cfg.lr = 0.15;
    cfg.seed = 11;

    SUBCASE("noiseless") {
        ChannelSpec channel;
        const RunResult result =
            run_dfl(cfg, inst.spec, inst.partition, mixing, channel, inst.test);
        const auto expect = oracle_dfl(cfg, inst.spec, inst.partition, mixing, channel);
        REQUIRE(result.device_models.size() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(result.device_models[i] == expect[i]);
        }
    }
    SUBCASE("with per-device noise") {
        ChannelSpec channel;
        channel.mode = NoiseMode::sigma;
        channel.value = 0.02;
        const RunResult result =
            run_dfl(cfg, inst.spec, inst.partition, mixing, channel, inst.test);
        const auto expect = oracle_dfl(cfg, inst.spec, inst.partition, mixing, channel);
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(result.device_models[i] == expect[i]);
        }
    }
}

TEST_CASE("run_dfl: single node with self-loop weight 1 equals run_cfl") {
    const Instance inst = make_instance(1, 10);
    MixingMatrix self_loop;
    self_loop.theta = Mat::identity(1);
    self_loop.lambda_value = 0.0;
    TrainConfig cfg;
    cfg.rounds = 5;
    cfg.batch_size = 5;
    cfg.lr = 0.3;
    cfg.seed = 2;
    ChannelSpec noiseless;
    cfg.mode = Mode::dfl;
    const RunResult dfl =
        run_dfl(cfg, inst.spec, inst.partition, self_loop, noiseless, inst.test);
    cfg.mode = Mode::cfl;
    const RunResult cfl = run_cfl(cfg, inst.spec, inst.partition, noiseless, inst.test);
    CHECK(dfl.final_model == cfl.final_model);
}

TEST_CASE("run_dfl: complete graph equalizes devices after the mixing step") {
    const Instance inst = make_instance(4, 6);
    const MixingMatrix mixing =
        metropolis_weights(build_graph(GraphKind::complete, 4, 0, RngStream(0)));
    TrainConfig cfg;
    cfg.mode = Mode::dfl;
    cfg.rounds = 3;
    cfg.batch_size = 2;
    cfg.lr = 0.1;
    ChannelSpec noiseless;
    const RunResult result =
        run_dfl(cfg, inst.spec, inst.partition, mixing, noiseless, inst.test);
    // Apply the mixing step to the final device models by hand: every row of
    // Theta must produce the same vector.
    const std::size_t dim = inst.spec.param_dim();
    std::vector<Vec> mixed(4, Vec(dim, 0.0));
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            for (std::size_t k = 0; k < dim; ++k) {
                mixed[i][k] += mixing.theta(i, j) * result.device_models[j][k];
            }
        }
    }
    for (int i = 1; i < 4; ++i) {
        for (std::size_t k = 0; k < dim; ++k) {
            CHECK(std::abs(mixed[i][k] - mixed[0][k]) < 1e-12);
        }
    }
}

TEST_CASE("run_cfl: 2 identical devices with full batches equal pooled SGD") {
    // Same dataset on both devices, full-batch gradients, no noise: the
    // averaged update collapses to single-machine SGD on one copy.
    const MixtureSpec mixture = mix_for(3, 4);
    const Vec uniform(3, 1.0 / 3.0);
    LabeledDataset data = gen_synthetic(mixture, 10, uniform, RngStream(3, 77));
    ClientPartition part = make_partition({data, data}, 3);
    ModelSpec spec;
    spec.arch = Arch::logistic;
    spec.feature_dim = 4;
    spec.classes = 3;
    const LabeledDataset test = gen_synthetic(mixture, 100, uniform, RngStream(3, 88));

    TrainConfig cfg;
    cfg.rounds = 6;
    cfg.batch_size = 10;  // full batch
    cfg.lr = 0.25;
    ChannelSpec noiseless;
    const RunResult result = run_cfl(cfg, spec, part, noiseless, test);

    Vec w(spec.param_dim(), 0.0);
    for (int t = 1; t <= cfg.rounds; ++t) {
        const Vec g = grad(spec, w, Batch::whole(data));
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] = w[j] - cfg.lr * g[j];
        }
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
        CHECK(result.final_model[j] == doctest::Approx(w[j]).epsilon(1e-15));
    }
}

TEST_CASE("local_gradient: dispatch degenerations") {
    const auto inst = feelsim::test::random_instance(6, Arch::logistic);
    const Batch b = Batch::whole(inst.data);
    const Vec base = grad(inst.spec, inst.w, b);
    const Vec w0(inst.w.size(), 0.0);

    const Vec gmir0 = local_gradient(Method::fedgmir, inst.spec, inst.w, w0, b, 0.0, 0.0);
    CHECK(gmir0 == base);
    const Vec prox0 = local_gradient(Method::fedprox, inst.spec, inst.w, w0, b, 0.0, 0.0);
    CHECK(prox0 == base);
    // fedgmir evaluated exactly at the prior: the regularizer gradient is 0.
    const Vec gmir_at_prior =
        local_gradient(Method::fedgmir, inst.spec, inst.w, inst.w, b, 3.0, 0.0);
    CHECK(feelsim::test::rel_error(gmir_at_prior, base) < 1e-15);
}

TEST_CASE("evaluate: zero model, eval cadence, and overfitting gap") {
    SUBCASE("zero weights: train = test = ln C") {
        const Instance inst = make_instance(3, 10);
        const Vec zero(inst.spec.param_dim(), 0.0);
        const RoundMetrics m = evaluate(inst.spec, zero, inst.partition, inst.test, 0);
        CHECK(std::abs(m.train_loss - std::log(3.0)) < 1e-12);
        CHECK(std::abs(m.test_loss - std::log(3.0)) < 1e-12);
        CHECK(std::abs(m.gap) < 1e-12);
    }
    SUBCASE("T=20 with eval_every=5 yields 5 evaluation points") {
        const Instance inst = make_instance(2, 10);
        TrainConfig cfg;
        cfg.rounds = 20;
        cfg.eval_every = 5;
        cfg.lr = 0.05;
        ChannelSpec noiseless;
        const RunResult result =
            run_cfl(cfg, inst.spec, inst.partition, noiseless, inst.test);
        REQUIRE(result.metrics.size() == 5);
        CHECK(result.metrics.front().round == 0);
        CHECK(result.metrics.back().round == 20);
    }
    SUBCASE("memorizing a 5-sample set yields a positive gap") {
        const MixtureSpec mixture = mix_for(3, 4);
        const Vec uniform(3, 1.0 / 3.0);
        LabeledDataset tiny = gen_synthetic(mixture, 5, uniform, RngStream(8, 3));
        ClientPartition part = make_partition({tiny}, 3);
        ModelSpec spec;
        spec.arch = Arch::logistic;
        spec.feature_dim = 4;
        spec.classes = 3;
        const LabeledDataset test = gen_synthetic(mixture, 2000, uniform, RngStream(8, 4));
        Vec w(spec.param_dim(), 0.0);
        for (int it = 0; it < 3000; ++it) {
            axpy(-0.5, grad(spec, w, Batch::whole(tiny)), w);
        }
        const RoundMetrics m = evaluate(spec, w, part, test, 0);
        CHECK(m.train_loss < 0.05);
        CHECK(m.gap > 0.0);
    }
}

TEST_CASE("batch scheduling: every sample exactly once per ceil(n/bs) rounds") {
    const RngStream root(21);
    BatchScheduler sched(8, 3, root.substream(stream::kShuffle, 0));
    CHECK(sched.batches_per_epoch() == 3);
    for (int epoch = 0; epoch < 4; ++epoch) {
        std::multiset<int> seen;
        std::size_t total = 0;
        for (int b = 0; b < 3; ++b) {
            for (int idx : sched.next()) {
                seen.insert(idx);
                total += 1;
            }
        }
        CHECK(total == 8);
        for (int i = 0; i < 8; ++i) {
            CHECK(seen.count(i) == 1);  // exactly once per epoch
        }
    }
}

TEST_CASE("batch scheduling: epochs are reshuffled") {
    const RngStream root(33);
    BatchScheduler sched(16, 16, root.substream(stream::kShuffle, 0));
    // Full-batch mode serves the identity order (stable full-batch runs).
    const std::vector<int> first = sched.next();
    for (int i = 0; i < 16; ++i) CHECK(first[i] == i);

    BatchScheduler mini(16, 4, root.substream(stream::kShuffle, 1));
    std::vector<int> epoch0;
    std::vector<int> epoch1;
    for (int b = 0; b < 4; ++b) {
        for (int idx : mini.next()) epoch0.push_back(idx);
    }
    for (int b = 0; b < 4; ++b) {
        for (int idx : mini.next()) epoch1.push_back(idx);
    }
    CHECK(epoch0 != epoch1);
}

TEST_CASE("determinism: thread count does not change the trajectory") {
    const Instance inst = make_instance(6, 16);
    TrainConfig cfg;
    cfg.rounds = 12;
    cfg.batch_size = 4;
    cfg.lr = 0.1;
    cfg.seed = 19;
    ChannelSpec channel;
    channel.mode = NoiseMode::snr_db;
    channel.value = 30.0;

    cfg.threads = 1;
    const RunResult serial = run_cfl(cfg, inst.spec, inst.partition, channel, inst.test);
    cfg.threads = 4;
    const RunResult parallel = run_cfl(cfg, inst.spec, inst.partition, channel, inst.test);
    CHECK(serial.final_model == parallel.final_model);
    REQUIRE(serial.metrics.size() == parallel.metrics.size());
    for (std::size_t i = 0; i < serial.metrics.size(); ++i) {
        CHECK(serial.metrics[i].train_loss == parallel.metrics[i].train_loss);
        CHECK(serial.metrics[i].test_acc == parallel.metrics[i].test_acc);
    }

    const MixingMatrix mixing =
        metropolis_weights(build_graph(GraphKind::ring, 6, 0, RngStream(0)));
    cfg.mode = Mode::dfl;
    cfg.threads = 1;
    const RunResult dfl_serial =
        run_dfl(cfg, inst.spec, inst.partition, mixing, channel, inst.test);
    cfg.threads = 3;
    const RunResult dfl_parallel =
        run_dfl(cfg, inst.spec, inst.partition, mixing, channel, inst.test);
    CHECK(dfl_serial.final_model == dfl_parallel.final_model);
}

TEST_CASE("divergence: runaway learning rate flags instead of crashing") {
    const Instance inst = make_instance(2, 8);
    TrainConfig cfg;
    cfg.rounds = 50;
    // Cross-entropy on bounded features has bounded gradients, so the iterate
    // grows by ~lr per round; only a near-overflow rate reaches non-finite.
    cfg.lr = 1e308;
    cfg.eval_every = 1000;  // force detection through the parameter check
    ChannelSpec noiseless;
    const RunResult result = run_cfl(cfg, inst.spec, inst.partition, noiseless, inst.test);
    CHECK(result.diverged);
    CHECK(result.diverged_round >= 1);
}

TEST_CASE("learning-rate schedules: inv_sqrt decays and matches the oracle") {
    TrainConfig cfg;
    cfg.lr = 0.4;
    cfg.lr_schedule = LrSchedule::inv_sqrt;
    CHECK(cfg.eta(1) == 0.4);
    CHECK(cfg.eta(4) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(cfg.eta(9) > cfg.eta(16));

    const Instance inst = make_instance(2, 8);
    cfg.rounds = 5;
    cfg.batch_size = 4;
    cfg.seed = 31;
    ChannelSpec noiseless;
    const RunResult run = run_cfl(cfg, inst.spec, inst.partition, noiseless, inst.test);
    REQUIRE(run.eta_used.size() == 5);
    CHECK(run.eta_used[3] == doctest::Approx(0.2).epsilon(1e-15));

    // Straight-line oracle under the decayed schedule, bitwise.
    const RngStream root(cfg.seed);
    std::vector<BatchScheduler> sched;
    for (int i = 0; i < 2; ++i) {
        sched.emplace_back(8, 4, root.substream(stream::kShuffle, i));
    }
    Vec w(inst.spec.param_dim(), 0.0);
    for (int t = 1; t <= cfg.rounds; ++t) {
        Vec gsum(w.size(), 0.0);
        for (int i = 0; i < 2; ++i) {
            const Vec g =
                grad(inst.spec, w, Batch::of(inst.partition.clients[i], sched[i].next()));
            for (std::size_t j = 0; j < w.size(); ++j) gsum[j] += g[j];
        }
        const double coef = cfg.eta(t) / 2.0;
        for (std::size_t j = 0; j < w.size(); ++j) w[j] = w[j] - coef * gsum[j];
    }
    CHECK(run.final_model == w);
}

TEST_CASE("beta decay: per-round multiplicative schedule") {
    TrainConfig cfg;
    cfg.beta = 0.5;
    cfg.beta_decay = 0.9;
    CHECK(cfg.beta_at(1) == 0.5);
    CHECK(cfg.beta_at(2) == doctest::Approx(0.45).epsilon(1e-15));
    CHECK(cfg.beta_at(11) == doctest::Approx(0.5 * std::pow(0.9, 10)).epsilon(1e-12));

    const Instance inst = make_instance(2, 10);
    cfg.method = Method::fedgmir;
    cfg.rounds = 15;
    cfg.batch_size = 5;
    cfg.lr = 0.3;
    ChannelSpec noiseless;
    const RunResult run = run_cfl(cfg, inst.spec, inst.partition, noiseless, inst.test);
    CHECK_FALSE(run.diverged);
}

TEST_CASE("fedgmir and fedprox training runs stay finite") {
    const Instance inst = make_instance(3, 12);
    ChannelSpec channel;
    channel.mode = NoiseMode::snr_db;
    channel.value = 40.0;
    for (Method method : {Method::fedgmir, Method::fedprox}) {
        TrainConfig cfg;
        cfg.method = method;
        cfg.rounds = 20;
        cfg.batch_size = 4;
        cfg.beta = 1.0;
        cfg.mu_prox = 0.5;
        const RunResult result =
            run_cfl(cfg, inst.spec, inst.partition, channel, inst.test);
        CHECK_FALSE(result.diverged);
        CHECK(all_finite(result.final_model));
    }
}
