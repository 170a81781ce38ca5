#include <benchmark/benchmark.h>

#include "feelsim/bounds.hpp"
#include "feelsim/config.hpp"
#include "feelsim/experiment.hpp"
#include "feelsim/linalg.hpp"
#include "feelsim/model.hpp"
#include "feelsim/rng.hpp"
#include "feelsim/topology.hpp"
#include "feelsim/trainer.hpp"

using namespace feelsim;

namespace {

Mat random_symmetric(std::size_t n) {
    RngStream rng(7, n);
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = rng.next_gauss();
            m(i, j) = v;
            m(j, i) = v;
        }
    }
    return m;
}

void BM_sym_eigvals(benchmark::State& state) {
    const Mat m = random_symmetric(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(sym_eigvals(m));
    }
}
BENCHMARK(BM_sym_eigvals)->Arg(10)->Arg(50)->Arg(100);

void BM_metropolis_lambda(benchmark::State& state) {
    const Graph g = build_graph(GraphKind::erdos_renyi, static_cast<int>(state.range(0)),
                                0.2, RngStream(3));
    for (auto _ : state) {
        benchmark::DoNotOptimize(metropolis_weights(g).lambda_value);
    }
}
BENCHMARK(BM_metropolis_lambda)->Arg(10)->Arg(50);

struct ModelFixture {
    ModelSpec spec;
    Vec w;
    LabeledDataset data;

    ModelFixture() {
        spec.arch = Arch::logistic;
        spec.feature_dim = 6;
        spec.classes = 10;
        RngStream rng(11, 1);
        w = gauss_vector(rng, spec.param_dim(), 0.5);
        const MixtureSpec mixture = make_sphere_mixture(10, 6, 2.0, 1.0, rng);
        data = gen_synthetic(mixture, 64, Vec(10, 0.1), rng);
    }
};

void BM_grad_batch(benchmark::State& state) {
    const ModelFixture fx;
    std::vector<int> idx(static_cast<std::size_t>(state.range(0)));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    const Batch b = Batch::of(fx.data, idx);
    for (auto _ : state) {
        benchmark::DoNotOptimize(grad(fx.spec, fx.w, b));
    }
}
BENCHMARK(BM_grad_batch)->Arg(8)->Arg(32);

void BM_gmir_grad_batch(benchmark::State& state) {
    const ModelFixture fx;
    std::vector<int> idx(8);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    const Batch b = Batch::of(fx.data, idx);
    const Vec w0(fx.w.size(), 0.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gmir_grad(fx.spec, fx.w, w0, b, 0.1));
    }
}
BENCHMARK(BM_gmir_grad_batch);

void BM_desk_cfl_run(benchmark::State& state) {
    ExperimentConfig cfg = parse_config_text("", "bench");
    cfg.rounds = static_cast<int>(state.range(0));
    cfg.plots = false;
    for (auto _ : state) {
        benchmark::DoNotOptimize(execute_run(cfg, 0));
    }
}
BENCHMARK(BM_desk_cfl_run)->Arg(50)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_bound_dfl(benchmark::State& state) {
    BoundConstants c;
    c.R = 1.0;
    c.L = 1.0;
    c.n_devices = 10;
    c.samples_per_device = 50;
    c.rounds = static_cast<int>(state.range(0));
    c.eta.assign(c.rounds, 0.1);
    c.xi.assign(10, 1.0);
    c.D.assign(10, 0.3);
    c.sigma_sq = 1.0;
    c.lambda = 0.9;
    c.d = 70;
    for (auto _ : state) {
        benchmark::DoNotOptimize(bound_dfl(c));
    }
}
BENCHMARK(BM_bound_dfl)->Arg(300)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
