#include "feelsim/trainer.hpp"

#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include "feelsim/errors.hpp"
#include "feelsim/linalg.hpp"

namespace feelsim {

Mode mode_from_string(const std::string& s) {
    if (s == "cfl") return Mode::cfl;
    if (s == "dfl") return Mode::dfl;
    throw ParameterError("unknown mode: " + s);
}

std::string to_string(Mode mode) { return mode == Mode::cfl ? "cfl" : "dfl"; }

Method method_from_string(const std::string& s) {
    if (s == "fedsgd") return Method::fedsgd;
    if (s == "fedprox") return Method::fedprox;
    if (s == "fedgmir") return Method::fedgmir;
    throw ParameterError("unknown method: " + s);
}

std::string to_string(Method method) {
    switch (method) {
        case Method::fedsgd: return "fedsgd";
        case Method::fedprox: return "fedprox";
        case Method::fedgmir: return "fedgmir";
    }
    return "?";
}

LrSchedule lr_schedule_from_string(const std::string& s) {
    if (s == "constant") return LrSchedule::constant;
    if (s == "inv_sqrt") return LrSchedule::inv_sqrt;
    throw ParameterError("unknown lr schedule: " + s);
}

std::string to_string(LrSchedule sched) {
    return sched == LrSchedule::constant ? "constant" : "inv_sqrt";
}

void TrainConfig::validate() const {
    if (rounds < 0) throw ParameterError("TrainConfig: rounds must be >= 0");
    if (!(lr > 0.0)) throw ParameterError("TrainConfig: lr must be > 0");
    if (batch_size < 1) throw ParameterError("TrainConfig: batch_size must be >= 1");
    if (beta < 0.0) throw ParameterError("TrainConfig: beta must be >= 0");
    if (!(beta_decay > 0.0 && beta_decay <= 1.0)) {
        throw ParameterError("TrainConfig: beta_decay must be in (0, 1]");
    }
    if (mu_prox < 0.0) throw ParameterError("TrainConfig: mu_prox must be >= 0");
    if (eval_every < 1) throw ParameterError("TrainConfig: eval_every must be >= 1");
}

double TrainConfig::eta(int t) const {
    if (lr_schedule == LrSchedule::inv_sqrt) {
        return lr / std::sqrt(static_cast<double>(t));
    }
    return lr;
}

double TrainConfig::beta_at(int t) const {
    return beta * std::pow(beta_decay, t - 1);
}

BatchScheduler::BatchScheduler(int n_samples, int batch_size, RngStream shuffle_root)
    : n_(n_samples), batch_size_(batch_size), perm_(n_samples), root_(shuffle_root) {
    if (n_samples < 1 || batch_size < 1) {
        throw ParameterError("BatchScheduler: need n_samples >= 1, batch_size >= 1");
    }
    std::iota(perm_.begin(), perm_.end(), 0);
}

int BatchScheduler::batches_per_epoch() const {
    return (n_ + batch_size_ - 1) / batch_size_;
}

std::vector<int> BatchScheduler::next() {
    if (cursor_ == 0 && batch_size_ < n_) {
        std::iota(perm_.begin(), perm_.end(), 0);
        RngStream epoch_rng = root_.substream(epoch_);
        shuffle(epoch_rng, perm_);
    }
    const std::size_t end = std::min(cursor_ + static_cast<std::size_t>(batch_size_),
                                     static_cast<std::size_t>(n_));
    std::vector<int> batch(perm_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                           perm_.begin() + static_cast<std::ptrdiff_t>(end));
    if (end == static_cast<std::size_t>(n_)) {
        cursor_ = 0;
        epoch_ += 1;
    } else {
        cursor_ = end;
    }
    return batch;
}

Vec local_gradient(Method method, const ModelSpec& spec, const Vec& w_eval,
                   const Vec& w_anchor, const Batch& batch, double beta_t,
                   double mu_prox) {
    switch (method) {
        case Method::fedsgd:
            return grad(spec, w_eval, batch);
        case Method::fedprox:
            return fedprox_grad(spec, w_eval, w_anchor, batch, mu_prox);
        case Method::fedgmir:
            return gmir_grad(spec, w_eval, w_anchor, batch, beta_t);
    }
    throw ParameterError("local_gradient: unknown method");
}

RoundMetrics evaluate(const ModelSpec& spec, const Vec& w,
                      const ClientPartition& train, const LabeledDataset& test,
                      int round) {
    if (test.size() == 0) {
        throw ParameterError("evaluate: test set is empty");
    }
    RoundMetrics m;
    m.round = round;
    double total = 0.0;
    for (const LabeledDataset& client : train.clients) {
        total += loss(spec, w, Batch::whole(client));
    }
    m.train_loss = total / static_cast<double>(train.devices());
    m.test_loss = loss(spec, w, Batch::whole(test));
    m.test_acc = accuracy(spec, w, test);
    m.gap = m.test_loss - m.train_loss;
    return m;
}

namespace {

// Runs fn(i) for i in [0, n). With threads <= 1 the loop is sequential;
// otherwise indices are split into contiguous chunks. Each fn(i) writes only
// slot i of preallocated outputs, so results do not depend on the schedule.
// The first worker exception is rethrown on the calling thread.
template <typename Fn>
void parallel_for(int n, int threads, const Fn& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr error;
    std::mutex error_mutex;
    const int chunk = (n + workers - 1) / workers;
    for (int wkr = 0; wkr < workers; ++wkr) {
        const int lo = wkr * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn, &error, &error_mutex] {
            try {
                for (int i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

bool metrics_finite(const RoundMetrics& m) {
    return std::isfinite(m.train_loss) && std::isfinite(m.test_loss) &&
           std::isfinite(m.gap);
}

struct EvalPlan {
    int eval_every;
    int rounds;
    [[nodiscard]] bool wants(int t) const {
        return t == 0 || t == rounds || (t % eval_every == 0);
    }
};

}  // namespace

RunResult run_cfl(const TrainConfig& cfg, const ModelSpec& spec,
                  const ClientPartition& partition, const ChannelSpec& channel,
                  const LabeledDataset& test) {
    cfg.validate();
    spec.validate();
    channel.validate();
    const int n_dev = partition.devices();
    if (n_dev < 1) {
        throw ParameterError("run_cfl: partition has no devices");
    }
    for (const auto& client : partition.clients) {
        if (client.size() == 0) {
            throw ParameterError("run_cfl: every client must be nonempty");
        }
    }
    const auto t_start = std::chrono::steady_clock::now();
    const RngStream root(cfg.seed);

    std::vector<BatchScheduler> schedulers;
    schedulers.reserve(n_dev);
    for (int i = 0; i < n_dev; ++i) {
        schedulers.emplace_back(static_cast<int>(partition.clients[i].size()),
                                cfg.batch_size,
                                root.substream(stream::kShuffle, i));
    }

    RunResult result;
    Vec w(spec.param_dim(), 0.0);
    const EvalPlan plan{cfg.eval_every, cfg.rounds};
    result.metrics.push_back(evaluate(spec, w, partition, test, 0));

    std::vector<Vec> grads(n_dev);
    for (int t = 1; t <= cfg.rounds; ++t) {
        std::vector<Batch> batches;
        batches.reserve(n_dev);
        for (int i = 0; i < n_dev; ++i) {
            batches.push_back(Batch::of(partition.clients[i], schedulers[i].next()));
        }
        const double beta_t = cfg.beta_at(t);
        // fedprox anchors on the received global model; fedgmir on W_0 = 0.
        const Vec w0(w.size(), 0.0);
        const Vec& anchor = (cfg.method == Method::fedgmir) ? w0 : w;
        parallel_for(n_dev, cfg.threads, [&](int i) {
            grads[i] = local_gradient(cfg.method, spec, w, anchor, batches[i],
                                      beta_t, cfg.mu_prox);
        });
        // Fixed device order keeps the sum identical across thread counts.
        Vec gsum(w.size(), 0.0);
        for (int i = 0; i < n_dev; ++i) {
            axpy(1.0, grads[i], gsum);
        }
        const double eta_t = cfg.eta(t);
        const double coef = eta_t / static_cast<double>(n_dev);
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] -= coef * gsum[j];
        }
        RngStream noise_rng = root.substream(stream::kChannelNoise, t);
        result.sigma_used.push_back(resolve_sigma(channel, w));
        w = transmit(w, channel, noise_rng);
        result.eta_used.push_back(eta_t);

        bool bad = !all_finite(w);
        if (!bad && plan.wants(t)) {
            RoundMetrics m = evaluate(spec, w, partition, test, t);
            result.metrics.push_back(m);
            bad = !metrics_finite(m);
        }
        if (bad) {
            result.diverged = true;
            result.diverged_round = t;
            break;
        }
    }

    result.final_model = std::move(w);
    result.lambda = 0.0;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

RunResult run_dfl(const TrainConfig& cfg, const ModelSpec& spec,
                  const ClientPartition& partition, const MixingMatrix& mixing,
                  const ChannelSpec& channel, const LabeledDataset& test,
                  const Vec* sigma_scales) {
    cfg.validate();
    spec.validate();
    channel.validate();
    const int n_dev = partition.devices();
    if (n_dev < 1) {
        throw ParameterError("run_dfl: partition has no devices");
    }
    if (mixing.theta.rows != static_cast<std::size_t>(n_dev)) {
        throw DimensionError("run_dfl: mixing matrix size != device count");
    }
    for (const auto& client : partition.clients) {
        if (client.size() == 0) {
            throw ParameterError("run_dfl: every client must be nonempty");
        }
    }
    Vec scales(n_dev, 1.0);
    if (sigma_scales != nullptr) {
        if (sigma_scales->size() != static_cast<std::size_t>(n_dev)) {
            throw DimensionError("run_dfl: sigma_scales length != device count");
        }
        scales = *sigma_scales;
    }
    const auto t_start = std::chrono::steady_clock::now();
    const RngStream root(cfg.seed);
    const std::size_t dim = spec.param_dim();

    std::vector<BatchScheduler> schedulers;
    schedulers.reserve(n_dev);
    for (int i = 0; i < n_dev; ++i) {
        schedulers.emplace_back(static_cast<int>(partition.clients[i].size()),
                                cfg.batch_size,
                                root.substream(stream::kShuffle, i));
    }

    std::vector<Vec> models(n_dev, Vec(dim, 0.0));
    std::vector<Vec> mixed(n_dev, Vec(dim, 0.0));
    std::vector<Vec> grads(n_dev);
    const Vec w0(dim, 0.0);

    auto average_model = [&]() {
        Vec avg(dim, 0.0);
        for (int i = 0; i < n_dev; ++i) {
            axpy(1.0, models[i], avg);
        }
        scale(1.0 / static_cast<double>(n_dev), avg);
        return avg;
    };

    RunResult result;
    result.lambda = mixing.lambda_value;
    const EvalPlan plan{cfg.eval_every, cfg.rounds};
    result.metrics.push_back(evaluate(spec, average_model(), partition, test, 0));

    for (int t = 1; t <= cfg.rounds; ++t) {
        std::vector<Batch> batches;
        batches.reserve(n_dev);
        for (int i = 0; i < n_dev; ++i) {
            batches.push_back(Batch::of(partition.clients[i], schedulers[i].next()));
        }
        const double beta_t = cfg.beta_at(t);
        const double eta_t = cfg.eta(t);
        double sigma_round = 0.0;
        parallel_for(n_dev, cfg.threads, [&](int i) {
            // Row-i mix of neighbor models, ascending j for reproducibility.
            Vec& mix = mixed[i];
            std::fill(mix.begin(), mix.end(), 0.0);
            for (int j = 0; j < n_dev; ++j) {
                const double theta_ij = mixing.theta(i, j);
                if (theta_ij == 0.0) continue;
                axpy(theta_ij, models[j], mix);
            }
            // Gradient at the device's own pre-mix model; fedprox anchors on
            // the post-mix model, fedgmir on W_0.
            const Vec& anchor = (cfg.method == Method::fedgmir) ? w0 : mix;
            grads[i] = local_gradient(cfg.method, spec, models[i], anchor,
                                      batches[i], beta_t, cfg.mu_prox);
        });
        for (int i = 0; i < n_dev; ++i) {
            Vec& next = mixed[i];
            for (std::size_t j = 0; j < dim; ++j) {
                next[j] -= eta_t * grads[i][j];
            }
            const double sigma_base = resolve_sigma(channel, next);
            const double sigma_i = sigma_base * scales[i];
            if (i == 0) sigma_round = sigma_base;
            if (sigma_i > 0.0) {
                RngStream noise_rng = root.substream(stream::kChannelNoise, t, i);
                for (std::size_t j = 0; j < dim; ++j) {
                    next[j] += sigma_i * noise_rng.next_gauss();
                }
            }
            models[i].swap(next);
        }
        result.eta_used.push_back(eta_t);
        result.sigma_used.push_back(sigma_round);

        bool bad = false;
        for (int i = 0; i < n_dev && !bad; ++i) {
            bad = !all_finite(models[i]);
        }
        if (!bad && plan.wants(t)) {
            RoundMetrics m = evaluate(spec, average_model(), partition, test, t);
            result.metrics.push_back(m);
            bad = !metrics_finite(m);
        }
        if (bad) {
            result.diverged = true;
            result.diverged_round = t;
            break;
        }
    }

    result.final_model = average_model();
    result.device_models = std::move(models);
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

}  // namespace feelsim
