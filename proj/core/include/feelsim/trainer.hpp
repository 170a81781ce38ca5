#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "feelsim/channel.hpp"
#include "feelsim/data.hpp"
#include "feelsim/model.hpp"
#include "feelsim/rng.hpp"
#include "feelsim/topology.hpp"

namespace feelsim {

enum class Mode { cfl, dfl };
enum class Method { fedsgd, fedprox, fedgmir };
enum class LrSchedule { constant, inv_sqrt };

Mode mode_from_string(const std::string& s);
std::string to_string(Mode mode);
Method method_from_string(const std::string& s);
std::string to_string(Method method);
LrSchedule lr_schedule_from_string(const std::string& s);
std::string to_string(LrSchedule sched);

struct TrainConfig {
    Mode mode = Mode::cfl;
    Method method = Method::fedsgd;
    int rounds = 0;
    double lr = 0.05;
    LrSchedule lr_schedule = LrSchedule::constant;
    int batch_size = 32;
    double beta = 1.0;        // fedgmir balance factor
    double beta_decay = 1.0;  // per-round multiplicative decay, (0, 1]
    double mu_prox = 0.1;     // fedprox proximal weight
    int eval_every = 10;
    std::uint64_t seed = 0;
    int threads = 1;  // <= 1 runs per-device work sequentially

    void validate() const;  // throws ParameterError
    // eta_t for 1-based round t: lr (constant) or lr/sqrt(t).
    [[nodiscard]] double eta(int t) const;
    [[nodiscard]] double beta_at(int t) const;
};

struct RoundMetrics {
    int round = 0;
    double train_loss = 0.0;  // (1/N) sum of full-pass client losses
    double test_loss = 0.0;
    double test_acc = 0.0;
    double gap = 0.0;  // test_loss - train_loss
};

struct RunResult {
    Vec final_model;                 // CFL: global model; DFL: device average
    std::vector<Vec> device_models;  // DFL per-device finals (empty for CFL)
    std::vector<RoundMetrics> metrics;
    bool diverged = false;
    int diverged_round = -1;
    double lambda = 0.0;            // DFL mixing spectral value, 0 for CFL
    std::vector<double> eta_used;   // per executed round
    std::vector<double> sigma_used; // resolved base noise std per executed round
    double wall_seconds = 0.0;
};

// Serves per-epoch shuffled minibatches over n samples. The permutation for
// epoch e is drawn from shuffle_root.substream(e), so the schedule is a pure
// function of (seed, device). batch_size >= n serves the identity order.
class BatchScheduler {
  public:
    BatchScheduler(int n_samples, int batch_size, RngStream shuffle_root);
    std::vector<int> next();
    [[nodiscard]] int batches_per_epoch() const;

  private:
    int n_;
    int batch_size_;
    std::uint64_t epoch_ = 0;
    std::size_t cursor_ = 0;
    std::vector<int> perm_;
    RngStream root_;
};

// Method dispatch for one local gradient evaluation.
//   fedsgd:  grad(w_eval)
//   fedprox: grad(w_eval) + mu_prox * (w_eval - w_anchor)
//   fedgmir: gmir_grad(w_eval, w0 = w_anchor, beta_t)
// w_anchor is the proximal anchor for fedprox and the prior for fedgmir.
Vec local_gradient(Method method, const ModelSpec& spec, const Vec& w_eval,
                   const Vec& w_anchor, const Batch& batch, double beta_t,
                   double mu_prox);

// Full-pass metrics of model w: mean per-client train loss, test loss/accuracy,
// and their gap.
RoundMetrics evaluate(const ModelSpec& spec, const Vec& w,
                      const ClientPartition& train, const LabeledDataset& test,
                      int round);

// Centralized training from W_0 = 0. Per round every device computes its
// method gradient at the shared global model on its next minibatch; the
// server averages the gradients, steps, and one aggregate channel-noise draw
// perturbs the result:
//   W <- W - (eta_t / N) * sum_i g_i, then W <- W + eps_t.
// Substreams: shuffle (kShuffle, device), noise (kChannelNoise, t).
RunResult run_cfl(const TrainConfig& cfg, const ModelSpec& spec,
                  const ClientPartition& partition, const ChannelSpec& channel,
                  const LabeledDataset& test);

// Decentralized training, all devices from 0. Per round device i mixes
// neighbor models with its Theta row, steps with its own gradient taken at
// its pre-mix model, and adds its own noise draw:
//   W_i <- sum_j theta_ij W_j - eta_t * g_i, then W_i <- W_i + eps_i_t.
// Metrics are evaluated on the device average. sigma_scales optionally gives
// per-device noise multipliers (default all 1).
// Substreams: shuffle (kShuffle, device), noise (kChannelNoise, t, device).
RunResult run_dfl(const TrainConfig& cfg, const ModelSpec& spec,
                  const ClientPartition& partition, const MixingMatrix& mixing,
                  const ChannelSpec& channel, const LabeledDataset& test,
                  const Vec* sigma_scales = nullptr);

}  // namespace feelsim
