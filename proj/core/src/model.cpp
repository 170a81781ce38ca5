#include "feelsim/model.hpp"

#include <algorithm>
#include <cmath>

#include "feelsim/errors.hpp"
#include "feelsim/linalg.hpp"

namespace feelsim {

Arch arch_from_string(const std::string& s) {
    if (s == "logistic") return Arch::logistic;
    if (s == "mlp") return Arch::mlp;
    throw ParameterError("unknown arch: " + s);
}

std::string to_string(Arch arch) {
    return arch == Arch::logistic ? "logistic" : "mlp";
}

std::size_t ModelSpec::param_dim() const {
    const std::size_t f1 = static_cast<std::size_t>(feature_dim) + 1;
    if (arch == Arch::logistic) {
        return f1 * static_cast<std::size_t>(classes);
    }
    return f1 * static_cast<std::size_t>(hidden) +
           (static_cast<std::size_t>(hidden) + 1) * static_cast<std::size_t>(classes);
}

void ModelSpec::validate() const {
    if (feature_dim < 1) throw ParameterError("ModelSpec: feature_dim must be >= 1");
    if (classes < 2) throw ParameterError("ModelSpec: classes must be >= 2");
    if (arch == Arch::mlp && hidden < 1) {
        throw ParameterError("ModelSpec: mlp needs hidden >= 1");
    }
}

Batch Batch::whole(const LabeledDataset& dataset) {
    Batch b;
    b.ds = &dataset;
    return b;
}

Batch Batch::of(const LabeledDataset& dataset, std::vector<int> indices) {
    Batch b;
    b.ds = &dataset;
    b.idx = std::move(indices);
    return b;
}

std::size_t Batch::size() const {
    if (ds == nullptr) return 0;
    return idx.empty() ? ds->size() : idx.size();
}

const Vec& Batch::feature(std::size_t k) const {
    return ds->features[idx.empty() ? k : static_cast<std::size_t>(idx[k])];
}

int Batch::label(std::size_t k) const {
    return ds->labels[idx.empty() ? k : static_cast<std::size_t>(idx[k])];
}

namespace {

void check_inputs(const ModelSpec& spec, const Vec& w, const Batch& b) {
    spec.validate();
    if (w.size() != spec.param_dim()) {
        throw DimensionError("model: parameter vector has wrong length");
    }
    if (b.ds == nullptr || b.size() == 0) {
        throw ParameterError("model: batch is empty");
    }
}

// Softmax probabilities from logits, in place; returns the stabilized
// log-sum-exp so callers can form the loss.
double softmax_inplace(Vec& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : logits) {
        v /= sum;
    }
    return m + std::log(sum);
}

// ---- logistic ----

void logistic_logits(const ModelSpec& spec, const Vec& w, const Vec& x, Vec& out) {
    const int f = spec.feature_dim;
    out.assign(spec.classes, 0.0);
    for (int c = 0; c < spec.classes; ++c) {
        const double* row = w.data() + static_cast<std::size_t>(c) * (f + 1);
        double z = row[f];  // bias
        for (int j = 0; j < f; ++j) {
            z += row[j] * x[j];
        }
        out[c] = z;
    }
}

// ---- mlp (single tanh hidden layer) ----

struct MlpForward {
    Vec hidden_act;  // tanh activations
    Vec logits;
};

void mlp_forward(const ModelSpec& spec, const Vec& w, const Vec& x, MlpForward& fwd) {
    const int f = spec.feature_dim;
    const int h = spec.hidden;
    const std::size_t layer1 = static_cast<std::size_t>(f + 1) * h;
    fwd.hidden_act.assign(h, 0.0);
    for (int k = 0; k < h; ++k) {
        const double* row = w.data() + static_cast<std::size_t>(k) * (f + 1);
        double z = row[f];
        for (int j = 0; j < f; ++j) {
            z += row[j] * x[j];
        }
        fwd.hidden_act[k] = std::tanh(z);
    }
    fwd.logits.assign(spec.classes, 0.0);
    for (int c = 0; c < spec.classes; ++c) {
        const double* row = w.data() + layer1 + static_cast<std::size_t>(c) * (h + 1);
        double z = row[h];
        for (int k = 0; k < h; ++k) {
            z += row[k] * fwd.hidden_act[k];
        }
        fwd.logits[c] = z;
    }
}

}  // namespace

double loss(const ModelSpec& spec, const Vec& w, const Batch& b) {
    check_inputs(spec, w, b);
    const std::size_t count = b.size();
    double total = 0.0;
    Vec logits;
    MlpForward fwd;
    for (std::size_t k = 0; k < count; ++k) {
        const int label = b.label(k);
        if (label < 0 || label >= spec.classes) {
            throw ParameterError("model: label out of range");
        }
        if (spec.arch == Arch::logistic) {
            logistic_logits(spec, w, b.feature(k), logits);
        } else {
            mlp_forward(spec, w, b.feature(k), fwd);
            logits = fwd.logits;
        }
        const double target_logit = logits[label];
        const double m = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double v : logits) {
            sum += std::exp(v - m);
        }
        total += (m + std::log(sum)) - target_logit;
    }
    return total / static_cast<double>(count);
}

Vec grad(const ModelSpec& spec, const Vec& w, const Batch& b) {
    check_inputs(spec, w, b);
    const std::size_t count = b.size();
    const int f = spec.feature_dim;
    Vec g(w.size(), 0.0);
    Vec probs;
    MlpForward fwd;
    for (std::size_t k = 0; k < count; ++k) {
        const Vec& x = b.feature(k);
        const int label = b.label(k);
        if (spec.arch == Arch::logistic) {
            logistic_logits(spec, w, x, probs);
            softmax_inplace(probs);
            probs[label] -= 1.0;
            for (int c = 0; c < spec.classes; ++c) {
                double* row = g.data() + static_cast<std::size_t>(c) * (f + 1);
                const double dc = probs[c];
                for (int j = 0; j < f; ++j) {
                    row[j] += dc * x[j];
                }
                row[f] += dc;
            }
        } else {
            const int h = spec.hidden;
            const std::size_t layer1 = static_cast<std::size_t>(f + 1) * h;
            mlp_forward(spec, w, x, fwd);
            probs = fwd.logits;
            softmax_inplace(probs);
            probs[label] -= 1.0;
            // Output layer.
            for (int c = 0; c < spec.classes; ++c) {
                double* row = g.data() + layer1 + static_cast<std::size_t>(c) * (h + 1);
                const double dc = probs[c];
                for (int j = 0; j < h; ++j) {
                    row[j] += dc * fwd.hidden_act[j];
                }
                row[h] += dc;
            }
            // Backprop to the hidden layer through tanh.
            for (int j = 0; j < h; ++j) {
                double da = 0.0;
                for (int c = 0; c < spec.classes; ++c) {
                    da += w[layer1 + static_cast<std::size_t>(c) * (h + 1) + j] * probs[c];
                }
                const double a = fwd.hidden_act[j];
                const double dz = da * (1.0 - a * a);
                double* row = g.data() + static_cast<std::size_t>(j) * (f + 1);
                for (int i = 0; i < f; ++i) {
                    row[i] += dz * x[i];
                }
                row[f] += dz;
            }
        }
    }
    scale(1.0 / static_cast<double>(count), g);
    return g;
}

Vec hvp(const ModelSpec& spec, const Vec& w, const Batch& b, const Vec& v) {
    check_inputs(spec, w, b);
    if (v.size() != w.size()) {
        throw DimensionError("hvp: direction vector has wrong length");
    }
    if (spec.arch == Arch::mlp) {
        // Forward difference of the analytic gradient.
        const double step = 1e-6 * (1.0 + nrm2(w));
        if (nrm2(v) == 0.0) {
            return Vec(w.size(), 0.0);
        }
        Vec shifted = w;
        axpy(step, v, shifted);
        Vec out = grad(spec, shifted, b);
        const Vec base = grad(spec, w, b);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = (out[i] - base[i]) / step;
        }
        return out;
    }

    // Exact logistic Hessian-vector product. Per sample, with augmented
    // feature xt and probabilities p:
    //   (H v)_c = [p_c * (u_c - p.u)] * xt   where u_c = v_c . xt.
    const int f = spec.feature_dim;
    const std::size_t count = b.size();
    Vec out(w.size(), 0.0);
    Vec probs;
    Vec u(spec.classes);
    for (std::size_t k = 0; k < count; ++k) {
        const Vec& x = b.feature(k);
        logistic_logits(spec, w, x, probs);
        softmax_inplace(probs);
        double mean_u = 0.0;
        for (int c = 0; c < spec.classes; ++c) {
            const double* vrow = v.data() + static_cast<std::size_t>(c) * (f + 1);
            double z = vrow[f];
            for (int j = 0; j < f; ++j) {
                z += vrow[j] * x[j];
            }
            u[c] = z;
            mean_u += probs[c] * z;
        }
        for (int c = 0; c < spec.classes; ++c) {
            const double s = probs[c] * (u[c] - mean_u);
            double* row = out.data() + static_cast<std::size_t>(c) * (f + 1);
            for (int j = 0; j < f; ++j) {
                row[j] += s * x[j];
            }
            row[f] += s;
        }
    }
    scale(1.0 / static_cast<double>(count), out);
    return out;
}

double gmir_value(const ModelSpec& spec, const Vec& w, const Vec& w0, const Batch& b,
                  double beta) {
    if (beta < 0.0) {
        throw ParameterError("gmir_value: beta must be >= 0");
    }
    if (w0.size() != w.size()) {
        throw DimensionError("gmir_value: prior vector has wrong length");
    }
    const double base = loss(spec, w, b);
    if (beta == 0.0) {
        return base;
    }
    const Vec g = grad(spec, w, b);
    const double r = dot(g, vsub(w, w0));
    return base + beta * r * r;
}

Vec gmir_grad(const ModelSpec& spec, const Vec& w, const Vec& w0, const Batch& b,
              double beta) {
    if (beta < 0.0) {
        throw ParameterError("gmir_grad: beta must be >= 0");
    }
    if (w0.size() != w.size()) {
        throw DimensionError("gmir_grad: prior vector has wrong length");
    }
    Vec g = grad(spec, w, b);
    if (beta == 0.0) {
        return g;
    }
    const Vec delta = vsub(w, w0);
    const double r = dot(g, delta);
    const Vec hv = hvp(spec, w, b, delta);
    const double coef = 2.0 * beta * r;
    Vec out = g;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += coef * (hv[i] + g[i]);
    }
    return out;
}

Vec fedprox_grad(const ModelSpec& spec, const Vec& w, const Vec& w_ref,
                 const Batch& b, double mu_prox) {
    if (mu_prox < 0.0) {
        throw ParameterError("fedprox_grad: mu_prox must be >= 0");
    }
    if (w_ref.size() != w.size()) {
        throw DimensionError("fedprox_grad: anchor vector has wrong length");
    }
    Vec g = grad(spec, w, b);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += mu_prox * (w[i] - w_ref[i]);
    }
    return g;
}

int predict(const ModelSpec& spec, const Vec& w, const Vec& features) {
    spec.validate();
    if (w.size() != spec.param_dim()) {
        throw DimensionError("predict: parameter vector has wrong length");
    }
    Vec logits;
    if (spec.arch == Arch::logistic) {
        logistic_logits(spec, w, features, logits);
    } else {
        MlpForward fwd;
        mlp_forward(spec, w, features, fwd);
        logits = std::move(fwd.logits);
    }
    int best = 0;
    for (int c = 1; c < spec.classes; ++c) {
        if (logits[c] > logits[best]) {
            best = c;
        }
    }
    return best;
}

double accuracy(const ModelSpec& spec, const Vec& w, const LabeledDataset& ds) {
    if (ds.size() == 0) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (std::size_t k = 0; k < ds.size(); ++k) {
        if (predict(spec, w, ds.features[k]) == ds.labels[k]) {
            hits += 1;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace feelsim
