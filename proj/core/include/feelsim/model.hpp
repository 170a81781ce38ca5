#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "feelsim/data.hpp"
#include "feelsim/rng.hpp"

namespace feelsim {

enum class Arch { logistic, mlp };

Arch arch_from_string(const std::string& s);
std::string to_string(Arch arch);

// Differentiable classifier family. Parameters live in one flat vector:
//   logistic: C rows of [w_0..w_{F-1}, bias], d = (F+1)*C
//   mlp:      hidden rows of [w, bias] (tanh), then C output rows,
//             d = (F+1)*H + (H+1)*C
struct ModelSpec {
    Arch arch = Arch::logistic;
    int feature_dim = 0;
    int classes = 0;
    int hidden = 0;  // ignored for logistic

    [[nodiscard]] std::size_t param_dim() const;
    void validate() const;  // throws ParameterError
};

// Non-owning view of a dataset subset. An empty idx with non-null ds means
// the whole dataset.
struct Batch {
    const LabeledDataset* ds = nullptr;
    std::vector<int> idx;

    static Batch whole(const LabeledDataset& dataset);
    static Batch of(const LabeledDataset& dataset, std::vector<int> indices);
    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] const Vec& feature(std::size_t k) const;
    [[nodiscard]] int label(std::size_t k) const;
};

// Mean softmax cross-entropy over the batch (log-sum-exp stabilized).
double loss(const ModelSpec& spec, const Vec& w, const Batch& b);

// Analytic gradient of loss.
Vec grad(const ModelSpec& spec, const Vec& w, const Batch& b);

// Hessian-vector product of loss. Exact for logistic; forward-difference of
// grad (step 1e-6 * (1 + ||w||)) for the MLP.
Vec hvp(const ModelSpec& spec, const Vec& w, const Batch& b, const Vec& v);

// Gradient-alignment regularized objective:
//   loss(w) + beta * r^2 with r = grad(w)^T (w - w0).
// Driving r to zero decouples the model from the batch gradient direction,
// which is the FedGMIR local objective.
double gmir_value(const ModelSpec& spec, const Vec& w, const Vec& w0,
                  const Batch& b, double beta);

// Full gradient of gmir_value: grad + 2*beta*r*(H*(w - w0) + grad).
Vec gmir_grad(const ModelSpec& spec, const Vec& w, const Vec& w0, const Batch& b,
              double beta);

// FedProx local gradient: grad(w) + mu_prox * (w - w_ref).
Vec fedprox_grad(const ModelSpec& spec, const Vec& w, const Vec& w_ref,
                 const Batch& b, double mu_prox);

// Argmax class; ties broken by the lowest class index.
int predict(const ModelSpec& spec, const Vec& w, const Vec& features);

double accuracy(const ModelSpec& spec, const Vec& w, const LabeledDataset& ds);

}  // namespace feelsim
