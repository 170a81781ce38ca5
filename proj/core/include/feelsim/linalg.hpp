#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "feelsim/rng.hpp"

namespace feelsim {

// Dense row-major matrix of 64-bit reals.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    static Mat identity(std::size_t n);
    // Every entry 1/n (the consensus projector).
    static Mat average_projector(std::size_t n);

    [[nodiscard]] bool square() const { return rows == cols; }
};

Mat matmul(const Mat& x, const Mat& y);
Mat sub(const Mat& x, const Mat& y);
Mat matpow(const Mat& x, int k);

double dot(const Vec& x, const Vec& y);
double nrm2(const Vec& x);
// y += alpha * x
void axpy(double alpha, const Vec& x, Vec& y);
void scale(double alpha, Vec& x);
Vec vsub(const Vec& x, const Vec& y);
bool all_finite(const Vec& x);

// All eigenvalues of a symmetric matrix, sorted descending.
// Cyclic Jacobi rotations; accurate to ~1e-12 relative at the sizes used here.
// Throws DimensionError if m is not square or not symmetric within
// 1e-12 * max(1, max|entry|).
std::vector<double> sym_eigvals(const Mat& m);

// Largest singular value (operator 2-norm) of a square matrix, computed as
// sqrt(lambda_max(m^T m)). Throws DimensionError on non-square input.
double spectral_norm(const Mat& m);

// Central-difference gradient estimate of f at w, per-coordinate step eps.
// Throws ParameterError on eps <= 0 and NumericError if f returns non-finite.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& w,
                     double eps = 1e-5);

}  // namespace feelsim
