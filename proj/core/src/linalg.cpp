#include "feelsim/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "feelsim/errors.hpp"

namespace feelsim {

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Mat Mat::average_projector(std::size_t n) {
    Mat m(n, n);
    const double v = 1.0 / static_cast<double>(n);
    std::fill(m.a.begin(), m.a.end(), v);
    return m;
}

Mat matmul(const Mat& x, const Mat& y) {
    if (x.cols != y.rows) {
        throw DimensionError("matmul: inner dimensions differ");
    }
    Mat out(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t k = 0; k < x.cols; ++k) {
            const double xik = x(i, k);
            if (xik == 0.0) continue;
            for (std::size_t j = 0; j < y.cols; ++j) {
                out(i, j) += xik * y(k, j);
            }
        }
    }
    return out;
}

Mat sub(const Mat& x, const Mat& y) {
    if (x.rows != y.rows || x.cols != y.cols) {
        throw DimensionError("sub: shapes differ");
    }
    Mat out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.a.size(); ++i) {
        out.a[i] = x.a[i] - y.a[i];
    }
    return out;
}

Mat matpow(const Mat& x, int k) {
    if (!x.square()) {
        throw DimensionError("matpow: matrix must be square");
    }
    if (k < 0) {
        throw ParameterError("matpow: exponent must be >= 0");
    }
    Mat out = Mat::identity(x.rows);
    for (int i = 0; i < k; ++i) {
        out = matmul(out, x);
    }
    return out;
}

double dot(const Vec& x, const Vec& y) {
    if (x.size() != y.size()) {
        throw DimensionError("dot: lengths differ");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += x[i] * y[i];
    }
    return s;
}

double nrm2(const Vec& x) {
    double s = 0.0;
    for (double v : x) {
        s += v * v;
    }
    return std::sqrt(s);
}

void axpy(double alpha, const Vec& x, Vec& y) {
    if (x.size() != y.size()) {
        throw DimensionError("axpy: lengths differ");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

void scale(double alpha, Vec& x) {
    for (double& v : x) {
        v *= alpha;
    }
}

Vec vsub(const Vec& x, const Vec& y) {
    if (x.size() != y.size()) {
        throw DimensionError("vsub: lengths differ");
    }
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] - y[i];
    }
    return out;
}

bool all_finite(const Vec& x) {
    for (double v : x) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

namespace {

void require_symmetric(const Mat& m) {
    if (!m.square()) {
        throw DimensionError("sym_eigvals: matrix must be square");
    }
    double maxabs = 0.0;
    for (double v : m.a) {
        maxabs = std::max(maxabs, std::abs(v));
    }
    const double tol = 1e-12 * std::max(1.0, maxabs);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = i + 1; j < m.cols; ++j) {
            if (std::abs(m(i, j) - m(j, i)) > tol) {
                throw DimensionError("sym_eigvals: matrix is not symmetric");
            }
        }
    }
}

double offdiag_sq(const Mat& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = i + 1; j < m.cols; ++j) {
            s += 2.0 * m(i, j) * m(i, j);
        }
    }
    return s;
}

}  // namespace

std::vector<double> sym_eigvals(const Mat& input) {
    require_symmetric(input);
    const std::size_t n = input.rows;
    if (n == 0) {
        return {};
    }
    Mat m = input;
    // Symmetrize exactly so rotations preserve symmetry bit-for-bit.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = v;
            m(j, i) = v;
        }
    }

    double frob_sq = 0.0;
    for (double v : m.a) {
        frob_sq += v * v;
    }
    const double stop = 1e-28 * std::max(frob_sq, 1e-300);

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps && offdiag_sq(m) > stop; ++sweep) {
        for (std::size_t p = 0; p < n - 1; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (apq == 0.0) continue;
                const double app = m(p, p);
                const double aqq = m(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                // Smaller-magnitude root of t^2 + 2*tau*t - 1 = 0.
                double t;
                if (tau >= 0.0) {
                    t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
                } else {
                    t = -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
                }
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double mkp = m(k, p);
                    const double mkq = m(k, q);
                    m(k, p) = c * mkp - s * mkq;
                    m(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double mpk = m(p, k);
                    const double mqk = m(q, k);
                    m(p, k) = c * mpk - s * mqk;
                    m(q, k) = s * mpk + c * mqk;
                }
            }
        }
    }
    if (offdiag_sq(m) > 1e-18 * std::max(frob_sq, 1e-300)) {
        throw NumericError("sym_eigvals: Jacobi iteration did not converge");
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) {
        eig[i] = m(i, i);
    }
    std::sort(eig.begin(), eig.end(), std::greater<>());
    return eig;
}

double spectral_norm(const Mat& m) {
    if (!m.square()) {
        throw DimensionError("spectral_norm: matrix must be square");
    }
    const std::size_t n = m.rows;
    if (n == 0) {
        return 0.0;
    }
    // Gram matrix m^T m; exactly symmetric by construction.
    Mat gram(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                s += m(k, i) * m(k, j);
            }
            gram(i, j) = s;
            gram(j, i) = s;
        }
    }
    const std::vector<double> eig = sym_eigvals(gram);
    return std::sqrt(std::max(0.0, eig.front()));
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& w,
                     double eps) {
    if (!(eps > 0.0)) {
        throw ParameterError("finite_diff_grad: eps must be > 0");
    }
    Vec g(w.size());
    Vec probe = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double wi = w[i];
        probe[i] = wi + eps;
        const double fp = f(probe);
        probe[i] = wi - eps;
        const double fm = f(probe);
        probe[i] = wi;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_grad: non-finite function value");
        }
        g[i] = (fp - fm) / (2.0 * eps);
    }
    return g;
}

}  // namespace feelsim
