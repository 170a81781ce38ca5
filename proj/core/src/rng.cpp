#include "feelsim/rng.hpp"

#include <cmath>
#include <numbers>

#include "feelsim/errors.hpp"

namespace feelsim {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer: a strong 64-bit mixer.
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
    return mix64(h ^ (v + kGolden + (h << 6) + (h >> 2)));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
    key_ = combine(mix64(seed + kGolden), stream_id);
}

RngStream RngStream::substream(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
    std::uint64_t id = combine(stream_id_, a);
    id = combine(id, b);
    id = combine(id, c);
    return RngStream(seed_, id);
}

std::uint64_t RngStream::next_u64() {
    counter_ += 1;
    return mix64(key_ + counter_ * kGolden);
}

double RngStream::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_double_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::next_gauss() {
    if (has_cached_gauss_) {
        has_cached_gauss_ = false;
        return cached_gauss_;
    }
    const double u1 = next_double_pos();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_gauss_ = r * std::sin(angle);
    has_cached_gauss_ = true;
    return r * std::cos(angle);
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
    if (bound == 0) {
        throw ParameterError("next_below: bound must be >= 1");
    }
    // Lemire's multiply-shift with rejection of the biased low range.
    while (true) {
        const std::uint64_t x = next_u64();
        const __uint128_t m = static_cast<__uint128_t>(x) * bound;
        const std::uint64_t low = static_cast<std::uint64_t>(m);
        if (low >= bound) {
            return static_cast<std::uint64_t>(m >> 64);
        }
        const std::uint64_t threshold = (0ULL - bound) % bound;
        if (low >= threshold) {
            return static_cast<std::uint64_t>(m >> 64);
        }
    }
}

Vec gauss_vector(RngStream& rng, std::size_t d, double sigma) {
    if (sigma < 0.0) {
        throw ParameterError("gauss_vector: sigma must be >= 0");
    }
    if (sigma == 0.0) {
        return Vec(d, 0.0);
    }
    Vec out(d);
    for (std::size_t i = 0; i < d; ++i) {
        out[i] = sigma * rng.next_gauss();
    }
    return out;
}

namespace {

// Marsaglia-Tsang for shape >= 1.
double gamma_ge1(RngStream& rng, double shape) {
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
        double x;
        double v;
        do {
            x = rng.next_gauss();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.next_double_pos();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
            return d * v;
        }
    }
}

double gamma_draw(RngStream& rng, double shape) {
    if (shape >= 1.0) {
        return gamma_ge1(rng, shape);
    }
    // Johnk-style boost: Gamma(a) = Gamma(a+1) * U^(1/a).
    const double g = gamma_ge1(rng, shape + 1.0);
    const double u = rng.next_double_pos();
    return g * std::pow(u, 1.0 / shape);
}

}  // namespace

Vec dirichlet_sample(RngStream& rng, double alpha, std::size_t k) {
    if (!(alpha > 0.0)) {
        throw ParameterError("dirichlet_sample: alpha must be > 0");
    }
    if (k < 1) {
        throw ParameterError("dirichlet_sample: k must be >= 1");
    }
    if (k == 1) {
        return Vec{1.0};
    }
    Vec out(k);
    double total = 0.0;
    for (int attempt = 0; attempt < 50 && total <= 0.0; ++attempt) {
        total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            out[i] = gamma_draw(rng, alpha);
            total += out[i];
        }
    }
    if (total <= 0.0) {
        // Tiny alpha: every gamma draw underflowed. The limiting Dirichlet
        // puts all mass on one uniformly chosen component.
        std::fill(out.begin(), out.end(), 0.0);
        out[static_cast<std::size_t>(rng.next_below(k))] = 1.0;
        return out;
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

}  // namespace feelsim
