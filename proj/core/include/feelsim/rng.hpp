#pragma once

#include <cstdint>
#include <vector>

namespace feelsim {

using Vec = std::vector<double>;

// Well-known tags used to derive independent substreams for distinct purposes.
// Keeping them in one place guarantees two consumers never collide on an id.
namespace stream {
constexpr std::uint64_t kShuffle = 0x01;
constexpr std::uint64_t kChannelNoise = 0x02;
constexpr std::uint64_t kDataGen = 0x03;
constexpr std::uint64_t kPartition = 0x04;
constexpr std::uint64_t kTestSet = 0x05;
constexpr std::uint64_t kProbe = 0x06;
constexpr std::uint64_t kMixture = 0x07;
constexpr std::uint64_t kGraph = 0x08;
}  // namespace stream

// Counter-based deterministic random stream (SplitMix64 over a keyed counter).
// The sample sequence is a pure function of (seed, stream_id): two streams
// constructed with the same pair produce bitwise-identical output no matter
// which thread or schedule consumes them.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    // Derives a child stream keyed by up to three extra coordinates
    // (device index, round index, purpose tag, ...). Deterministic.
    [[nodiscard]] RngStream substream(std::uint64_t a, std::uint64_t b = 0,
                                      std::uint64_t c = 0) const;

    std::uint64_t next_u64();
    // Uniform in [0, 1) with 53 random bits.
    double next_double();
    // Uniform in (0, 1]; safe as a log() argument.
    double next_double_pos();
    // Standard normal via Box-Muller; the pair's second value is cached.
    double next_gauss();
    // Uniform integer in [0, bound); bound >= 1.
    std::uint64_t next_below(std::uint64_t bound);

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] std::uint64_t stream_id() const { return stream_id_; }

  private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double cached_gauss_ = 0.0;
    bool has_cached_gauss_ = false;
};

// d independent draws from N(0, sigma^2). sigma == 0 returns exact zeros
// without consuming the stream. Throws ParameterError on sigma < 0.
Vec gauss_vector(RngStream& rng, std::size_t d, double sigma);

// Dirichlet(alpha * 1_k) draw: k non-negative reals summing to 1.
// Gamma draws via Marsaglia-Tsang (with the alpha < 1 boost).
// Throws ParameterError on alpha <= 0 or k < 1.
Vec dirichlet_sample(RngStream& rng, double alpha, std::size_t k);

// In-place Fisher-Yates shuffle driven by the stream.
template <typename T>
void shuffle(RngStream& rng, std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace feelsim
