#pragma once

#include <string>

#include "feelsim/rng.hpp"

namespace feelsim {

enum class NoiseMode { noiseless, snr_db, sigma };
enum class PowerRef { unit, empirical };

NoiseMode noise_mode_from_string(const std::string& s);
std::string to_string(NoiseMode mode);
PowerRef power_ref_from_string(const std::string& s);
std::string to_string(PowerRef ref);

// AWGN uplink model. `value` is the SNR in dB (snr_db mode) or the noise
// standard deviation (sigma mode); unused when noiseless.
struct ChannelSpec {
    NoiseMode mode = NoiseMode::noiseless;
    double value = 0.0;
    PowerRef power_ref = PowerRef::unit;

    void validate() const;  // throws ParameterError
};

// sigma = sqrt(signal_power * 10^(-snr_db/10)).
// Throws ParameterError when signal_power <= 0.
double sigma_from_snr(double snr_db, double signal_power);

// Noise std for one transmission of w. Unit power reference fixes the signal
// power at 1; empirical uses ||w||^2 / d of the transmitted vector (a zero
// vector transmits noiselessly in that mode).
double resolve_sigma(const ChannelSpec& spec, const Vec& w);

// w + eps, eps ~ N(0, sigma^2 I). Noiseless mode and sigma == 0 return w
// unchanged without consuming the stream, so the draw depends only on the
// stream, never on w.
Vec transmit(const Vec& w, const ChannelSpec& spec, RngStream& rng);

}  // namespace feelsim
