#include "feelsim/channel.hpp"

#include <cmath>

#include "feelsim/errors.hpp"
#include "feelsim/linalg.hpp"

namespace feelsim {

NoiseMode noise_mode_from_string(const std::string& s) {
    if (s == "noiseless") return NoiseMode::noiseless;
    if (s == "snr" || s == "snr_db") return NoiseMode::snr_db;
    if (s == "sigma") return NoiseMode::sigma;
    throw ParameterError("unknown noise mode: " + s);
}

std::string to_string(NoiseMode mode) {
    switch (mode) {
        case NoiseMode::noiseless: return "noiseless";
        case NoiseMode::snr_db: return "snr_db";
        case NoiseMode::sigma: return "sigma";
    }
    return "?";
}

PowerRef power_ref_from_string(const std::string& s) {
    if (s == "unit") return PowerRef::unit;
    if (s == "empirical") return PowerRef::empirical;
    throw ParameterError("unknown power reference: " + s);
}

std::string to_string(PowerRef ref) {
    return ref == PowerRef::unit ? "unit" : "empirical";
}

void ChannelSpec::validate() const {
    if (mode == NoiseMode::snr_db && !std::isfinite(value)) {
        throw ParameterError("ChannelSpec: SNR must be finite");
    }
    if (mode == NoiseMode::sigma && !(value >= 0.0)) {
        throw ParameterError("ChannelSpec: sigma must be >= 0");
    }
}

double sigma_from_snr(double snr_db, double signal_power) {
    if (!(signal_power > 0.0)) {
        throw ParameterError("sigma_from_snr: signal_power must be > 0");
    }
    return std::sqrt(signal_power * std::pow(10.0, -snr_db / 10.0));
}

double resolve_sigma(const ChannelSpec& spec, const Vec& w) {
    spec.validate();
    switch (spec.mode) {
        case NoiseMode::noiseless:
            return 0.0;
        case NoiseMode::sigma:
            return spec.value;
        case NoiseMode::snr_db: {
            double power = 1.0;
            if (spec.power_ref == PowerRef::empirical) {
                if (w.empty()) return 0.0;
                const double norm = nrm2(w);
                power = norm * norm / static_cast<double>(w.size());
                if (power <= 0.0) return 0.0;
            }
            return sigma_from_snr(spec.value, power);
        }
    }
    return 0.0;
}

Vec transmit(const Vec& w, const ChannelSpec& spec, RngStream& rng) {
    const double sigma = resolve_sigma(spec, w);
    if (sigma == 0.0) {
        return w;
    }
    Vec out = w;
    for (double& v : out) {
        v += sigma * rng.next_gauss();
    }
    return out;
}

}  // namespace feelsim
