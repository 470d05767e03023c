#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nvsep {

// Error hierarchy. ValidationError marks rejected inputs (bad grids, ranges,
// preconditions), ModelError marks states a valid input drove the model into
// (singular systems, ill-conditioned unmixing, validity breaches).
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct ModelError : Error {
    using Error::Error;
};

namespace constants {

// Photon energy conversion, E [eV] = hc_ev_nm / lambda [nm].
inline constexpr double hc_ev_nm = 1239.841984;

// Zero-field splittings of the NV- ground and excited triplets [GHz].
inline constexpr double d_ground_ghz = 2.87;
inline constexpr double d_excited_ghz = 1.42;

// Electron gyromagnetic ratio [GHz/mT].
inline constexpr double gamma_e_ghz_per_mt = 0.0280249514;

}  // namespace constants

inline double ev_from_nm(double lambda_nm) {
    if (lambda_nm <= 0.0)
        throw ValidationError("ev_from_nm: wavelength must be positive, got " +
                              std::to_string(lambda_nm));
    return constants::hc_ev_nm / lambda_nm;
}

inline double nm_from_ev(double energy_ev) {
    if (energy_ev <= 0.0)
        throw ValidationError("nm_from_ev: photon energy must be positive, got " +
                              std::to_string(energy_ev));
    return constants::hc_ev_nm / energy_ev;
}

// SplitMix64 step. Used to derive independent per-item seeds from a master
// seed so that results do not depend on worker count or scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master ^ splitmix64(index + 1));
}

}  // namespace nvsep
