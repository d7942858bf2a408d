#pragma once

#include <cmath>
#include <limits>

namespace rofsim {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kPlanck = 6.62607015e-34;          // J s
inline constexpr double kElectronCharge = 1.602176634e-19;  // C
inline constexpr double kSpeedOfLight = 299792458.0;        // m/s

/// 0.1 nm at 1550 nm, the conventional OSNR noise bandwidth.
inline constexpr double kOsnrReferenceBandwidth = 12.5e9;

template <typename Scalar>
inline Scalar db_to_linear(Scalar db) {
    return std::pow(Scalar(10), db / Scalar(10));
}

template <typename Scalar>
inline Scalar linear_to_db(Scalar ratio) {
    if (ratio <= Scalar(0)) return -std::numeric_limits<Scalar>::infinity();
    return Scalar(10) * std::log10(ratio);
}

template <typename Scalar>
inline Scalar dbm_to_watts(Scalar dbm) {
    return Scalar(1e-3) * db_to_linear(dbm);
}

template <typename Scalar>
inline Scalar watts_to_dbm(Scalar watts) {
    return linear_to_db(watts / Scalar(1e-3));
}

}  // namespace rofsim
