#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "rofsim/sample_buffer.hpp"
#include "rofsim/signal.hpp"

namespace rofsim {

struct SpectrumEstimate {
    Eigen::VectorXd frequency;      ///< Hz, absolute, ascending
    Eigen::VectorXd psd;            ///< W/Hz summed over modes
    double resolution_bandwidth = 0;  ///< equivalent noise bandwidth, Hz
    double bin_width = 0;            ///< grid spacing, Hz
    int averages = 0;

    double psd_dbm_per_hz(Eigen::Index k) const { return watts_to_dbm(psd(k)); }
    /// Integral of the PSD over bins whose centre lies in [low, high].
    double integrated_power(double low, double high) const;
    double total_power() const { return psd.sum() * bin_width; }
    /// Mean PSD over bins in [low, high] (W/Hz).
    double mean_psd(double low, double high) const;
    /// frequency_hz,psd_dbm_per_hz
    std::string to_csv() const;
};

/// Width of the central band holding `fraction` of the power, trimming
/// (1 - fraction)/2 from each side.
double occupied_bandwidth(const SpectrumEstimate& est, double fraction = 0.99);

/// Welch averaged periodogram: Blackman-Harris segments sized for `rbw`,
/// 50% overlap, segments wrap around the (periodic) buffer.
SpectrumEstimate estimate_spectrum(const Buffer& buf, double rbw);

/// Equivalent noise bandwidth of the 4-term Blackman-Harris window in bins.
double blackman_harris_enbw();

struct OsnrOptions {
    double floor_offset = 5e9;  ///< distance of the floor samples from the band edges
    double rbw = 50e6;
    double ceiling_db = 60;
    double reference_bandwidth = kOsnrReferenceBandwidth;
};

struct OsnrResult {
    enum class Status { value, above_ceiling, unmeasurable };
    Status status = Status::unmeasurable;
    double osnr_db = 0;  ///< valid when status == value
    std::string reason;

    bool has_value() const { return status == Status::value; }
};

/// Signal power in `signal_band` (absolute Hz) over the out-of-band noise
/// floor interpolated under the band, referred to the reference bandwidth.
OsnrResult measure_osnr(const Buffer& buf, const Band& signal_band, const OsnrOptions& options = {});
/// Same measurement on an existing estimate (options.rbw is ignored).
OsnrResult measure_osnr(const SpectrumEstimate& est, const Band& signal_band, const OsnrOptions& options = {});

struct SidebandReport {
    double carrier_power_dbm = 0;
    double lower_sideband_power_dbm = 0;
    double upper_sideband_power_dbm = 0;
    double asymmetry_db = 0;  ///< upper - lower
};

/// Integrates carrier +/- 50 MHz and the two sidebands centred at
/// carrier +/- if_freq with width bw. Frequencies are absolute.
SidebandReport measure_sidebands(const Buffer& buf, double carrier, double if_freq, double bw, double rbw = 10e6);
SidebandReport measure_sidebands(const SpectrumEstimate& est, double carrier, double if_freq, double bw);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Exact power (W) in the DFT bins of the whole buffer lying inside `absolute`.
double band_power(const Buffer& buf, const Band& absolute);

inline double power_meter_dbm(const Buffer& buf) { return power_dbm(buf); }

}  // namespace rofsim
