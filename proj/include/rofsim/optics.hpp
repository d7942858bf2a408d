#pragma once

#include <span>
#include <vector>

#include "rofsim/errors.hpp"
#include "rofsim/rng.hpp"
#include "rofsim/sample_buffer.hpp"

namespace rofsim {

struct LaserSpec {
    double frequency = 194971.875e9;  ///< Hz
    double power_dbm = 15.0;
    double linewidth = 0.0;  ///< Hz, Lorentzian (Wiener phase noise)

    void validate() const;
};

struct MzmSpec {
    double v_pi = 3.5;               ///< V
    double bias_point = 0.5;         ///< fraction of V_pi; 0.5 is quadrature
    double modulation_index = 0.2;   ///< peak drive / V_pi
    double insertion_loss_db = 5.0;
    /// Rescale the drive so its peak equals modulation_index * v_pi. When
    /// false the drive is taken in volts as-is.
    bool normalize_drive = true;

    void validate() const;
};

/// Super-Gaussian passband over one flexgrid slot. Frequencies are absolute.
struct WssFilterProfile {
    double slot_low = 0;
    double slot_high = 0;
    int shape_order = 4;
    double misalignment = 0;  ///< Hz, added to both edges
    double floor_rejection_db = 40;
    double insertion_loss_db = 6;
    bool ideal = false;  ///< brick-wall with infinite rejection

    double center() const { return 0.5 * (slot_low + slot_high) + misalignment; }
    double bandwidth() const { return slot_high - slot_low; }
    /// Edge slope at the -3 dB points, dB per GHz.
    double edge_steepness_db_per_ghz() const;
    /// |H(f)|^2 excluding insertion loss.
    double power_transfer(double f) const;

    void validate() const;
};

/// Combined transfer of a WSS port routing several slots: per-slot
/// transfers add (capped at one) over a common floor.
double port_power_transfer(std::span<const WssFilterProfile> slots, double f);

struct EdfaSpec {
    double gain_db = 20;
    double noise_figure_db = 5;
    double saturation_output_dbm = 23;
    double min_gain_db = 5;
    double max_gain_db = 25;
    bool ase_enabled = true;

    void validate() const;
};

struct FiberSpec {
    double length_km = 0;
    double attenuation_db_per_km = 0.2;
    double dispersion_ps_per_nm_km = 17;

    void validate() const;
};

struct PhotodetectorSpec {
    double responsivity = 0.8;          ///< A/W
    double bandwidth = 20e9;            ///< Hz, -3 dB
    double thermal_noise_density = 0;   ///< A/sqrt(Hz), one-sided
    bool shot_noise = true;
    int filter_order = 8;               ///< super-Gaussian order of the electrical response

    void validate() const;
};

/// CW laser field on `rate`-sampled grid of `length`, centred on the laser frequency.
Buffer laser_field(const LaserSpec& laser, Eigen::Index length, double rate, const RngStream& rng = {});

/// Intensity modulation of the laser by the real part of `drive`. The output
/// is centred on the laser frequency at the drive's sample rate.
Buffer mzm_modulate(const LaserSpec& carrier, const Buffer& drive, const MzmSpec& spec, Warnings* warnings = nullptr,
                    const RngStream& rng = {});

Buffer propagate_fiber(Buffer field, const FiberSpec& spec);

/// Gain plus ASE in both polarisations (single-mode input is promoted).
Buffer amplify(Buffer field, const EdfaSpec& spec, const RngStream& rng, Warnings* warnings = nullptr);

/// Gain actually applied after saturation for a given input power (W).
double saturated_gain_db(const EdfaSpec& spec, double input_power_w, double sample_rate, double frequency);

/// One-polarisation ASE PSD (W/Hz) for gain `gain_db`.
double ase_psd_per_polarization(double gain_db, double noise_figure_db, double frequency);

Buffer wss_filter(Buffer field, const WssFilterProfile& profile);
Buffer wss_filter(Buffer field, std::span<const WssFilterProfile> slots);

Buffer attenuate(Buffer field, double atten_db);

/// sqrt(ratio) * a + sqrt(1 - ratio) * b on a common grid.
Buffer couple(const Buffer& a, const Buffer& b, double ratio);

/// Square-law detection, shot/thermal noise, electrical low-pass. Returns the
/// analytic photocurrent (A) at the input sample rate, centred on 0 Hz.
Buffer photodetect(const Buffer& field, const PhotodetectorSpec& spec, const RngStream& rng);

/// |H|^2 of the photodetector electrical response.
double photodetector_response(const PhotodetectorSpec& spec, double f);

}  // namespace rofsim
