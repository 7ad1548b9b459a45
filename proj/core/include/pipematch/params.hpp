#pragma once

#include <array>
#include <cstddef>
#include <string>

namespace pipematch {

/// Physical parameter set of the flue-pipe synthesizer. Three blocks:
/// harmonic generator, noise generator, passive resonator.
struct ParamVector {
    // harmonic generator
    double h1_gain = 0.8;
    double h2_gain = 0.3;
    double h1_attack_time_s = 0.05;
    double h1_decay_time_s = 0.3;
    double h1_sustain_level = 0.8;
    double h1_overshoot = 1.3;
    double h2_attack_time_s = 0.08;
    double h2_decay_time_s = 0.3;
    double h2_sustain_level = 0.6;
    double h2_overshoot = 1.2;
    double clip_threshold_h1 = 0.9;
    double clip_threshold_h2 = 0.9;
    double comb_delay_samples = 16.0;
    double comb_gain = -0.4;
    double sigmoid_drive = 1.0;
    double bandpass_q = 2.0;
    double bandpass_wet = 0.3;
    // noise generator
    double noise_gain = 0.05;
    double noise_lp_cutoff_hz = 3000.0;
    double granulation_depth = 0.7;
    double fdn_feedback = 0.6;
    double turbulence_depth_cents = 12.0;
    double turbulence_time_s = 0.12;
    // passive resonator
    double dwg_loss_cutoff_hz = 5000.0;
    double dwg_feedback = 0.97;
    double dispersion_coeff = 0.1;
    double dc_block_pole = 0.995;

    static constexpr std::size_t size() { return 27; }

    double& operator[](std::size_t i);
    double operator[](std::size_t i) const;

    std::array<double, 27> to_array() const;
    static ParamVector from_array(const std::array<double, 27>& a);

    /// Throws OutOfRangeParam naming the first offending field.
    void validate() const;

    bool operator==(const ParamVector&) const = default;
};

/// Declared physical range of one field.
struct ParamFieldInfo {
    const char* name;
    double lo;
    double hi;
    bool integer_valued;  // rounded at render time, stored as real
};

/// Field table in serialization order (matches operator[] indices).
const std::array<ParamFieldInfo, 27>& param_fields();

/// Index of a field by name, or npos.
std::size_t param_index(const std::string& name);

/// Parameter vector mapped affinely field-by-field onto [-1, 1].
struct NormalizedParams {
    std::array<double, 27> values{};

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    static constexpr std::size_t size() { return 27; }

    bool operator==(const NormalizedParams&) const = default;
};

NormalizedParams normalize(const ParamVector& p);
ParamVector denormalize(const NormalizedParams& n);

/// Clamp every normalized coordinate into [-1, 1].
NormalizedParams clamp_normalized(NormalizedParams n);

// Flat key=value text form and a JSON form; both round-trip losslessly.
std::string params_to_text(const ParamVector& p);
ParamVector params_from_text(const std::string& text);
std::string params_to_json(const ParamVector& p);
ParamVector params_from_json(const std::string& json_text);

}  // namespace pipematch
