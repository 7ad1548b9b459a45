#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pipematch/tone.hpp"

namespace pipematch {

constexpr double kDbFloor = -120.0;

// Spectral analysis configuration shared by all feature extractors.
struct AnalysisConfig {
    std::size_t fft_size = 8192;
    std::size_t hop_size = 2048;
    double steady_start_s = 1.5;
    double steady_end_s = 3.5;
    double attack_window_end_s = 0.5;
    double harmonic_half_width = 0.03;  // search half-width as a fraction of f0
    std::size_t n_harmonics = 12;       // L
    std::size_t n_mel_bands = 128;      // B
    std::size_t n_envelopes = 10;       // P

    void validate() const;

    // Defaults scaled to the tone: tones shorter than the standard 4 s get a
    // steady-state window of [0.5, 0.9] x duration and a proportionally
    // clipped attack window.
    static AnalysisConfig defaults_for(double sample_rate, double duration_s);
};

struct FeatureLayout {
    std::size_t n_harmonics = 12;
    std::size_t n_mel_bands = 128;
    std::size_t n_envelopes = 10;

    std::size_t total() const { return n_mel_bands + n_harmonics + 1 + 2 * n_envelopes; }
    std::vector<std::string> names() const;
    bool operator==(const FeatureLayout&) const = default;
};

// Concatenated feature row: [logmel B | harmonic amps L | snr | attack P | sustain P].
struct FeatureVector {
    FeatureLayout layout;
    std::vector<double> values;

    double* logmel() { return values.data(); }
    double* harmonics() { return values.data() + layout.n_mel_bands; }
    double& snr() { return values[layout.n_mel_bands + layout.n_harmonics]; }
    double* attacks() { return values.data() + layout.n_mel_bands + layout.n_harmonics + 1; }
    double* sustains() { return attacks() + layout.n_envelopes; }
    const double* logmel() const { return values.data(); }
    const double* harmonics() const { return values.data() + layout.n_mel_bands; }
    double snr() const { return values[layout.n_mel_bands + layout.n_harmonics]; }
    const double* attacks() const {
        return values.data() + layout.n_mel_bands + layout.n_harmonics + 1;
    }
    const double* sustains() const { return attacks() + layout.n_envelopes; }
};

// Label pitch refined by parabolic interpolation on the fundamental peak of
// the steady-state spectrum; the correction is capped at +-1%.
double refine_f0(const Tone& tone, const AnalysisConfig& cfg);

// Per-harmonic steady-state amplitudes in dB, normalized so the strongest
// harmonic sits at 0 dB; absent or above-Nyquist harmonics at the floor.
std::vector<double> extract_harmonics(const Tone& tone, const AnalysisConfig& cfg);

// Same, for an explicit harmonic count outside the feature-layout range;
// the distance metrics need every harmonic below Nyquist.
std::vector<double> harmonic_amplitudes_db(const Tone& tone, const AnalysisConfig& cfg,
                                           std::size_t count);

// Number of full harmonics strictly below Nyquist (at least 1).
std::size_t harmonics_below_nyquist(double f0, double sample_rate);

// Periodic-to-stochastic power ratio in dB over the steady-state window,
// clamped to [-60, 80].
double compute_snr(const Tone& tone, const AnalysisConfig& cfg);

// Log mel-filterbank energies of the steady-state mean spectrum.
std::vector<double> compute_logmel(const Tone& tone, const AnalysisConfig& cfg);

struct AttackSustain {
    std::vector<double> attack_s;    // time to reach 90% of the steady envelope mean
    std::vector<double> sustain_db;  // steady envelope mean in dB
};

// Band-limited envelope characterization of the first P harmonics. Bands at
// or above Nyquist and silent bands report attack 0 / sustain at the floor.
AttackSustain extract_attack_sustain(const Tone& tone, const AnalysisConfig& cfg);

FeatureVector extract_features(const Tone& tone, const AnalysisConfig& cfg);

// --- persistence: CSV with a layout-derived header, and a binary columnar
// form; both round-trip the layout exactly ---

std::string features_to_csv(const std::vector<FeatureVector>& rows);
std::vector<FeatureVector> features_from_csv(const std::string& csv);

std::string features_to_binary(const std::vector<FeatureVector>& rows);
std::vector<FeatureVector> features_from_binary(const std::string& blob);

}  // namespace pipematch
