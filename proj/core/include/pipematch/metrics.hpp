#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pipematch/features.hpp"
#include "pipematch/tone.hpp"

namespace pipematch {

// Acoustic distance identifiers. Text forms: "H_<L>" (mean squared harmonic
// dB distance over the first L harmonics), "H_H" (same, up to Nyquist),
// "H_<L>W" (target-amplitude-weighted), "E_D" (attack envelope distance),
// "E_D1"/"E_D2" (band-limited to harmonic 1/2).
struct MetricId {
    enum Kind { HarmonicL, HarmonicNyquist, WeightedHarmonicL, Envelope, EnvelopeH1, EnvelopeH2 };
    Kind kind = HarmonicL;
    std::size_t n_harmonics = 10;  // L, used by HarmonicL and WeightedHarmonicL

    static MetricId parse(const std::string& text);
    std::string str() const;
    bool operator==(const MetricId&) const = default;
};

// Nonnegative linear combination of metrics; at least one weight must be
// strictly positive.
struct WeightedCost {
    std::vector<std::pair<MetricId, double>> terms;
    // Compatibility switch: weight harmonic differences by the raw target dB
    // value instead of the normalized linear magnitude.
    bool literal_db_weights = false;

    void validate() const;
    static WeightedCost parse(const std::string& text);  // "H_H:1,H_10:1,H_10W:3"
    std::string str() const;
};

// --- spectrum-level forms, operating on harmonic amplitude dB vectors ---

double harmonic_distance_db(std::span<const double> s1_db, std::span<const double> s2_db,
                            std::size_t L);
double weighted_harmonic_distance_db(std::span<const double> target_db,
                                     std::span<const double> candidate_db, std::size_t L,
                                     bool literal_db_weights = false);

// --- tone-level forms ---

double harmonic_distance(const Tone& target, const Tone& candidate, std::size_t L,
                         const AnalysisConfig& cfg);
double harmonic_distance_nyquist(const Tone& target, const Tone& candidate,
                                 const AnalysisConfig& cfg);
double weighted_harmonic_distance(const Tone& target, const Tone& candidate, std::size_t L,
                                  const AnalysisConfig& cfg, bool literal_db_weights = false);

enum class EnvelopeBand { Full, Harmonic1, Harmonic2 };

double envelope_distance(const Tone& target, const Tone& candidate, EnvelopeBand band,
                         const AnalysisConfig& cfg);

double evaluate_cost(const Tone& target, const Tone& candidate, const WeightedCost& cost,
                     const AnalysisConfig& cfg);

// Precomputes all target-side spectra/envelopes once; operator() then only
// analyzes the candidate. Read-only after construction, safe to share across
// threads.
class CostEvaluator {
public:
    CostEvaluator(Tone target, WeightedCost cost, AnalysisConfig cfg);

    double operator()(const Tone& candidate) const;
    const WeightedCost& cost() const { return cost_; }
    const Tone& target() const { return target_; }
    const AnalysisConfig& config() const { return cfg_; }

private:
    Tone target_;
    WeightedCost cost_;
    AnalysisConfig cfg_;
    std::size_t max_harmonics_ = 0;
    std::vector<double> target_harmonics_db_;
    std::vector<double> target_env_[3];  // indexed by EnvelopeBand
    bool need_env_[3] = {false, false, false};
    std::size_t env_window_ = 0;
};

}  // namespace pipematch
