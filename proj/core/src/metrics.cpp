#include "pipematch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pipematch/dsp.hpp"
#include "pipematch/errors.hpp"

namespace pipematch {

using namespace dsp;

namespace {

void check_pitch(const Tone& a, const Tone& b) {
    const double fa = a.f0(), fb = b.f0();
    if (std::abs(fa - fb) > 0.01 * std::max(fa, fb))
        throw PitchMismatch("tones at " + std::to_string(fa) + " Hz and " + std::to_string(fb) +
                            " Hz differ by more than 1%");
}

std::size_t envelope_taper(double sample_rate) {
    return static_cast<std::size_t>(std::llround(0.01 * sample_rate));
}

std::vector<double> envelope_of(const Tone& tone, EnvelopeBand band, double f_center,
                                const AnalysisConfig& cfg) {
    const std::size_t taper = envelope_taper(tone.sample_rate);
    switch (band) {
        case EnvelopeBand::Full:
            return analytic_envelope(tone.samples, taper);
        case EnvelopeBand::Harmonic1:
            return band_envelope(tone.samples, tone.sample_rate, f_center,
                                 cfg.harmonic_half_width * f_center, taper);
        case EnvelopeBand::Harmonic2:
            return band_envelope(tone.samples, tone.sample_rate, 2.0 * f_center,
                                 cfg.harmonic_half_width * f_center, taper);
    }
    throw Error("bad envelope band");
}

std::size_t attack_window_samples(const AnalysisConfig& cfg, const Tone& a, const Tone& b) {
    const auto n = static_cast<std::size_t>(std::llround(cfg.attack_window_end_s * a.sample_rate));
    if (n == 0) throw ToneTooShort("empty attack window");
    if (n > a.samples.size() || n > b.samples.size())
        throw ToneTooShort("attack window of " + std::to_string(n) + " samples exceeds tone length");
    return n;
}

double envelope_sum_sq(std::span<const double> e1, std::span<const double> e2, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = e1[i] - e2[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace

MetricId MetricId::parse(const std::string& text) {
    if (text == "H_H") return {HarmonicNyquist, 0};
    if (text == "E_D") return {Envelope, 0};
    if (text == "E_D1") return {EnvelopeH1, 0};
    if (text == "E_D2") return {EnvelopeH2, 0};
    if (text.rfind("H_", 0) == 0 && text.size() > 2) {
        std::string digits = text.substr(2);
        bool weighted = false;
        if (!digits.empty() && digits.back() == 'W') {
            weighted = true;
            digits.pop_back();
        }
        if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos) {
            const auto L = static_cast<std::size_t>(std::stoul(digits));
            if (L >= 1) return {weighted ? WeightedHarmonicL : HarmonicL, L};
        }
    }
    throw FormatError("unknown metric '" + text + "'");
}

std::string MetricId::str() const {
    switch (kind) {
        case HarmonicL: return "H_" + std::to_string(n_harmonics);
        case HarmonicNyquist: return "H_H";
        case WeightedHarmonicL: return "H_" + std::to_string(n_harmonics) + "W";
        case Envelope: return "E_D";
        case EnvelopeH1: return "E_D1";
        case EnvelopeH2: return "E_D2";
    }
    return "?";
}

void WeightedCost::validate() const {
    if (terms.empty()) throw FormatError("cost has no terms");
    double total = 0.0;
    for (const auto& [id, w] : terms) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw FormatError("metric " + id.str() + " has invalid weight");
        if ((id.kind == MetricId::HarmonicL || id.kind == MetricId::WeightedHarmonicL) &&
            id.n_harmonics < 1)
            throw FormatError("metric " + id.str() + " needs L >= 1");
        total += w;
    }
    if (!(total > 0.0)) throw FormatError("cost needs at least one positive weight");
}

WeightedCost WeightedCost::parse(const std::string& text) {
    WeightedCost cost;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) {
        const auto colon = item.find(':');
        const std::string name = item.substr(0, colon);
        double w = 1.0;
        if (colon != std::string::npos) {
            try {
                w = std::stod(item.substr(colon + 1));
            } catch (const std::exception&) {
                throw FormatError("bad weight in cost term '" + item + "'");
            }
        }
        cost.terms.emplace_back(MetricId::parse(name), w);
    }
    cost.validate();
    return cost;
}

std::string WeightedCost::str() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i) os << ',';
        os << terms[i].first.str() << ':' << terms[i].second;
    }
    return os.str();
}

double harmonic_distance_db(std::span<const double> s1_db, std::span<const double> s2_db,
                            std::size_t L) {
    if (L < 1) throw DimensionMismatch("L must be >= 1");
    if (s1_db.size() < L || s2_db.size() < L)
        throw DimensionMismatch("harmonic vectors shorter than L = " + std::to_string(L));
    double acc = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        const double d = s1_db[l] - s2_db[l];
        acc += d * d;
    }
    return acc / static_cast<double>(L);
}

double weighted_harmonic_distance_db(std::span<const double> target_db,
                                     std::span<const double> candidate_db, std::size_t L,
                                     bool literal_db_weights) {
    if (L < 1) throw DimensionMismatch("L must be >= 1");
    if (target_db.size() < L || candidate_db.size() < L)
        throw DimensionMismatch("harmonic vectors shorter than L = " + std::to_string(L));
    double acc = 0.0;
    if (literal_db_weights) {
        for (std::size_t l = 0; l < L; ++l) {
            const double d = target_db[l] - candidate_db[l];
            acc += target_db[l] * d * d;
        }
    } else {
        double top = target_db[0];
        for (std::size_t l = 1; l < L; ++l) top = std::max(top, target_db[l]);
        for (std::size_t l = 0; l < L; ++l) {
            const double w = std::pow(10.0, (target_db[l] - top) / 20.0);
            const double d = target_db[l] - candidate_db[l];
            acc += w * d * d;
        }
    }
    return acc / static_cast<double>(L);
}

double harmonic_distance(const Tone& target, const Tone& candidate, std::size_t L,
                         const AnalysisConfig& cfg) {
    check_pitch(target, candidate);
    const auto s1 = harmonic_amplitudes_db(target, cfg, L);
    const auto s2 = harmonic_amplitudes_db(candidate, cfg, L);
    return harmonic_distance_db(s1, s2, L);
}

double harmonic_distance_nyquist(const Tone& target, const Tone& candidate,
                                 const AnalysisConfig& cfg) {
    check_pitch(target, candidate);
    const std::size_t L = std::min(harmonics_below_nyquist(target.f0(), target.sample_rate),
                                   harmonics_below_nyquist(candidate.f0(), candidate.sample_rate));
    const auto s1 = harmonic_amplitudes_db(target, cfg, L);
    const auto s2 = harmonic_amplitudes_db(candidate, cfg, L);
    return harmonic_distance_db(s1, s2, L);
}

double weighted_harmonic_distance(const Tone& target, const Tone& candidate, std::size_t L,
                                  const AnalysisConfig& cfg, bool literal_db_weights) {
    check_pitch(target, candidate);
    const auto s1 = harmonic_amplitudes_db(target, cfg, L);
    const auto s2 = harmonic_amplitudes_db(candidate, cfg, L);
    return weighted_harmonic_distance_db(s1, s2, L, literal_db_weights);
}

double envelope_distance(const Tone& target, const Tone& candidate, EnvelopeBand band,
                         const AnalysisConfig& cfg) {
    if (target.sample_rate != candidate.sample_rate)
        throw SampleRateMismatch("envelope distance needs equal sample rates");
    if (band != EnvelopeBand::Full) check_pitch(target, candidate);
    const std::size_t n = attack_window_samples(cfg, target, candidate);
    const double f_center = 0.5 * (target.f0() + candidate.f0());
    const auto e1 = envelope_of(target, band, f_center, cfg);
    const auto e2 = envelope_of(candidate, band, f_center, cfg);
    return envelope_sum_sq(e1, e2, n);
}

double evaluate_cost(const Tone& target, const Tone& candidate, const WeightedCost& cost,
                     const AnalysisConfig& cfg) {
    const CostEvaluator eval(target, cost, cfg);
    return eval(candidate);
}

CostEvaluator::CostEvaluator(Tone target, WeightedCost cost, AnalysisConfig cfg)
    : target_(std::move(target)), cost_(std::move(cost)), cfg_(cfg) {
    cost_.validate();
    for (const auto& [id, w] : cost_.terms) {
        switch (id.kind) {
            case MetricId::HarmonicL:
            case MetricId::WeightedHarmonicL:
                max_harmonics_ = std::max(max_harmonics_, id.n_harmonics);
                break;
            case MetricId::HarmonicNyquist:
                max_harmonics_ = std::max(
                    max_harmonics_, harmonics_below_nyquist(target_.f0(), target_.sample_rate));
                break;
            case MetricId::Envelope:
                need_env_[0] = true;
                break;
            case MetricId::EnvelopeH1:
                need_env_[1] = true;
                break;
            case MetricId::EnvelopeH2:
                need_env_[2] = true;
                break;
        }
    }
    if (max_harmonics_ > 0)
        target_harmonics_db_ = harmonic_amplitudes_db(target_, cfg_, max_harmonics_);
    for (int b = 0; b < 3; ++b)
        if (need_env_[b])
            target_env_[b] =
                envelope_of(target_, static_cast<EnvelopeBand>(b), target_.f0(), cfg_);
    env_window_ =
        static_cast<std::size_t>(std::llround(cfg_.attack_window_end_s * target_.sample_rate));
}

double CostEvaluator::operator()(const Tone& candidate) const {
    std::vector<double> cand_harm;
    std::size_t hh_count = 0;
    if (max_harmonics_ > 0) {
        check_pitch(target_, candidate);
        hh_count = std::min(harmonics_below_nyquist(target_.f0(), target_.sample_rate),
                            harmonics_below_nyquist(candidate.f0(), candidate.sample_rate));
        cand_harm = harmonic_amplitudes_db(candidate, cfg_, max_harmonics_);
    }
    std::vector<double> cand_env[3];
    if (need_env_[0] || need_env_[1] || need_env_[2]) {
        if (candidate.sample_rate != target_.sample_rate)
            throw SampleRateMismatch("envelope distance needs equal sample rates");
        if (env_window_ > candidate.samples.size() || env_window_ > target_.samples.size())
            throw ToneTooShort("attack window exceeds tone length");
        const double f_center = 0.5 * (target_.f0() + candidate.f0());
        for (int b = 0; b < 3; ++b)
            if (need_env_[b])
                cand_env[b] = envelope_of(candidate, static_cast<EnvelopeBand>(b), f_center, cfg_);
    }

    double total = 0.0;
    for (const auto& [id, w] : cost_.terms) {
        if (w == 0.0) continue;
        double v = 0.0;
        try {
            switch (id.kind) {
                case MetricId::HarmonicL:
                    v = harmonic_distance_db(target_harmonics_db_, cand_harm, id.n_harmonics);
                    break;
                case MetricId::HarmonicNyquist:
                    v = harmonic_distance_db(target_harmonics_db_, cand_harm, hh_count);
                    break;
                case MetricId::WeightedHarmonicL:
                    v = weighted_harmonic_distance_db(target_harmonics_db_, cand_harm,
                                                      id.n_harmonics, cost_.literal_db_weights);
                    break;
                case MetricId::Envelope:
                    v = envelope_sum_sq(target_env_[0], cand_env[0], env_window_);
                    break;
                case MetricId::EnvelopeH1:
                    v = envelope_sum_sq(target_env_[1], cand_env[1], env_window_);
                    break;
                case MetricId::EnvelopeH2:
                    v = envelope_sum_sq(target_env_[2], cand_env[2], env_window_);
                    break;
            }
        } catch (const Error& e) {
            throw Error(id.str() + ": " + e.what());
        }
        total += w * v;
    }
    return total;
}

}  // namespace pipematch
