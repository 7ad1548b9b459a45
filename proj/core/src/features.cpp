#include "pipematch/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>

#include "pipematch/dsp.hpp"
#include "pipematch/errors.hpp"
#include "pipematch/io.hpp"

namespace pipematch {

using namespace dsp;

namespace {

constexpr double kSilentPower = 1e-28;      // below this a spectrum counts as silent
constexpr double kSilentEnvelope = 1e-11;   // below this a band envelope counts as silent
constexpr double kMinBandBins = 4.5;        // harmonic band must cover the window main lobe
constexpr double kEnvelopeHalfWidth = 0.35; // fraction of f0; keeps bands clear of neighbours

double power_db(double p) { return std::max(10.0 * std::log10(std::max(p, 0.0) + 1e-300), kDbFloor); }
double amp_db(double a) { return std::max(20.0 * std::log10(std::max(a, 0.0) + 1e-300), kDbFloor); }

struct SpectrumContext {
    std::vector<double> power;  // steady-state mean power, fft_size/2+1 bins
    double bin_hz = 0.0;
    double nyquist = 0.0;
    double f0 = 0.0;  // refined
};

std::pair<std::size_t, std::size_t> steady_bounds(const Tone& tone, const AnalysisConfig& cfg) {
    const auto a = static_cast<std::size_t>(std::llround(cfg.steady_start_s * tone.sample_rate));
    const auto b = static_cast<std::size_t>(std::llround(cfg.steady_end_s * tone.sample_rate));
    if (b > tone.samples.size())
        throw ToneTooShort("steady-state window ends at " + std::to_string(cfg.steady_end_s) +
                           " s but tone lasts " + std::to_string(tone.duration_s()) + " s");
    return {a, b};
}

// Strongest bin within [f_lo, f_hi]; returns bin index, or npos if the range
// misses the spectrum.
std::size_t peak_bin(const std::vector<double>& power, double bin_hz, double f_lo, double f_hi) {
    auto lo = static_cast<long long>(std::ceil(f_lo / bin_hz));
    auto hi = static_cast<long long>(std::floor(f_hi / bin_hz));
    lo = std::max(lo, 0LL);
    hi = std::min(hi, static_cast<long long>(power.size()) - 1);
    if (lo > hi) return static_cast<std::size_t>(-1);
    std::size_t best = static_cast<std::size_t>(lo);
    for (auto k = static_cast<std::size_t>(lo); k <= static_cast<std::size_t>(hi); ++k)
        if (power[k] > power[best]) best = k;
    return best;
}

SpectrumContext make_context(const Tone& tone, const AnalysisConfig& cfg) {
    cfg.validate();
    const auto [a, b] = steady_bounds(tone, cfg);
    SpectrumContext ctx;
    ctx.power = mean_power_spectrum(tone.samples, a, b, cfg.fft_size, cfg.hop_size);
    ctx.bin_hz = tone.sample_rate / static_cast<double>(cfg.fft_size);
    ctx.nyquist = 0.5 * tone.sample_rate;

    const double f_label = tone.f0();
    ctx.f0 = f_label;
    const double hw =
        std::max(cfg.harmonic_half_width * f_label, kMinBandBins * ctx.bin_hz);
    const std::size_t k = peak_bin(ctx.power, ctx.bin_hz, f_label - hw, f_label + hw);
    if (k != static_cast<std::size_t>(-1) && ctx.power[k] > kSilentPower) {
        const double refined = parabolic_peak(ctx.power, k) * ctx.bin_hz;
        ctx.f0 = std::min(std::max(refined, 0.99 * f_label), 1.01 * f_label);
    }
    return ctx;
}

double band_halfwidth_hz(const SpectrumContext& ctx, const AnalysisConfig& cfg) {
    return std::max(cfg.harmonic_half_width * ctx.f0, kMinBandBins * ctx.bin_hz);
}

// Peak power corrected for scalloping: height of the log-power parabola
// through the peak bin and its neighbours.
double interpolated_peak_power(const std::vector<double>& power, std::size_t k) {
    double p = power[k];
    if (k == 0 || k + 1 >= power.size()) return p;
    const double eps = 1e-300;
    const double la = std::log(power[k - 1] + eps);
    const double lb = std::log(p + eps);
    const double lc = std::log(power[k + 1] + eps);
    const double denom = la - 2.0 * lb + lc;
    if (denom < 0.0) {
        const double delta = std::clamp(0.5 * (la - lc) / denom, -0.5, 0.5);
        p = std::exp(lb - 0.5 * denom * delta * delta);
    }
    return p;
}

std::vector<double> harmonics_from(const SpectrumContext& ctx, const AnalysisConfig& cfg,
                                   std::size_t count) {
    const double hw = band_halfwidth_hz(ctx, cfg);
    std::vector<double> out(count, kDbFloor);
    std::vector<char> measured(count, 0);
    double top = 0.0;
    bool any = false;
    for (std::size_t l = 0; l < count; ++l) {
        const double fc = (l + 1) * ctx.f0;
        if (fc >= ctx.nyquist) continue;
        const std::size_t k = peak_bin(ctx.power, ctx.bin_hz, fc - hw, fc + hw);
        if (k == static_cast<std::size_t>(-1)) continue;
        if (ctx.power[k] > kSilentPower) {
            // Raw level without a floor; the floor applies after
            // normalization so it sits at a fixed depth below the top
            // harmonic and the result is invariant to overall gain.
            out[l] = 10.0 * std::log10(interpolated_peak_power(ctx.power, k) + 1e-300);
            measured[l] = 1;
            if (!any || out[l] > top) top = out[l];
            any = true;
        }
    }
    if (!any) return out;  // silent tone: floor everywhere, no normalization
    for (std::size_t l = 0; l < count; ++l)
        out[l] = measured[l] ? std::max(out[l] - top, kDbFloor) : kDbFloor;
    return out;
}

double snr_from(const SpectrumContext& ctx, const AnalysisConfig& cfg) {
    const double hw = band_halfwidth_hz(ctx, cfg);
    double total = 0.0;
    for (double p : ctx.power) total += p;
    double harmonic = 0.0;
    for (std::size_t l = 0; l < cfg.n_harmonics; ++l) {
        const double fc = (l + 1) * ctx.f0;
        if (fc >= ctx.nyquist) break;
        auto lo = static_cast<long long>(std::ceil((fc - hw) / ctx.bin_hz));
        auto hi = static_cast<long long>(std::floor((fc + hw) / ctx.bin_hz));
        lo = std::max(lo, 0LL);
        hi = std::min(hi, static_cast<long long>(ctx.power.size()) - 1);
        for (long long k = lo; k <= hi; ++k) harmonic += ctx.power[static_cast<std::size_t>(k)];
    }
    const double residual = std::max(total - harmonic, 0.0);
    if (harmonic <= kSilentPower) return -60.0;
    const double snr = 10.0 * std::log10(harmonic / std::max(residual, 1e-300));
    return std::min(std::max(snr, -60.0), 80.0);
}

std::vector<double> logmel_from(const SpectrumContext& ctx, const AnalysisConfig& cfg) {
    const auto bank = mel_filterbank(cfg.n_mel_bands, ctx.power.size(), ctx.nyquist);
    std::vector<double> out(cfg.n_mel_bands, kDbFloor);
    for (std::size_t b = 0; b < bank.size(); ++b) {
        double e = 0.0;
        for (std::size_t i = 0; i < bank[b].weights.size(); ++i)
            e += bank[b].weights[i] * ctx.power[bank[b].first_bin + i];
        out[b] = power_db(e);
    }
    return out;
}

}  // namespace

void AnalysisConfig::validate() const {
    if (!is_pow2(fft_size) || fft_size < 2048)
        throw FormatError("fft_size must be a power of two >= 2048");
    if (hop_size == 0 || hop_size > fft_size) throw FormatError("hop_size must be in [1, fft_size]");
    if (!(steady_end_s > steady_start_s) || steady_start_s < 0.0)
        throw FormatError("steady-state window must satisfy 0 <= start < end");
    if (!(harmonic_half_width > 0.0) || harmonic_half_width >= 0.5)
        throw FormatError("harmonic_half_width must be in (0, 0.5)");
    if (n_harmonics < 10 || n_harmonics > 100) throw FormatError("n_harmonics must be in [10, 100]");
    if (n_mel_bands < 64 || n_mel_bands > 256) throw FormatError("n_mel_bands must be in [64, 256]");
    if (n_envelopes < 6 || n_envelopes > 12) throw FormatError("n_envelopes must be in [6, 12]");
}

AnalysisConfig AnalysisConfig::defaults_for(double sample_rate, double duration_s) {
    AnalysisConfig cfg;
    if (duration_s < 4.0) {
        cfg.steady_start_s = 0.5 * duration_s;
        cfg.steady_end_s = 0.9 * duration_s;
        cfg.attack_window_end_s = std::min(0.5, 0.5 * duration_s);
    }
    // keep at least two analysis frames in the steady window
    const double window_s = cfg.steady_end_s - cfg.steady_start_s;
    while (cfg.fft_size > 2048 &&
           static_cast<double>(cfg.fft_size + cfg.hop_size) > window_s * sample_rate) {
        cfg.fft_size /= 2;
        cfg.hop_size /= 2;
    }
    return cfg;
}

std::vector<std::string> FeatureLayout::names() const {
    std::vector<std::string> out;
    out.reserve(total());
    for (std::size_t b = 0; b < n_mel_bands; ++b) out.push_back("mel_" + std::to_string(b));
    for (std::size_t l = 0; l < n_harmonics; ++l)
        out.push_back("harm_db_" + std::to_string(l + 1));
    out.push_back("snr_db");
    for (std::size_t p = 0; p < n_envelopes; ++p)
        out.push_back("attack_s_" + std::to_string(p + 1));
    for (std::size_t p = 0; p < n_envelopes; ++p)
        out.push_back("sustain_db_" + std::to_string(p + 1));
    return out;
}

double refine_f0(const Tone& tone, const AnalysisConfig& cfg) {
    return make_context(tone, cfg).f0;
}

std::vector<double> extract_harmonics(const Tone& tone, const AnalysisConfig& cfg) {
    return harmonics_from(make_context(tone, cfg), cfg, cfg.n_harmonics);
}

std::vector<double> harmonic_amplitudes_db(const Tone& tone, const AnalysisConfig& cfg,
                                           std::size_t count) {
    if (count < 1) throw DimensionMismatch("harmonic count must be >= 1");
    return harmonics_from(make_context(tone, cfg), cfg, count);
}

std::size_t harmonics_below_nyquist(double f0, double sample_rate) {
    const double nyquist = 0.5 * sample_rate;
    const auto n = static_cast<long long>(std::ceil(nyquist / f0)) - 1;
    return static_cast<std::size_t>(std::max(n, 1LL));
}

double compute_snr(const Tone& tone, const AnalysisConfig& cfg) {
    return snr_from(make_context(tone, cfg), cfg);
}

std::vector<double> compute_logmel(const Tone& tone, const AnalysisConfig& cfg) {
    return logmel_from(make_context(tone, cfg), cfg);
}

AttackSustain extract_attack_sustain(const Tone& tone, const AnalysisConfig& cfg) {
    cfg.validate();
    const auto [a, b] = steady_bounds(tone, cfg);
    const SpectrumContext ctx = make_context(tone, cfg);
    // Wide bands: attack resolution is set by the band width, not by the
    // spectral peak-search width.
    const double hw = kEnvelopeHalfWidth * ctx.f0;
    const auto taper = static_cast<std::size_t>(std::llround(0.01 * tone.sample_rate));

    AttackSustain out;
    out.attack_s.assign(cfg.n_envelopes, 0.0);
    out.sustain_db.assign(cfg.n_envelopes, kDbFloor);
    for (std::size_t l = 0; l < cfg.n_envelopes; ++l) {
        const double fc = (l + 1) * ctx.f0;
        if (fc + hw >= ctx.nyquist) continue;
        const std::vector<double> env =
            band_envelope(tone.samples, tone.sample_rate, fc, hw, taper);
        double steady = 0.0;
        for (std::size_t i = a; i < b; ++i) steady += env[i];
        steady /= static_cast<double>(b - a);
        if (steady < kSilentEnvelope) continue;
        out.sustain_db[l] = amp_db(steady);
        const double target = 0.9 * steady;
        std::size_t hit = 0;
        while (hit < env.size() && env[hit] < target) ++hit;
        out.attack_s[l] = static_cast<double>(hit) / tone.sample_rate;
    }
    return out;
}

FeatureVector extract_features(const Tone& tone, const AnalysisConfig& cfg) {
    const SpectrumContext ctx = make_context(tone, cfg);
    FeatureVector fv;
    fv.layout = {cfg.n_harmonics, cfg.n_mel_bands, cfg.n_envelopes};
    fv.values.resize(fv.layout.total());

    const auto mel = logmel_from(ctx, cfg);
    std::copy(mel.begin(), mel.end(), fv.logmel());
    const auto harm = harmonics_from(ctx, cfg, cfg.n_harmonics);
    std::copy(harm.begin(), harm.end(), fv.harmonics());
    fv.snr() = snr_from(ctx, cfg);
    const auto env = extract_attack_sustain(tone, cfg);
    std::copy(env.attack_s.begin(), env.attack_s.end(), fv.attacks());
    std::copy(env.sustain_db.begin(), env.sustain_db.end(), fv.sustains());
    return fv;
}

// --- persistence ---

namespace {

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

FeatureLayout layout_from_names(const std::vector<std::string>& names) {
    FeatureLayout layout{0, 0, 0};
    std::size_t snr_count = 0, sustain_count = 0;
    for (const auto& n : names) {
        if (n.rfind("mel_", 0) == 0) ++layout.n_mel_bands;
        else if (n.rfind("harm_db_", 0) == 0) ++layout.n_harmonics;
        else if (n == "snr_db") ++snr_count;
        else if (n.rfind("attack_s_", 0) == 0) ++layout.n_envelopes;
        else if (n.rfind("sustain_db_", 0) == 0) ++sustain_count;
        else throw FormatError("unknown feature column '" + n + "'");
    }
    if (snr_count != 1 || sustain_count != layout.n_envelopes)
        throw FormatError("malformed feature header");
    if (layout.names() != names) throw FormatError("feature columns out of order");
    return layout;
}

}  // namespace

std::string features_to_csv(const std::vector<FeatureVector>& rows) {
    if (rows.empty()) throw EmptyDataset("no feature rows to serialize");
    const FeatureLayout layout = rows[0].layout;
    std::ostringstream os;
    os << csv_join(layout.names()) << "\n";
    for (const auto& row : rows) {
        if (!(row.layout == layout)) throw DimensionMismatch("mixed feature layouts");
        for (std::size_t i = 0; i < row.values.size(); ++i) {
            if (i) os << ',';
            os << format_g17(row.values[i]);
        }
        os << "\n";
    }
    return os.str();
}

std::vector<FeatureVector> features_from_csv(const std::string& csv) {
    std::istringstream is(csv);
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty feature csv");
    const FeatureLayout layout = layout_from_names(csv_split(line));
    std::vector<FeatureVector> rows;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = csv_split(line);
        if (fields.size() != layout.total())
            throw FormatError("feature row has " + std::to_string(fields.size()) +
                              " columns, expected " + std::to_string(layout.total()));
        FeatureVector fv;
        fv.layout = layout;
        fv.values.reserve(fields.size());
        for (const auto& f : fields) fv.values.push_back(std::stod(f));
        rows.push_back(std::move(fv));
    }
    return rows;
}

std::string features_to_binary(const std::vector<FeatureVector>& rows) {
    if (rows.empty()) throw EmptyDataset("no feature rows to serialize");
    const FeatureLayout layout = rows[0].layout;
    std::string out = "PMFB";
    append_raw<std::uint32_t>(out, 1);  // version
    append_raw<std::uint32_t>(out, static_cast<std::uint32_t>(layout.n_harmonics));
    append_raw<std::uint32_t>(out, static_cast<std::uint32_t>(layout.n_mel_bands));
    append_raw<std::uint32_t>(out, static_cast<std::uint32_t>(layout.n_envelopes));
    append_raw<std::uint64_t>(out, rows.size());
    for (std::size_t col = 0; col < layout.total(); ++col)
        for (const auto& row : rows) {
            if (!(row.layout == layout)) throw DimensionMismatch("mixed feature layouts");
            append_raw<double>(out, row.values[col]);
        }
    return out;
}

std::vector<FeatureVector> features_from_binary(const std::string& blob) {
    if (blob.size() < 4 || blob.compare(0, 4, "PMFB") != 0)
        throw FormatError("not a feature blob");
    std::size_t pos = 4;
    const auto version = read_raw<std::uint32_t>(blob, pos);
    if (version != 1) throw FormatError("unsupported feature blob version");
    FeatureLayout layout;
    layout.n_harmonics = read_raw<std::uint32_t>(blob, pos);
    layout.n_mel_bands = read_raw<std::uint32_t>(blob, pos);
    layout.n_envelopes = read_raw<std::uint32_t>(blob, pos);
    const auto n_rows = read_raw<std::uint64_t>(blob, pos);
    std::vector<FeatureVector> rows(n_rows);
    for (auto& row : rows) {
        row.layout = layout;
        row.values.resize(layout.total());
    }
    for (std::size_t col = 0; col < layout.total(); ++col)
        for (std::size_t r = 0; r < n_rows; ++r) rows[r].values[col] = read_raw<double>(blob, pos);
    return rows;
}

}  // namespace pipematch
