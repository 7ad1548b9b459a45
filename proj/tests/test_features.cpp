#include <cmath>
#include <vector>

#include <doctest.h>

#include <pipematch/dsp.hpp>
#include <pipematch/errors.hpp>
#include <pipematch/features.hpp>
#include <pipematch/pipe_model.hpp>
#include <pipematch/rng.hpp>

using namespace pipematch;

namespace {

Tone make_tone(std::vector<double> samples, int note, double fs = 32000.0) {
    Tone t;
    t.samples = std::move(samples);
    t.note = note;
    t.sample_rate = fs;
    return t;
}

// Additive tone with given per-harmonic linear amplitudes, 4 s at 32 kHz.
Tone additive(int note, const std::vector<double>& amps, double detune = 1.0,
              double fs = 32000.0, double dur = 4.0) {
    const double f0 = note_to_f0(note) * detune;
    std::vector<double> x(std::size_t(fs * dur), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = double(i) / fs;
        for (std::size_t l = 0; l < amps.size(); ++l)
            x[i] += amps[l] * std::sin(2.0 * M_PI * (l + 1) * f0 * t + 0.3 * double(l));
    }
    return make_tone(std::move(x), note, fs);
}

}  // namespace

TEST_SUITE_BEGIN("features");

TEST_CASE("layout arithmetic and names") {
    FeatureLayout layout;
    CHECK(layout.total() == 128 + 12 + 1 + 2 * 10);
    const auto names = layout.names();
    REQUIRE(names.size() == layout.total());
    CHECK(names[0] == "mel_0");
    CHECK(names[128] == "harm_db_1");
    CHECK(names[128 + 12] == "snr_db");
    CHECK(names[128 + 13] == "attack_s_1");
    CHECK(names[128 + 13 + 10] == "sustain_db_1");
}

TEST_CASE("config validation") {
    AnalysisConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.fft_size = 1000;  // not a power of two
    CHECK_THROWS_AS(cfg.validate(), FormatError);
    cfg = AnalysisConfig{};
    cfg.steady_end_s = cfg.steady_start_s;
    CHECK_THROWS_AS(cfg.validate(), FormatError);
}

TEST_CASE("defaults scale down for short tones") {
    const AnalysisConfig four = AnalysisConfig::defaults_for(32000.0, 4.0);
    CHECK(four.steady_start_s == doctest::Approx(1.5));
    CHECK(four.steady_end_s == doctest::Approx(3.5));
    CHECK(four.fft_size == 8192);

    const AnalysisConfig one = AnalysisConfig::defaults_for(32000.0, 1.0);
    CHECK(one.steady_start_s == doctest::Approx(0.5));
    CHECK(one.steady_end_s == doctest::Approx(0.9));
    CHECK(one.attack_window_end_s <= 0.5);
    // Window of 0.4 s = 12800 samples still fits one 8192+2048 frame.
    CHECK(one.fft_size == 8192);

    const AnalysisConfig tiny = AnalysisConfig::defaults_for(32000.0, 0.5);
    CHECK(tiny.fft_size < 8192);
    CHECK_NOTHROW(tiny.validate());
}

TEST_CASE("harmonics of a pure sine") {
    const Tone tone = additive(36, {0.5});
    const AnalysisConfig cfg;
    const auto h = extract_harmonics(tone, cfg);
    REQUIRE(h.size() == cfg.n_harmonics);
    CHECK(h[0] == 0.0);
    for (std::size_t l = 1; l < h.size(); ++l) CHECK(h[l] <= -60.0);
}

TEST_CASE("two-harmonic ratio is recovered") {
    const Tone tone = additive(36, {1.0, 0.5});
    const auto h = extract_harmonics(tone, AnalysisConfig{});
    CHECK(h[0] == 0.0);
    CHECK(h[1] == doctest::Approx(-6.02).epsilon(0.017));  // +-0.1 dB
}

TEST_CASE("silence reports the floor everywhere") {
    const Tone tone = make_tone(std::vector<double>(128000, 0.0), 36);
    const AnalysisConfig cfg;
    const auto h = extract_harmonics(tone, cfg);
    for (double v : h) CHECK(v == kDbFloor);
    const auto mel = compute_logmel(tone, cfg);
    for (double v : mel) CHECK(v == kDbFloor);
    const auto as = extract_attack_sustain(tone, cfg);
    for (double v : as.attack_s) CHECK(v == 0.0);
    for (double v : as.sustain_db) CHECK(v == kDbFloor);
    CHECK(std::isfinite(compute_snr(tone, cfg)));
}

TEST_CASE("harmonic amplitudes are scale invariant") {
    const Tone tone = render_tone(ParamVector{}, 36, 4.0, 32000.0, 11);
    Tone half = tone;
    for (double& v : half.samples) v *= 0.5;
    const AnalysisConfig cfg;
    const auto a = extract_harmonics(tone, cfg);
    const auto b = extract_harmonics(half, cfg);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-6);
    CHECK(std::abs(compute_snr(tone, cfg) - compute_snr(half, cfg)) < 1e-6);
}

TEST_CASE("harmonics above Nyquist report the floor") {
    const Tone tone = additive(60, {1.0});  // f0 ~ 1385 Hz, harmonic 12 > 16 kHz
    const auto h = extract_harmonics(tone, AnalysisConfig{});
    CHECK(h[0] == 0.0);
    CHECK(h[11] == kDbFloor);
    CHECK(harmonics_below_nyquist(note_to_f0(60), 32000.0) == 11);
    CHECK(harmonics_below_nyquist(16000.0, 32000.0) == 1);
}

TEST_CASE("model harmonics agree with a long-FFT oracle") {
    const Tone tone = render_tone(ParamVector{}, 36, 4.0, 32000.0, 17);
    AnalysisConfig cfg;
    const auto h = extract_harmonics(tone, cfg);

    AnalysisConfig fine = cfg;
    fine.fft_size = cfg.fft_size * 4;
    fine.hop_size = cfg.hop_size * 4;
    const auto oracle = extract_harmonics(tone, fine);
    for (std::size_t l = 0; l < h.size(); ++l)
        if (oracle[l] > -60.0) CHECK(std::abs(h[l] - oracle[l]) < 1.0);
}

TEST_CASE("snr separates clean, mixed and noisy signals") {
    const Tone clean = additive(36, {1.0});
    Rng rng(41);
    Tone noisy = clean;
    for (double& v : noisy.samples) v = rng.gaussian() * 0.5;
    Tone mixed = clean;
    // Equal total power: sine power 0.5, noise sigma^2 = 0.5.
    for (double& v : mixed.samples) v += rng.gaussian() * std::sqrt(0.5);

    const AnalysisConfig cfg;
    const double s_clean = compute_snr(clean, cfg);
    const double s_mixed = compute_snr(mixed, cfg);
    const double s_noisy = compute_snr(noisy, cfg);
    CHECK(s_clean >= 60.0);
    CHECK(s_clean <= 80.0);
    CHECK(std::abs(s_mixed) < 1.5);
    CHECK(s_noisy <= -10.0);
    CHECK(s_noisy >= -60.0);
}

TEST_CASE("logmel peak band contains the sine") {
    const Tone tone = additive(36, {1.0});
    const AnalysisConfig cfg;
    const auto mel = compute_logmel(tone, cfg);
    REQUIRE(mel.size() == cfg.n_mel_bands);
    std::size_t peak = 0;
    for (std::size_t i = 1; i < mel.size(); ++i)
        if (mel[i] > mel[peak]) peak = i;
    // f0 ~349.2 Hz sits in the low quarter of the mel axis at 16 kHz Nyquist.
    CHECK(peak < mel.size() / 4);

    Tone half = tone;
    for (double& v : half.samples) v *= 0.5;
    const auto mel_half = compute_logmel(half, cfg);
    for (std::size_t i = 0; i < mel.size(); ++i)
        if (mel[i] > -100.0) CHECK(mel[i] - mel_half[i] == doctest::Approx(6.0206).epsilon(0.002));
}

TEST_CASE("attack time of a ramped sine") {
    const double fs = 32000.0;
    const double f0 = note_to_f0(36);
    std::vector<double> x(std::size_t(4.0 * fs));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = double(i) / fs;
        const double a = t < 0.5 ? t / 0.5 : 1.0;
        x[i] = 0.8 * a * std::sin(2.0 * M_PI * f0 * t);
    }
    const Tone tone = make_tone(std::move(x), 36);
    AnalysisConfig cfg;
    cfg.attack_window_end_s = 1.0;  // the ramp outlasts the default window
    const auto as = extract_attack_sustain(tone, cfg);
    REQUIRE(as.attack_s.size() == cfg.n_envelopes);
    CHECK(as.attack_s[0] == doctest::Approx(0.45).epsilon(0.045));  // +-0.02 s
    CHECK(as.sustain_db[0] == doctest::Approx(20.0 * std::log10(0.8)).epsilon(0.05));
    // Silent upper bands: degenerate rule.
    CHECK(as.attack_s[5] == 0.0);
    CHECK(as.sustain_db[5] == kDbFloor);
}

TEST_CASE("instant attack is near zero") {
    const Tone tone = additive(36, {1.0});
    const auto as = extract_attack_sustain(tone, AnalysisConfig{});
    CHECK(as.attack_s[0] <= 2.0 / note_to_f0(36));
}

TEST_CASE("f0 refinement follows small detunings and caps at one percent") {
    const AnalysisConfig cfg;
    const double f0 = note_to_f0(36);
    CHECK(refine_f0(additive(36, {1.0}), cfg) == doctest::Approx(f0).epsilon(1e-3));
    CHECK(refine_f0(additive(36, {1.0}, 1.004), cfg) ==
          doctest::Approx(f0 * 1.004).epsilon(1e-3));
    CHECK(refine_f0(additive(36, {1.0}, 1.03), cfg) == doctest::Approx(f0 * 1.01).epsilon(1e-6));
    CHECK(refine_f0(additive(36, {1.0}, 0.97), cfg) == doctest::Approx(f0 * 0.99).epsilon(1e-6));
}

TEST_CASE("feature vector layout and determinism") {
    const Tone tone = render_tone(ParamVector{}, 36, 4.0, 32000.0, 23);
    const AnalysisConfig cfg;
    const FeatureVector fv = extract_features(tone, cfg);
    CHECK(fv.values.size() == fv.layout.total());
    CHECK(fv.layout.total() == 128 + 12 + 1 + 20);
    CHECK(fv.harmonics()[0] == 0.0);

    const Tone again = render_tone(ParamVector{}, 36, 4.0, 32000.0, 23);
    const FeatureVector fv2 = extract_features(again, cfg);
    CHECK(fv.values == fv2.values);
}

TEST_CASE("too-short tones are rejected") {
    const Tone tone = make_tone(std::vector<double>(8000, 0.1), 36);  // 0.25 s
    CHECK_THROWS_AS(extract_features(tone, AnalysisConfig{}), ToneTooShort);
}

TEST_CASE("csv persistence round-trips bit-exactly") {
    const AnalysisConfig cfg = AnalysisConfig::defaults_for(32000.0, 1.0);
    std::vector<FeatureVector> rows;
    for (int i = 0; i < 3; ++i) {
        const Tone tone = render_tone(ParamVector{}, 30 + i, 1.0, 32000.0, i);
        rows.push_back(extract_features(tone, cfg));
    }
    const auto back = features_from_csv(features_to_csv(rows));
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].layout == rows[i].layout);
        CHECK(back[i].values == rows[i].values);
    }
    CHECK_THROWS_AS(features_from_csv("a,b,c\n1,2,3\n"), FormatError);
}

TEST_CASE("binary persistence round-trips bit-exactly") {
    const AnalysisConfig cfg = AnalysisConfig::defaults_for(32000.0, 1.0);
    std::vector<FeatureVector> rows;
    for (int i = 0; i < 3; ++i) {
        const Tone tone = render_tone(ParamVector{}, 30 + i, 1.0, 32000.0, 100 + i);
        rows.push_back(extract_features(tone, cfg));
    }
    const std::string blob = features_to_binary(rows);
    const auto back = features_from_binary(blob);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(back[i].values == rows[i].values);
    CHECK_THROWS_AS(features_from_binary(blob.substr(0, blob.size() / 2)), FormatError);
    CHECK_THROWS_AS(features_from_binary("junk"), FormatError);
}

TEST_SUITE_END();
