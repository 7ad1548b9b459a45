#include <cmath>
#include <complex>
#include <vector>

#include <doctest.h>

#include <pipematch/errors.hpp>
#include <pipematch/pipe_model.hpp>
#include <pipematch/rng.hpp>

using namespace pipematch;

namespace {

// Goertzel-style single-bin power at frequency f over x[start, end), Hann
// windowed; independent of the dsp module.
double tone_power_at(const std::vector<double>& x, double fs, double f, std::size_t start,
                     std::size_t end) {
    const std::size_t n = end - start;
    std::complex<double> acc(0.0, 0.0);
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(i) / double(n));
        wsum += w;
        acc += w * x[start + i] * std::polar(1.0, -2.0 * M_PI * f * double(i) / fs);
    }
    const double mag = 2.0 * std::abs(acc) / wsum;
    return mag * mag;
}

double db(double power) { return 10.0 * std::log10(power + 1e-300); }

}  // namespace

TEST_SUITE_BEGIN("pipe_model");

TEST_CASE("note frequencies") {
    CHECK(note_to_f0(0) == doctest::Approx(43.65));
    CHECK(note_to_f0(12) == doctest::Approx(87.3));
    CHECK(note_to_f0(73) == doctest::Approx(43.65 * std::pow(2.0, 73.0 / 12.0)));
    CHECK_THROWS_AS(note_to_f0(-1), OutOfRangeParam);
    CHECK_THROWS_AS(note_to_f0(74), OutOfRangeParam);
}

TEST_CASE("silent source stays exactly silent") {
    ParamVector p;
    p.h1_gain = 0.0;
    p.h2_gain = 0.0;
    p.noise_gain = 0.0;
    const Tone tone = render_tone(p, 36, 0.5, 32000.0, 7);
    for (double v : tone.samples) CHECK(v == 0.0);
}

TEST_CASE("length and metadata contract") {
    const Tone tone = render_tone(ParamVector{}, 40, 1.25, 32000.0, 1);
    CHECK(tone.samples.size() == std::size_t(std::llround(1.25 * 32000.0)));
    CHECK(tone.sample_rate == 32000.0);
    CHECK(tone.note == 40);
    CHECK(tone.f0() == doctest::Approx(note_to_f0(40)));
    CHECK(tone.duration_s() == doctest::Approx(1.25));
}

TEST_CASE("rendering is deterministic in the seed") {
    const Tone a = render_tone(ParamVector{}, 36, 1.0, 32000.0, 99);
    const Tone b = render_tone(ParamVector{}, 36, 1.0, 32000.0, 99);
    CHECK(a.samples == b.samples);
    const Tone c = render_tone(ParamVector{}, 36, 1.0, 32000.0, 100);
    CHECK(a.samples != c.samples);
}

TEST_CASE("pitch precondition: ten harmonics must fit below Nyquist") {
    CHECK_THROWS_AS(render_tone(ParamVector{}, 63, 0.5, 32000.0, 1), UnrepresentablePitch);
    CHECK_NOTHROW(render_tone(ParamVector{}, 62, 0.5, 32000.0, 1));
    // Halving the rate halves the highest representable note's frequency.
    CHECK_THROWS_AS(render_tone(ParamVector{}, 51, 0.5, 16000.0, 1), UnrepresentablePitch);
}

TEST_CASE("invalid parameters are rejected with the field name") {
    ParamVector p;
    p.dwg_feedback = 1.5;
    CHECK_THROWS_AS(render_tone(p, 36, 0.5, 32000.0, 1), OutOfRangeParam);
    CHECK_THROWS_AS(render_tone(ParamVector{}, 36, 0.0, 32000.0, 1), OutOfRangeParam);
}

TEST_CASE("pure first harmonic leaves the octave empty") {
    ParamVector p;
    p.h2_gain = 0.0;
    p.noise_gain = 0.0;
    p.clip_threshold_h1 = 1.0;  // clip never engages below the rail
    p.sigmoid_drive = 0.1;      // nearly linear
    p.bandpass_wet = 0.0;
    const Tone tone = render_tone(p, 36, 2.0, 32000.0, 5);
    const double f0 = tone.f0();
    const std::size_t a = 32000, b = 60000;
    const double p1 = tone_power_at(tone.samples, 32000.0, f0, a, b);
    const double p2 = tone_power_at(tone.samples, 32000.0, 2.0 * f0, a, b);
    CHECK(db(p1) - db(p2) > 30.0);
}

TEST_CASE("rendered partials sit on the harmonic series") {
    const Tone tone = render_tone(ParamVector{}, 36, 2.0, 32000.0, 3);
    const double fs = 32000.0, f0 = tone.f0();
    for (int l = 1; l <= 5; ++l) {
        // Scan +-2% around l*f0 for the strongest response; it must be
        // within 1% of the exact harmonic.
        double best_f = 0.0, best_p = -1.0;
        for (double f = l * f0 * 0.98; f <= l * f0 * 1.02; f += l * f0 * 0.0005) {
            const double pw = tone_power_at(tone.samples, fs, f, 32000, 60000);
            if (pw > best_p) {
                best_p = pw;
                best_f = f;
            }
        }
        CHECK(std::abs(best_f - l * f0) < 0.01 * l * f0);
    }
}

TEST_CASE("fundamental tracks the label across notes") {
    for (int note : {12, 24, 36, 48}) {
        const Tone tone = render_tone(ParamVector{}, note, 1.0, 32000.0, 2);
        const double f0 = note_to_f0(note);
        double best_f = 0.0, best_p = -1.0;
        for (double f = f0 * 0.97; f <= f0 * 1.03; f += f0 * 0.0005) {
            const double pw = tone_power_at(tone.samples, 32000.0, f, 16000, 32000);
            if (pw > best_p) {
                best_p = pw;
                best_f = f;
            }
        }
        CHECK(std::abs(best_f - f0) < 0.005 * f0);
    }
}

TEST_CASE("output is bounded and finite for random valid parameters") {
    Rng rng(71);
    const auto& fields = param_fields();
    for (int trial = 0; trial < 10; ++trial) {
        ParamVector p;
        for (std::size_t i = 0; i < fields.size(); ++i)
            p[i] = rng.uniform(fields[i].lo, fields[i].hi);
        const Tone tone = render_tone(p, 30, 0.5, 32000.0, trial);
        for (double v : tone.samples) {
            CHECK(std::isfinite(v));
            CHECK(std::abs(v) <= 1.0);
        }
    }
}

TEST_CASE("noise path is seed-dependent, harmonic path is not") {
    ParamVector p;
    p.noise_gain = 0.0;
    const Tone a = render_tone(p, 36, 0.5, 32000.0, 1);
    const Tone b = render_tone(p, 36, 0.5, 32000.0, 2);
    // Turbulence is part of the harmonic source, so silence the modulation too.
    CHECK(a.samples != b.samples);
    p.turbulence_depth_cents = 0.0;
    const Tone c = render_tone(p, 36, 0.5, 32000.0, 1);
    const Tone d = render_tone(p, 36, 0.5, 32000.0, 2);
    CHECK(c.samples == d.samples);
}

TEST_CASE("render_batch wraps failures with the item index") {
    std::vector<ParamVector> items(3);
    items[2].h1_gain = 99.0;
    try {
        render_batch(items, 36, 0.25, 32000.0, 1);
        FAIL("expected BatchRenderError");
    } catch (const BatchRenderError& e) {
        CHECK(e.index() == 2);
    }
    CHECK_THROWS_AS(render_batch({}, 36, 0.25, 32000.0, 1), EmptyDataset);
    const auto tones = render_batch({ParamVector{}}, 36, 0.25, 32000.0, 1);
    CHECK(tones.size() == 1);
    CHECK(tones[0].samples == render_tone(ParamVector{}, 36, 0.25, 32000.0, 1).samples);
}

TEST_SUITE_END();
