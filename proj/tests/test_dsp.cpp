#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include <doctest.h>

#include <pipematch/dsp.hpp>
#include <pipematch/rng.hpp>

using namespace pipematch;

namespace {

// Direct O(n^2) DFT, the reference for the fast transform.
std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x,
                                            bool inverse) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t t = 0; t < n; ++t)
            acc += x[t] * std::polar(1.0, sign * 2.0 * M_PI * double(k * t) / double(n));
        out[k] = inverse ? acc / double(n) : acc;
    }
    return out;
}

std::vector<double> sine(double freq, double amp, double fs, std::size_t n, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = amp * std::sin(2.0 * M_PI * freq * double(i) / fs + phase);
    return x;
}

}  // namespace

TEST_SUITE_BEGIN("dsp");

TEST_CASE("pow2 helpers") {
    CHECK(dsp::is_pow2(1));
    CHECK(dsp::is_pow2(1024));
    CHECK(!dsp::is_pow2(0));
    CHECK(!dsp::is_pow2(12));
    CHECK(dsp::next_pow2(1) == 1);
    CHECK(dsp::next_pow2(5) == 8);
    CHECK(dsp::next_pow2(4096) == 4096);
    CHECK(dsp::next_pow2(4097) == 8192);
}

TEST_CASE("fft matches the direct transform") {
    Rng rng(31);
    std::vector<std::complex<double>> x(256);
    for (auto& v : x) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    const auto expect = naive_dft(x, false);
    auto got = x;
    dsp::fft(got);
    for (std::size_t k = 0; k < x.size(); ++k)
        CHECK(std::abs(got[k] - expect[k]) < 1e-9 * (1.0 + std::abs(expect[k])));
}

TEST_CASE("inverse fft undoes the forward pass") {
    Rng rng(32);
    std::vector<std::complex<double>> x(512);
    for (auto& v : x) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    auto y = x;
    dsp::fft(y);
    dsp::fft(y, true);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - x[i]) < 1e-12);
}

TEST_CASE("mean power spectrum is calibrated to sine amplitude squared") {
    const double fs = 32000.0;
    const std::size_t fft = 4096;
    // Exact bin frequency so there is no scalloping loss.
    const double f = 32.0 * fs / double(fft);
    for (double amp : {1.0, 0.5, 0.25}) {
        const auto x = sine(f, amp, fs, 32000);
        const auto p = dsp::mean_power_spectrum(x, 0, x.size(), fft, 1024);
        REQUIRE(p.size() == fft / 2 + 1);
        CHECK(p[32] == doctest::Approx(amp * amp).epsilon(1e-3));
    }
}

TEST_CASE("parabolic peak recovers an off-bin frequency") {
    const double fs = 32000.0;
    const std::size_t fft = 4096;
    const double true_bin = 40.3;
    const auto x = sine(true_bin * fs / double(fft), 1.0, fs, 32000);
    const auto p = dsp::mean_power_spectrum(x, 0, x.size(), fft, 1024);
    std::size_t k = 0;
    for (std::size_t i = 1; i + 1 < p.size(); ++i)
        if (p[i] > p[k]) k = i;
    CHECK(dsp::parabolic_peak(p, k) == doctest::Approx(true_bin).epsilon(2e-3));
}

TEST_CASE("parabolic peak is exact on a quadratic") {
    // log-power parabola centered at 10.25
    std::vector<double> p(32, 0.0);
    for (std::size_t i = 8; i < 14; ++i) {
        const double d = double(i) - 10.25;
        p[i] = std::exp(-d * d);
    }
    CHECK(dsp::parabolic_peak(p, 10) == doctest::Approx(10.25).epsilon(1e-12));
}

TEST_CASE("analytic envelope recovers a slow amplitude modulation") {
    const double fs = 8000.0;
    const std::size_t n = 8000;
    std::vector<double> x(n);
    auto amp = [&](std::size_t i) { return 0.6 + 0.3 * std::sin(2.0 * M_PI * 2.0 * i / fs); };
    for (std::size_t i = 0; i < n; ++i)
        x[i] = amp(i) * std::sin(2.0 * M_PI * 400.0 * i / fs);
    const auto env = dsp::analytic_envelope(x, 256);
    REQUIRE(env.size() == n);
    for (std::size_t i = 400; i + 700 < n; ++i)
        CHECK(env[i] == doctest::Approx(amp(i)).epsilon(0.02));
}

TEST_CASE("band envelope isolates one partial") {
    const double fs = 8000.0;
    const std::size_t n = 8000;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = 0.5 * std::sin(2.0 * M_PI * 200.0 * i / fs) +
               0.25 * std::sin(2.0 * M_PI * 400.0 * i / fs);
    const auto env1 = dsp::band_envelope(x, fs, 200.0, 50.0, 256);
    const auto env2 = dsp::band_envelope(x, fs, 400.0, 50.0, 256);
    for (std::size_t i = 500; i + 800 < n; ++i) {
        CHECK(env1[i] == doctest::Approx(0.5).epsilon(0.02));
        CHECK(env2[i] == doctest::Approx(0.25).epsilon(0.02));
    }
}

TEST_CASE("mel filterbank geometry") {
    const auto bank = dsp::mel_filterbank(40, 2049, 16000.0);
    REQUIRE(bank.size() == 40);
    std::vector<double> coverage(2049, 0.0);
    for (const auto& f : bank) {
        CHECK(!f.weights.empty());
        double sum = 0.0;
        for (std::size_t i = 0; i < f.weights.size(); ++i) {
            CHECK(f.weights[i] >= 0.0);
            CHECK(f.first_bin + i < 2049);
            coverage[f.first_bin + i] += f.weights[i];
            sum += f.weights[i];
        }
        CHECK(sum > 0.0);
    }
    // Interior bins are covered by at least one filter.
    std::size_t covered = 0;
    for (std::size_t i = 10; i < 2000; ++i) covered += coverage[i] > 0.0;
    CHECK(covered > 1900);
}

TEST_CASE("sinc resampler preserves a sine and the length contract") {
    const double f = 440.0;
    const auto x = sine(f, 0.8, 44100.0, 44100);
    const auto y = dsp::resample_sinc(x, 44100.0, 32000.0);
    CHECK(y.size() == 32000);
    for (std::size_t i = 200; i + 200 < y.size(); ++i) {
        const double expect = 0.8 * std::sin(2.0 * M_PI * f * double(i) / 32000.0);
        CHECK(std::abs(y[i] - expect) < 1e-3);
    }
}

TEST_CASE("one-pole lowpass gain and phase delay formula") {
    dsp::OnePoleLP lp;
    lp.set_cutoff(1000.0, 32000.0);
    // Unity at DC: feed a constant.
    double y = 0.0;
    for (int i = 0; i < 10000; ++i) y = lp.process(1.0);
    CHECK(y == doctest::Approx(1.0).epsilon(1e-6));

    // Formula vs direct complex evaluation of H(z) = (1-a)/(1 - a z^-1).
    const double a = lp.a;
    const double f = 700.0, fs = 32000.0;
    const std::complex<double> z = std::polar(1.0, 2.0 * M_PI * f / fs);
    const std::complex<double> h = (1.0 - a) / (1.0 - a / z);
    const double expect_delay = -std::arg(h) / (2.0 * M_PI * f / fs);
    CHECK(dsp::one_pole_lp_phase_delay(a, f, fs) == doctest::Approx(expect_delay).epsilon(1e-9));
}

TEST_CASE("allpass phase delay formula matches direct evaluation") {
    const double c = 0.37, f = 500.0, fs = 32000.0;
    const std::complex<double> z = std::polar(1.0, 2.0 * M_PI * f / fs);
    const std::complex<double> h = (c + 1.0 / z) / (1.0 + c / z);
    CHECK(std::abs(std::abs(h) - 1.0) < 1e-12);  // allpass
    const double expect_delay = -std::arg(h) / (2.0 * M_PI * f / fs);
    CHECK(dsp::allpass1_phase_delay(c, f, fs) == doctest::Approx(expect_delay).epsilon(1e-9));
}

TEST_CASE("biquad bandpass peaks at its center frequency") {
    const double fs = 32000.0;
    auto response = [&](double f) {
        dsp::BiquadBP bp;
        bp.set(1000.0, 2.0, fs);
        const std::size_t n = 32000;
        double peak = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = bp.process(std::sin(2.0 * M_PI * f * i / fs));
            if (i > n / 2) peak = std::max(peak, std::abs(y));
        }
        return peak;
    };
    const double at_center = response(1000.0);
    CHECK(at_center == doctest::Approx(1.0).epsilon(0.02));  // unity peak gain
    CHECK(response(250.0) < 0.3 * at_center);
    CHECK(response(4000.0) < 0.3 * at_center);
}

TEST_SUITE_END();
