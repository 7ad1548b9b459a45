#include "pipematch/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pipematch/errors.hpp"

namespace pipematch::dsp {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    if (!is_pow2(n)) throw Error("fft size must be a power of two");

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    // full twiddle table, one polar() per entry for precision
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<std::complex<double>> tw(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k)
        tw[k] = std::polar(1.0, sign * 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n));

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * tw[k * stride];
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
    if (inverse) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (auto& c : a) c *= inv_n;
    }
}

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

std::vector<double> blackman_harris_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n);
        w[i] = 0.35875 - 0.48829 * std::cos(t) + 0.14128 * std::cos(2.0 * t) -
               0.01168 * std::cos(3.0 * t);
    }
    return w;
}

std::vector<double> mean_power_spectrum(std::span<const double> x,
                                        std::size_t start, std::size_t end,
                                        std::size_t fft_size, std::size_t hop) {
    end = std::min(end, x.size());
    if (start >= end || end - start < fft_size)
        throw ToneTooShort("window [" + std::to_string(start) + ", " + std::to_string(end) +
                           ") shorter than fft size " + std::to_string(fft_size));

    const auto win = blackman_harris_window(fft_size);
    double wsum = 0.0;
    for (double w : win) wsum += w;
    const double scale = 2.0 / wsum;  // sine of amplitude A -> peak bin magnitude A

    std::vector<double> power(fft_size / 2 + 1, 0.0);
    std::vector<std::complex<double>> buf(fft_size);
    std::size_t frames = 0;
    for (std::size_t pos = start; pos + fft_size <= end; pos += hop) {
        for (std::size_t i = 0; i < fft_size; ++i)
            buf[i] = std::complex<double>(x[pos + i] * win[i], 0.0);
        fft(buf);
        for (std::size_t k = 0; k <= fft_size / 2; ++k) {
            const double m = std::abs(buf[k]) * scale;
            power[k] += m * m;
        }
        ++frames;
    }
    const double inv = 1.0 / static_cast<double>(frames);
    for (double& p : power) p *= inv;
    return power;
}

double parabolic_peak(std::span<const double> power, std::size_t k) {
    if (k == 0 || k + 1 >= power.size()) return static_cast<double>(k);
    // interpolate on log power; guard against zeros
    const double eps = 1e-300;
    const double a = std::log(power[k - 1] + eps);
    const double b = std::log(power[k] + eps);
    const double c = std::log(power[k + 1] + eps);
    const double denom = a - 2.0 * b + c;
    if (denom == 0.0) return static_cast<double>(k);
    double delta = 0.5 * (a - c) / denom;
    delta = std::clamp(delta, -0.5, 0.5);
    return static_cast<double>(k) + delta;
}

namespace {

// Analytic signal of x (padded to pow2), with an optional spectral mask
// applied to the positive frequencies. Returns |analytic| truncated to
// x.size().
std::vector<double> analytic_magnitude(std::span<const double> x, std::size_t end_taper,
                                       bool banded, double bin_lo, double bin_hi) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    const std::size_t nfft = next_pow2(n);
    std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) buf[i] = std::complex<double>(x[i], 0.0);

    end_taper = std::min(end_taper, n);
    for (std::size_t i = 0; i < end_taper; ++i) {
        const double t = static_cast<double>(i + 1) / static_cast<double>(end_taper + 1);
        buf[n - 1 - i] *= 0.5 - 0.5 * std::cos(M_PI * t);  // fade to zero at the end
    }

    fft(buf);
    for (std::size_t k = 0; k <= nfft / 2; ++k) {
        const bool in_band = !banded || (static_cast<double>(k) >= bin_lo &&
                                         static_cast<double>(k) <= bin_hi);
        if (!in_band) {
            buf[k] = 0.0;
        } else if (k != 0 && k != nfft / 2) {
            buf[k] *= 2.0;  // fold negative-frequency energy onto positives
        }
    }
    for (std::size_t k = nfft / 2 + 1; k < nfft; ++k) buf[k] = 0.0;
    fft(buf, true);

    std::vector<double> env(n);
    for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(buf[i]);
    return env;
}

}  // namespace

std::vector<double> analytic_envelope(std::span<const double> x, std::size_t end_taper) {
    return analytic_magnitude(x, end_taper, false, 0.0, 0.0);
}

std::vector<double> band_envelope(std::span<const double> x, double sample_rate,
                                  double f_center_hz, double half_width_hz,
                                  std::size_t end_taper) {
    const std::size_t nfft = next_pow2(x.size());
    const double hz_per_bin = sample_rate / static_cast<double>(nfft);
    const double lo = (f_center_hz - half_width_hz) / hz_per_bin;
    const double hi = (f_center_hz + half_width_hz) / hz_per_bin;
    return analytic_magnitude(x, end_taper, true, lo, hi);
}

std::vector<MelFilter> mel_filterbank(std::size_t n_bands, std::size_t n_bins,
                                      double nyquist_hz) {
    auto to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
    auto from_mel = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };

    const double mel_max = to_mel(nyquist_hz);
    std::vector<double> edges(n_bands + 2);
    const double hz_per_bin = nyquist_hz / static_cast<double>(n_bins - 1);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = from_mel(mel_max * static_cast<double>(i) / static_cast<double>(n_bands + 1)) / hz_per_bin;

    std::vector<MelFilter> filters(n_bands);
    for (std::size_t b = 0; b < n_bands; ++b) {
        const double left = edges[b], center = edges[b + 1], right = edges[b + 2];
        MelFilter f;
        f.first_bin = static_cast<std::size_t>(std::ceil(left));
        for (std::size_t k = f.first_bin; k < n_bins && static_cast<double>(k) < right; ++k) {
            const double kk = static_cast<double>(k);
            double w;
            if (kk <= center)
                w = (center > left) ? (kk - left) / (center - left) : 1.0;
            else
                w = (right > center) ? (right - kk) / (right - center) : 1.0;
            f.weights.push_back(std::max(0.0, w));
        }
        filters[b] = std::move(f);
    }
    return filters;
}

std::vector<double> resample_sinc(std::span<const double> x, double rate_in, double rate_out) {
    if (rate_in == rate_out) return {x.begin(), x.end()};
    const int taps = 32;
    const double ratio = rate_in / rate_out;
    const double cutoff = 0.95 * std::min(1.0, 1.0 / ratio);  // fraction of input nyquist
    const std::size_t n_out =
        static_cast<std::size_t>(std::round(static_cast<double>(x.size()) / ratio));

    std::vector<double> out(n_out, 0.0);
    for (std::size_t n = 0; n < n_out; ++n) {
        const double t = static_cast<double>(n) * ratio;  // position in input samples
        const auto center = static_cast<long>(std::floor(t));
        double acc = 0.0;
        for (long k = center - taps + 1; k <= center + taps; ++k) {
            if (k < 0 || k >= static_cast<long>(x.size())) continue;
            const double d = t - static_cast<double>(k);
            double s;
            if (std::abs(d) < 1e-12) {
                s = cutoff;
            } else {
                s = std::sin(M_PI * cutoff * d) / (M_PI * d);
            }
            const double wpos = d / static_cast<double>(taps);  // in (-1, 1)
            const double w = 0.5 + 0.5 * std::cos(M_PI * wpos);
            acc += x[static_cast<std::size_t>(k)] * s * w;
        }
        out[n] = acc;
    }
    return out;
}

void OnePoleLP::set_cutoff(double cutoff_hz, double sample_rate) {
    // pole from the impulse-invariant map; clamp for extreme cutoffs
    const double c = std::clamp(cutoff_hz / sample_rate, 1e-6, 0.499);
    a = std::exp(-2.0 * M_PI * c);
}

void BiquadBP::set(double center_hz, double q, double sample_rate) {
    const double w0 = 2.0 * M_PI * center_hz / sample_rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0 = alpha / a0;
    b1 = 0.0;
    b2 = -alpha / a0;
    a1 = -2.0 * std::cos(w0) / a0;
    a2 = (1.0 - alpha) / a0;
}

namespace {
double phase_delay_of(const std::complex<double>& h, double f_hz, double sample_rate) {
    const double w = 2.0 * M_PI * f_hz / sample_rate;
    double phase = std::arg(h);
    // unwrap into a causal (negative phase) branch
    while (phase > 0.0) phase -= 2.0 * M_PI;
    return -phase / w;
}
}  // namespace

double one_pole_lp_phase_delay(double pole, double f_hz, double sample_rate) {
    const double w = 2.0 * M_PI * f_hz / sample_rate;
    const std::complex<double> z_inv = std::polar(1.0, -w);
    const std::complex<double> h = (1.0 - pole) / (1.0 - pole * z_inv);
    return phase_delay_of(h, f_hz, sample_rate);
}

double allpass1_phase_delay(double c, double f_hz, double sample_rate) {
    const double w = 2.0 * M_PI * f_hz / sample_rate;
    const std::complex<double> z_inv = std::polar(1.0, -w);
    const std::complex<double> h = (c + z_inv) / (1.0 + c * z_inv);
    return phase_delay_of(h, f_hz, sample_rate);
}

}  // namespace pipematch::dsp
