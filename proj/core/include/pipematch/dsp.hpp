#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace pipematch::dsp {

bool is_pow2(std::size_t n);
std::size_t next_pow2(std::size_t n);

/// In-place radix-2 FFT. Size must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse = false);

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

/// Periodic 4-term Blackman-Harris window of length n. Main lobe spans
/// +-4 bins, sidelobes below -92 dB.
std::vector<double> blackman_harris_window(std::size_t n);

/// Welch-style mean power spectrum of x[start, end): Blackman-Harris
/// windowed, hop-spaced frames of fft_size. Calibrated so a full-scale sine
/// has peak bin power ~1 (0 dB). Returns fft_size/2 + 1 bins. Needs at least
/// one full frame.
std::vector<double> mean_power_spectrum(std::span<const double> x,
                                        std::size_t start, std::size_t end,
                                        std::size_t fft_size, std::size_t hop);

/// Quadratic-interpolated peak position around bin k of a power spectrum.
/// Returns the refined fractional bin index.
double parabolic_peak(std::span<const double> power, std::size_t k);

/// Magnitude envelope |analytic(x)| computed from one full-length FFT with
/// negative frequencies zeroed. x is zero-padded to a power of two; the last
/// `end_taper` samples are faded to keep the circular wrap-around from
/// ringing back into the onset.
std::vector<double> analytic_envelope(std::span<const double> x, std::size_t end_taper);

/// Same, but the analytic spectrum is restricted to [f_center-half_width,
/// f_center+half_width] first (zero-phase bandpass + Hilbert in one pass).
std::vector<double> band_envelope(std::span<const double> x, double sample_rate,
                                  double f_center_hz, double half_width_hz,
                                  std::size_t end_taper);

/// Triangular mel filterbank (HTK mel scale) over a power spectrum of
/// n_bins = fft_size/2+1 covering 0..nyquist. Returns n_bands filters, each a
/// (first_bin, weights) pair.
struct MelFilter {
    std::size_t first_bin = 0;
    std::vector<double> weights;
};
std::vector<MelFilter> mel_filterbank(std::size_t n_bands, std::size_t n_bins,
                                      double nyquist_hz);

/// Windowed-sinc resampler (Hann-windowed, 32 taps per side).
std::vector<double> resample_sinc(std::span<const double> x, double rate_in,
                                  double rate_out);

// --- small per-sample filter sections used by the synthesizer ---

/// One-pole lowpass, unity gain at DC.
struct OnePoleLP {
    double a = 0.0;  // pole coefficient
    double z = 0.0;
    void set_cutoff(double cutoff_hz, double sample_rate);
    double process(double x) {
        z = (1.0 - a) * x + a * z;
        return z;
    }
};

/// One-pole highpass (complement of the matching lowpass).
struct OnePoleHP {
    OnePoleLP lp;
    void set_cutoff(double cutoff_hz, double sample_rate) { lp.set_cutoff(cutoff_hz, sample_rate); }
    double process(double x) { return x - lp.process(x); }
};

/// First-order allpass H(z) = (c + z^-1) / (1 + c z^-1).
struct Allpass1 {
    double c = 0.0;
    double z = 0.0;  // state: previous x - c*y
    double process(double x) {
        const double y = c * x + z;
        z = x - c * y;
        return y;
    }
};

/// RBJ constant-skirt bandpass biquad.
struct BiquadBP {
    double b0 = 0, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
    double z1 = 0, z2 = 0;
    void set(double center_hz, double q, double sample_rate);
    double process(double x) {
        const double y = b0 * x + z1;
        z1 = b1 * x - a1 * y + z2;
        z2 = b2 * x - a2 * y;
        return y;
    }
};

/// Phase delay in samples of the unity-DC-gain one-pole lowpass at f_hz.
double one_pole_lp_phase_delay(double pole, double f_hz, double sample_rate);

/// Phase delay in samples of a first-order allpass with coefficient c at f_hz.
double allpass1_phase_delay(double c, double f_hz, double sample_rate);

}  // namespace pipematch::dsp
