#include "pipematch/pipe_model.hpp"

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>

#include "pipematch/dsp.hpp"
#include "pipematch/errors.hpp"
#include "pipematch/rng.hpp"

namespace pipematch {

using namespace dsp;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

// rng substreams, fixed so the two noise consumers never interleave
constexpr std::uint64_t kStreamPink = 0;
constexpr std::uint64_t kStreamTurbulence = 1;

// Attack/decay-to-sustain envelope with an overshoot peak at the end of the
// linear attack ramp.
struct Envelope {
    double attack_s, decay_s, sustain, peak;
    Envelope(double attack, double decay, double sustain_level, double overshoot)
        : attack_s(attack), decay_s(decay), sustain(sustain_level),
          peak(sustain_level * overshoot) {}
    double at(double t) const {
        if (t < attack_s) return peak * (t / attack_s);
        return sustain + (peak - sustain) * std::exp(-(t - attack_s) / decay_s);
    }
};

// Voss-McCartney pink noise: one always-new gaussian plus kRows held rows,
// row k redrawn every 2^k samples. Scaled to roughly unit variance.
class PinkNoise {
public:
    explicit PinkNoise(Rng rng) : rng_(rng) {
        for (auto& r : rows_) r = rng_.gaussian();
        white_ = rng_.gaussian();
    }
    double next() {
        ++counter_;
        std::size_t row = std::countr_zero(counter_);
        if (row < kRows) rows_[row] = rng_.gaussian();
        white_ = rng_.gaussian();
        double sum = white_;
        for (double r : rows_) sum += r;
        return sum * kScale;
    }

private:
    static constexpr std::size_t kRows = 16;
    static constexpr double kScale = 0.24253562503633297;  // 1/sqrt(kRows+1)
    Rng rng_;
    double rows_[kRows] = {};
    double white_ = 0.0;
    std::uint64_t counter_ = 0;
};

double magnitude_one_pole_hp(double pole, double f_hz, double sample_rate) {
    const double w = kTwoPi * f_hz / sample_rate;
    const std::complex<double> z_inv = std::polar(1.0, -w);
    const std::complex<double> lp = (1.0 - pole) / (1.0 - pole * z_inv);
    return std::abs(1.0 - lp);
}

// Finds the first-order allpass coefficient whose phase delay at f_hz equals
// delay_samples. Phase delay is monotone decreasing in the coefficient.
double solve_allpass_coeff(double delay_samples, double f_hz, double sample_rate) {
    double lo = -0.995, hi = 0.9995;
    for (int i = 0; i < 70; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (allpass1_phase_delay(mid, f_hz, sample_rate) > delay_samples) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

struct DelayLine {
    std::vector<double> buf;
    std::size_t pos = 0;
    explicit DelayLine(std::size_t n) : buf(n, 0.0) {}
    double front() const { return buf[pos]; }
    void push(double x) {
        buf[pos] = x;
        if (++pos == buf.size()) pos = 0;
    }
    double step(double x) {
        const double out = front();
        push(x);
        return out;
    }
};

}  // namespace

Tone render_tone(const ParamVector& params, int note, double duration_s, double sample_rate,
                 std::uint64_t seed) {
    params.validate();
    const double f0 = note_to_f0(note);
    if (!(duration_s > 0.0))
        throw OutOfRangeParam("duration_s", duration_s, 0.0, std::numeric_limits<double>::infinity());
    if (sample_rate < 2.0 * kMinHarmonics * f0)
        throw UnrepresentablePitch("f0 " + std::to_string(f0) + " Hz needs sample rate >= " +
                                   std::to_string(2.0 * kMinHarmonics * f0) + " Hz for " +
                                   std::to_string(kMinHarmonics) + " harmonics");

    const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
    const double dt = 1.0 / sample_rate;
    Rng rng(seed);

    // --- harmonic generator state ---
    const Envelope env1(params.h1_attack_time_s, params.h1_decay_time_s, params.h1_sustain_level,
                        params.h1_overshoot);
    const Envelope env2(params.h2_attack_time_s, params.h2_decay_time_s, params.h2_sustain_level,
                        params.h2_overshoot);
    const double thr1 = params.clip_threshold_h1;
    const double thr2 = params.clip_threshold_h2;
    const auto comb_delay = static_cast<std::size_t>(std::llround(params.comb_delay_samples));
    DelayLine comb(comb_delay);
    const double tanh_norm = 1.0 / std::tanh(params.sigmoid_drive);
    BiquadBP bandpass;
    bandpass.set(f0, params.bandpass_q, sample_rate);
    const double wet = params.bandpass_wet;

    // --- turbulence: decaying random pitch deviation in cents ---
    Rng turb_rng = rng.substream(kStreamTurbulence);
    OnePoleLP turb_lp;
    turb_lp.set_cutoff(20.0, sample_rate);
    // restores unit variance after the lowpass
    const double turb_gain = std::sqrt((1.0 + turb_lp.a) / (1.0 - turb_lp.a));
    const bool use_turbulence = params.turbulence_depth_cents > 0.0;

    // --- noise generator state ---
    const bool use_noise = params.noise_gain > 0.0;
    PinkNoise pink(rng.substream(kStreamPink));
    OnePoleLP noise_color;
    noise_color.set_cutoff(params.noise_lp_cutoff_hz, sample_rate);
    OnePoleHP rate_hp;
    rate_hp.set_cutoff(0.5 * f0, sample_rate);
    const double rate_norm = 1.0 / std::max(magnitude_one_pole_hp(rate_hp.lp.a, f0, sample_rate), 1e-9);
    const double gran_depth = params.granulation_depth;
    // four mutually prime delay lengths; Householder feedback keeps the
    // network lossless before the feedback gain is applied
    const double fdn_g = params.fdn_feedback;
    DelayLine fdn[4] = {
        DelayLine(std::max<std::size_t>(1, std::llround(0.0047 * sample_rate))),
        DelayLine(std::max<std::size_t>(1, std::llround(0.0066 * sample_rate))),
        DelayLine(std::max<std::size_t>(1, std::llround(0.0083 * sample_rate))),
        DelayLine(std::max<std::size_t>(1, std::llround(0.0099 * sample_rate)))};

    // --- resonator: single waveguide loop tuned to f0 ---
    OnePoleLP loop_loss;
    loop_loss.set_cutoff(params.dwg_loss_cutoff_hz, sample_rate);
    Allpass1 dispersion;
    dispersion.c = params.dispersion_coeff;
    Allpass1 tuning;
    std::size_t loop_len = 1;
    {
        const double total = sample_rate / f0;
        const double filters = one_pole_lp_phase_delay(loop_loss.a, f0, sample_rate) +
                               allpass1_phase_delay(dispersion.c, f0, sample_rate);
        const double remaining = total - filters;
        auto whole = static_cast<long long>(std::floor(remaining - 0.3));
        if (whole < 1) whole = 1;
        double frac = remaining - static_cast<double>(whole);
        frac = std::min(std::max(frac, 0.05), 1.95);
        tuning.c = solve_allpass_coeff(frac, f0, sample_rate);
        loop_len = static_cast<std::size_t>(whole);
    }
    DelayLine loop_delay(loop_len);
    const double dwg_g = params.dwg_feedback;
    const double dwg_in_gain = 1.0 - dwg_g;

    // DC blocker: zero at 1, pole at dc_block_pole
    const double dc_pole = params.dc_block_pole;
    double dc_x1 = 0.0, dc_y1 = 0.0;

    Tone tone;
    tone.samples.resize(n);
    tone.sample_rate = sample_rate;
    tone.note = note;

    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = i * dt;

        double cents = 0.0;
        if (use_turbulence) {
            const double lfo = turb_lp.process(turb_rng.gaussian()) * turb_gain;
            cents = params.turbulence_depth_cents * std::exp(-t / params.turbulence_time_s) *
                    std::min(std::max(lfo, -3.0), 3.0);
        }

        const double s1 = std::sin(phase);
        const double s2 = 2.0 * s1 * s1 - 1.0;  // second harmonic from the squared fundamental
        const double inst_f = f0 * std::exp2(cents / 1200.0);
        phase += kTwoPi * inst_f * dt;
        if (phase > kTwoPi) phase -= kTwoPi;

        double h1 = params.h1_gain * env1.at(t) * s1;
        double h2 = params.h2_gain * env2.at(t) * s2;
        h1 = std::min(std::max(h1, -thr1), thr1) / thr1;
        h2 = std::min(std::max(h2, -thr2), thr2) / thr2;
        double harm = h1 + h2;
        harm += params.comb_gain * comb.step(harm);
        harm = std::tanh(params.sigmoid_drive * harm) * tanh_norm;
        harm = (1.0 - wet) * harm + wet * bandpass.process(harm);

        double noise = 0.0;
        if (use_noise) {
            noise = 0.5 * noise_color.process(pink.next());
            const double rate = std::min(std::abs(rate_hp.process(s1)) * rate_norm, 1.0);
            const double gate = (1.0 - gran_depth) + gran_depth * rate;
            noise = std::min(std::max(noise, -gate), gate);
            const double o0 = fdn[0].front(), o1 = fdn[1].front(), o2 = fdn[2].front(),
                         o3 = fdn[3].front();
            // Householder reflection: subtract half the sum from each line
            const double half_sum = 0.5 * (o0 + o1 + o2 + o3);
            fdn[0].push(0.5 * noise + fdn_g * (o0 - half_sum));
            fdn[1].push(0.5 * noise + fdn_g * (o1 - half_sum));
            fdn[2].push(0.5 * noise + fdn_g * (o2 - half_sum));
            fdn[3].push(0.5 * noise + fdn_g * (o3 - half_sum));
            noise = params.noise_gain * half_sum;
        }

        const double excitation = harm + noise;

        double fb = loop_loss.process(loop_delay.front());
        fb = dispersion.process(fb);
        fb = tuning.process(fb);
        const double resonated = dwg_in_gain * excitation + dwg_g * fb;
        loop_delay.push(resonated);

        const double dc_out = resonated - dc_x1 + dc_pole * dc_y1;
        dc_x1 = resonated;
        dc_y1 = dc_out;

        tone.samples[i] = std::tanh(dc_out);
    }
    return tone;
}

std::vector<Tone> render_batch(const std::vector<ParamVector>& params_list, int note,
                               double duration_s, double sample_rate, std::uint64_t seed) {
    if (params_list.empty()) throw EmptyDataset("render_batch: empty parameter list");
    std::vector<Tone> tones;
    tones.reserve(params_list.size());
    for (std::size_t i = 0; i < params_list.size(); ++i) {
        try {
            tones.push_back(render_tone(params_list[i], note, duration_s, sample_rate, seed));
        } catch (const Error& e) {
            throw BatchRenderError(i, e.what());
        }
    }
    return tones;
}

}  // namespace pipematch
