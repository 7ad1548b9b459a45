#pragma once

#include <cstdint>
#include <vector>

#include "pipematch/params.hpp"
#include "pipematch/tone.hpp"

namespace pipematch {

// A tone must carry at least this many harmonics below Nyquist.
constexpr int kMinHarmonics = 10;

constexpr double kDefaultSampleRate = 32000.0;
constexpr double kDatasetToneSeconds = 4.0;   // full-length corpus tones
constexpr double kSearchToneSeconds = 1.0;    // shorter tones for optimizer inner loops

// Renders one flue-pipe tone. Three blocks in series: harmonic generator
// (two enveloped partials with clipping, a feedforward comb and a normalized
// tanh stage, bandpass dry/wet mix), noise generator (granulated pink noise
// through a 4-line feedback delay network), and a passive resonator (lossy
// dispersive waveguide loop plus DC blocker), soft-limited at the output.
// Pure function of its arguments; the same seed gives bit-identical samples.
Tone render_tone(const ParamVector& params, int note, double duration_s, double sample_rate,
                 std::uint64_t seed);

// Renders each parameter set independently at the same note/seed. Errors are
// rethrown with the offending list index attached.
std::vector<Tone> render_batch(const std::vector<ParamVector>& params_list, int note,
                               double duration_s, double sample_rate, std::uint64_t seed);

}  // namespace pipematch
