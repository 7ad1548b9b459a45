#pragma once

#include <cstdint>
#include <vector>

namespace pipematch {

// Note index 0 is F1 (43.65 Hz); each step is one semitone.
constexpr int kMinNote = 0;
constexpr int kMaxNote = 73;
constexpr double kBaseFrequencyHz = 43.65;

double note_to_f0(int note);

// A rendered or ingested mono tone. samples are in [-1, 1] by construction
// for rendered tones; ingested audio is peak-normalized on load.
struct Tone {
    std::vector<double> samples;
    double sample_rate = 0.0;
    int note = 0;

    double duration_s() const {
        return sample_rate > 0.0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
    double f0() const { return note_to_f0(note); }
};

}  // namespace pipematch
