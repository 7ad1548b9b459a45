#include "pipematch/tone.hpp"

#include <cmath>
#include <string>

#include "pipematch/errors.hpp"

namespace pipematch {

double note_to_f0(int note) {
    if (note < kMinNote || note > kMaxNote)
        throw OutOfRangeParam("note", static_cast<double>(note), kMinNote, kMaxNote);
    return kBaseFrequencyHz * std::pow(2.0, note / 12.0);
}

}  // namespace pipematch
