#pragma once

#include <string>
#include <vector>

namespace pipematch {

struct WavData {
    std::vector<double> samples;  // mono; multichannel input keeps channel 0
    double sample_rate = 0.0;
};

// Reads PCM 16/24/32-bit integer and 32/64-bit float WAV files, including
// WAVE_FORMAT_EXTENSIBLE. Multichannel files keep only the first channel.
WavData read_wav(const std::string& path);

// Writes mono 32-bit float PCM via a temp file + rename.
void write_wav(const std::string& path, const std::vector<double>& samples, double sample_rate);

}  // namespace pipematch
