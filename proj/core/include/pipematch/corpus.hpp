#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pipematch/params.hpp"
#include "pipematch/pipe_model.hpp"
#include "pipematch/rng.hpp"
#include "pipematch/tone.hpp"

namespace pipematch {

enum class Family { Principale, Bordone, Flauto, Unknown };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

struct RenderSettings {
    double sample_rate = kDefaultSampleRate;
    double duration_s = kDatasetToneSeconds;
};

// One labelled tone. Synthesized items carry their parameters and render
// seed; ingested recordings carry neither. The audio lives either in a WAV
// file (path relative to the manifest) or inline.
struct DatasetItem {
    std::string stop;
    int note = 0;
    Family family = Family::Unknown;
    std::string footage = "8";
    bool has_params = false;
    ParamVector params;
    std::uint64_t render_seed = 0;
    std::string wav_path;
    std::vector<double> samples;  // used when wav_path is empty
};

struct DatasetManifest {
    int version = 1;
    std::uint64_t seed = 0;
    RenderSettings render;
    std::vector<DatasetItem> items;

    // Enforces unique (stop, note) pairs and parameter presence rules.
    void validate() const;
    std::vector<std::string> stops() const;  // unique, first-appearance order
};

// Per-family parameter prior. Unknown draws every field uniformly over its
// full physical range; the named families narrow a few ranges (bordone keeps
// the even-harmonic gain low, flauto favors a breathier mix).
struct PriorConfig {
    Family family = Family::Unknown;
    double note_jitter = 0.0;  // per-note displacement in normalized units, 0 disables
};

// Draws one base parameter vector: exactly one uniform variate per field, in
// field-table order, each mapped onto the (possibly family-narrowed) range.
ParamVector sample_prior(const PriorConfig& prior, Rng& rng);

struct GenerateConfig {
    std::size_t n_stops = 1;
    std::vector<int> notes = {36};
    PriorConfig prior;
    RenderSettings render;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string stop_prefix = "stop";
};

// Named size presets mirroring common registration subsets; each returns a
// GenerateConfig with n_stops set and a representative note list.
std::vector<std::string> generate_preset_names();
GenerateConfig generate_preset(const std::string& name);

// Renders every (stop, note) pair and writes one WAV per item under out_dir.
// Determinism contract: stop s draws its base parameters from
// Rng(mix_seed(seed, s)); note jitter for note m uses that generator's
// substream(1000 + m); the item render seed is mix_seed(mix_seed(seed, s), m).
// Items that fail to render are skipped and reported through skipped_log.
DatasetManifest generate_contrived(const GenerateConfig& cfg, const std::string& out_dir,
                                   std::vector<std::string>* skipped_log = nullptr);

struct IngestConfig {
    RenderSettings render;
    // Fraction of the labelled f0 the dominant spectral peak may deviate by
    // before the pitch warning fires. A semitone is ~5.9%.
    double pitch_tolerance = 0.055;
};

struct IngestResult {
    DatasetItem item;
    bool pitch_warning = false;
    double measured_f0 = 0.0;
};

// Loads a recording: first channel, windowed-sinc resample to the pipeline
// rate, peak normalization to -3 dBFS, trim/pad to the configured duration.
// The pitch warning is advisory; the item is returned either way.
IngestResult ingest_wav(const std::string& path, int note, const std::string& stop, Family family,
                        const std::string& footage, const IngestConfig& cfg);

// Materializes an item's audio as a Tone (reads item.wav_path relative to
// base_dir unless samples are inline).
Tone load_tone(const DatasetItem& item, const DatasetManifest& manifest,
               const std::string& base_dir);

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct DatasetSplit {
    DatasetManifest train;
    DatasetManifest val;
    DatasetManifest test;
};

// Partitions by stop (never by note): stop order is shuffled by seed, counts
// come from largest-remainder rounding of the fractions. Throws TooFewStops
// when there are fewer stops than splits with nonzero fractions.
DatasetSplit split_dataset(const DatasetManifest& manifest, const SplitFractions& fractions,
                           std::uint64_t seed);

// Line-delimited text: a "#pipematch-manifest v1" header, one JSON header
// line, then one JSON object per item. Parameter values round-trip exactly.
void save_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path, bool check_files = true);

// stop,note,family,footage,render_seed + one column per parameter; items
// without parameters are omitted.
std::string manifest_params_csv(const DatasetManifest& manifest);

}  // namespace pipematch
