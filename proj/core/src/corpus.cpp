#include "pipematch/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pipematch/dsp.hpp"
#include "pipematch/errors.hpp"
#include "pipematch/features.hpp"
#include "pipematch/io.hpp"
#include "pipematch/wav.hpp"

namespace pipematch {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string family_name(Family f) {
    switch (f) {
        case Family::Principale: return "principale";
        case Family::Bordone: return "bordone";
        case Family::Flauto: return "flauto";
        case Family::Unknown: return "unknown";
    }
    return "unknown";
}

Family family_from_name(const std::string& name) {
    if (name == "principale") return Family::Principale;
    if (name == "bordone") return Family::Bordone;
    if (name == "flauto") return Family::Flauto;
    if (name == "unknown") return Family::Unknown;
    throw FormatError("unknown family tag '" + name + "'");
}

void DatasetManifest::validate() const {
    std::vector<std::pair<std::string, int>> seen;
    seen.reserve(items.size());
    for (const auto& item : items) {
        if (item.note < kMinNote || item.note > kMaxNote)
            throw OutOfRangeParam("note", item.note, kMinNote, kMaxNote);
        seen.emplace_back(item.stop, item.note);
    }
    std::sort(seen.begin(), seen.end());
    const auto dup = std::adjacent_find(seen.begin(), seen.end());
    if (dup != seen.end())
        throw FormatError("duplicate item: stop '" + dup->first + "' note " +
                          std::to_string(dup->second));
}

std::vector<std::string> DatasetManifest::stops() const {
    std::vector<std::string> out;
    for (const auto& item : items)
        if (std::find(out.begin(), out.end(), item.stop) == out.end()) out.push_back(item.stop);
    return out;
}

namespace {

struct RangeOverride {
    const char* field;
    double lo;
    double hi;
};

// Family-conditioned narrowing of the uniform prior. Bordone suppresses the
// even-harmonic source; flauto leans on the noise path and a soft nonlinearity.
std::vector<RangeOverride> family_overrides(Family f) {
    switch (f) {
        case Family::Principale:
            return {{"h1_gain", 0.5, 1.0}, {"h2_gain", 0.2, 0.8}, {"noise_gain", 0.0, 0.12}};
        case Family::Bordone:
            return {{"h1_gain", 0.5, 1.0}, {"h2_gain", 0.0, 0.1}, {"noise_gain", 0.0, 0.12}};
        case Family::Flauto:
            return {{"h1_gain", 0.4, 1.0},
                    {"h2_gain", 0.0, 0.4},
                    {"sigmoid_drive", 0.2, 2.0},
                    {"noise_gain", 0.05, 0.25},
                    {"bandpass_wet", 0.3, 1.0}};
        case Family::Unknown: return {};
    }
    return {};
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ParamVector sample_prior(const PriorConfig& prior, Rng& rng) {
    const auto& fields = param_fields();
    std::array<std::pair<double, double>, 27> ranges;
    for (std::size_t i = 0; i < fields.size(); ++i) ranges[i] = {fields[i].lo, fields[i].hi};
    for (const auto& ov : family_overrides(prior.family)) {
        const std::size_t i = param_index(ov.field);
        ranges[i].first = std::max(ranges[i].first, ov.lo);
        ranges[i].second = std::min(ranges[i].second, ov.hi);
    }
    ParamVector p;
    for (std::size_t i = 0; i < fields.size(); ++i)
        p[i] = rng.uniform(ranges[i].first, ranges[i].second);
    return p;
}

std::vector<std::string> generate_preset_names() {
    return {"principale-8",  "principale-4-8-16", "principale-all", "principale-90",
            "bordone-8",     "bordone-all",       "flauto-all"};
}

GenerateConfig generate_preset(const std::string& name) {
    GenerateConfig cfg;
    cfg.notes = {24, 30, 36, 42, 48, 54, 60};
    if (name == "principale-8") {
        cfg.n_stops = 132;
        cfg.prior.family = Family::Principale;
    } else if (name == "principale-4-8-16") {
        cfg.n_stops = 256;
        cfg.prior.family = Family::Principale;
    } else if (name == "principale-all") {
        cfg.n_stops = 330;
        cfg.prior.family = Family::Principale;
    } else if (name == "principale-90") {
        cfg.n_stops = 90;
        cfg.prior.family = Family::Principale;
    } else if (name == "bordone-8") {
        cfg.n_stops = 56;
        cfg.prior.family = Family::Bordone;
    } else if (name == "bordone-all") {
        cfg.n_stops = 150;
        cfg.prior.family = Family::Bordone;
    } else if (name == "flauto-all") {
        cfg.n_stops = 21;
        cfg.prior.family = Family::Flauto;
    } else {
        throw FormatError("unknown generation preset '" + name + "'");
    }
    cfg.stop_prefix = name + "-";
    cfg.prior.note_jitter = 0.02;
    return cfg;
}

DatasetManifest generate_contrived(const GenerateConfig& cfg, const std::string& out_dir,
                                   std::vector<std::string>* skipped_log) {
    if (cfg.n_stops < 1)
        throw OutOfRangeParam("n_stops", 0.0, 1.0, std::numeric_limits<double>::infinity());
    if (cfg.notes.empty()) throw EmptyDataset("no notes requested");
    fs::create_directories(out_dir);

    // Footage cycle for labelling only; "4-8-16" presets tag stops in turn.
    const bool mixed_footage = cfg.stop_prefix.find("4-8-16") != std::string::npos;
    static const char* kFootages[3] = {"8", "4", "16"};

    DatasetManifest manifest;
    manifest.seed = cfg.seed;
    manifest.render = cfg.render;

    struct PendingItem {
        DatasetItem item;
        bool failed = false;
        std::string error;
    };
    std::vector<PendingItem> pending;
    pending.reserve(cfg.n_stops * cfg.notes.size());

    for (std::size_t s = 0; s < cfg.n_stops; ++s) {
        char stop_name[64];
        std::snprintf(stop_name, sizeof stop_name, "%s%03zu", cfg.stop_prefix.c_str(), s);
        Rng stop_rng(mix_seed(cfg.seed, s));
        const ParamVector base = sample_prior(cfg.prior, stop_rng);

        for (int note : cfg.notes) {
            PendingItem p;
            p.item.stop = stop_name;
            p.item.note = note;
            p.item.family = cfg.prior.family;
            p.item.footage = mixed_footage ? kFootages[s % 3] : "8";
            p.item.has_params = true;
            p.item.params = base;
            if (cfg.prior.note_jitter > 0.0) {
                Rng jr = stop_rng.substream(1000 + static_cast<std::uint64_t>(note));
                NormalizedParams n = normalize(base);
                for (std::size_t i = 0; i < NormalizedParams::size(); ++i)
                    n[i] += cfg.prior.note_jitter * (2.0 * jr.uniform() - 1.0);
                p.item.params = denormalize(clamp_normalized(n));
            }
            p.item.render_seed =
                mix_seed(mix_seed(cfg.seed, s), static_cast<std::uint64_t>(note));
            char fname[96];
            std::snprintf(fname, sizeof fname, "%s_n%02d.wav", stop_name, note);
            p.item.wav_path = fname;
            pending.push_back(std::move(p));
        }
    }

    parallel_for(pending.size(), cfg.workers, [&](std::size_t i) {
        PendingItem& p = pending[i];
        try {
            const Tone tone = render_tone(p.item.params, p.item.note, cfg.render.duration_s,
                                          cfg.render.sample_rate, p.item.render_seed);
            write_wav((fs::path(out_dir) / p.item.wav_path).string(), tone.samples,
                      tone.sample_rate);
        } catch (const std::exception& e) {
            p.failed = true;
            p.error = e.what();
        }
    });

    for (auto& p : pending) {
        if (p.failed) {
            if (skipped_log)
                skipped_log->push_back(p.item.stop + " note " + std::to_string(p.item.note) +
                                       ": " + p.error);
            continue;
        }
        manifest.items.push_back(std::move(p.item));
    }
    if (manifest.items.empty()) throw EmptyDataset("every requested item failed to render");
    manifest.validate();
    return manifest;
}

IngestResult ingest_wav(const std::string& path, int note, const std::string& stop, Family family,
                        const std::string& footage, const IngestConfig& cfg) {
    const double f0 = note_to_f0(note);
    WavData wav = read_wav(path);

    std::vector<double> x = std::move(wav.samples);
    if (wav.sample_rate != cfg.render.sample_rate)
        x = dsp::resample_sinc(x, wav.sample_rate, cfg.render.sample_rate);

    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) {
        const double scale = std::pow(10.0, -3.0 / 20.0) / peak;
        for (double& v : x) v *= scale;
    }

    const auto want =
        static_cast<std::size_t>(std::llround(cfg.render.duration_s * cfg.render.sample_rate));
    const std::size_t content_n = std::min(x.size(), want);
    x.resize(want, 0.0);

    IngestResult result;
    result.item.stop = stop;
    result.item.note = note;
    result.item.family = family;
    result.item.footage = footage;
    result.item.samples = std::move(x);

    // Dominant spectral peak vs the labelled pitch, over the steady window of
    // the recorded content; the zero-padded tail must not dilute it.
    const double content_s = static_cast<double>(content_n) / cfg.render.sample_rate;
    const auto acfg = AnalysisConfig::defaults_for(
        cfg.render.sample_rate, std::min(cfg.render.duration_s, content_s));
    const auto start = static_cast<std::size_t>(acfg.steady_start_s * cfg.render.sample_rate);
    const auto end = static_cast<std::size_t>(acfg.steady_end_s * cfg.render.sample_rate);
    const std::vector<double> power = dsp::mean_power_spectrum(result.item.samples, start, end,
                                                               acfg.fft_size, acfg.hop_size);
    const double bin_hz = cfg.render.sample_rate / static_cast<double>(acfg.fft_size);
    const std::size_t first_bin = std::max<std::size_t>(1, static_cast<std::size_t>(20.0 / bin_hz));
    std::size_t peak_bin = first_bin;
    for (std::size_t k = first_bin; k < power.size(); ++k)
        if (power[k] > power[peak_bin]) peak_bin = k;
    // Bright tones may put the global maximum on an overtone: drop to the
    // lowest subharmonic of the peak that carries real energy (>= -25 dB).
    const double sub_floor = 3.2e-3 * power[peak_bin];
    for (int div = 4; div >= 2; --div) {
        const double cand = static_cast<double>(peak_bin) / div;
        if (cand * bin_hz < 20.0 || cand < 4.0) continue;
        const auto center = static_cast<std::size_t>(std::llround(cand));
        std::size_t local = center - 3;
        for (std::size_t k = center - 3; k <= center + 3 && k < power.size(); ++k)
            if (power[k] > power[local]) local = k;
        if (power[local] > sub_floor) {
            peak_bin = local;
            break;
        }
    }
    result.measured_f0 = dsp::parabolic_peak(power, peak_bin) * bin_hz;
    result.pitch_warning = std::abs(result.measured_f0 - f0) > cfg.pitch_tolerance * f0;
    return result;
}

Tone load_tone(const DatasetItem& item, const DatasetManifest& manifest,
               const std::string& base_dir) {
    Tone tone;
    tone.note = item.note;
    tone.sample_rate = manifest.render.sample_rate;
    if (item.wav_path.empty()) {
        tone.samples = item.samples;
        return tone;
    }
    const WavData wav = read_wav((fs::path(base_dir) / item.wav_path).string());
    if (wav.sample_rate != manifest.render.sample_rate)
        throw SampleRateMismatch(item.wav_path + ": expected " +
                                 fmt_double(manifest.render.sample_rate) + " Hz, found " +
                                 fmt_double(wav.sample_rate));
    tone.samples = std::move(wav.samples);
    return tone;
}

DatasetSplit split_dataset(const DatasetManifest& manifest, const SplitFractions& fractions,
                           std::uint64_t seed) {
    const double f[3] = {fractions.train, fractions.val, fractions.test};
    for (double v : f)
        if (v < 0.0 || v > 1.0)
            throw OutOfRangeParam("split fraction", v, 0.0, 1.0);
    if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9)
        throw OutOfRangeParam("split fraction sum", f[0] + f[1] + f[2], 1.0, 1.0);

    std::vector<std::string> stops = manifest.stops();
    std::size_t n_nonzero = 0;
    for (double v : f) n_nonzero += v > 0.0;
    if (stops.size() < n_nonzero)
        throw TooFewStops(std::to_string(stops.size()) + " stops cannot fill " +
                          std::to_string(n_nonzero) + " splits");

    Rng rng(seed);
    for (std::size_t i = stops.size(); i > 1; --i)
        std::swap(stops[i - 1],
                  stops[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);

    // Largest-remainder allocation, but every nonzero fraction gets a stop.
    const auto S = static_cast<double>(stops.size());
    std::size_t counts[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        counts[i] = static_cast<std::size_t>(std::floor(f[i] * S));
        if (f[i] > 0.0 && counts[i] == 0) counts[i] = 1;
        remainders[i] = f[i] * S - std::floor(f[i] * S);
        assigned += counts[i];
    }
    while (assigned < stops.size()) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (remainders[i] > remainders[best]) best = i;
        ++counts[best];
        remainders[best] = -1.0;
        ++assigned;
    }
    while (assigned > stops.size()) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (counts[i] > counts[best]) best = i;
        --counts[best];
        --assigned;
    }

    DatasetSplit split;
    DatasetManifest* outs[3] = {&split.train, &split.val, &split.test};
    std::size_t offset = 0;
    for (int i = 0; i < 3; ++i) {
        outs[i]->version = manifest.version;
        outs[i]->seed = manifest.seed;
        outs[i]->render = manifest.render;
        const std::vector<std::string> slice(stops.begin() + offset,
                                             stops.begin() + offset + counts[i]);
        offset += counts[i];
        for (const auto& item : manifest.items)
            if (std::find(slice.begin(), slice.end(), item.stop) != slice.end())
                outs[i]->items.push_back(item);
    }
    return split;
}

namespace {

constexpr const char* kManifestMagic = "#pipematch-manifest v1";

ordered_json item_to_json(const DatasetItem& item) {
    ordered_json j;
    j["stop"] = item.stop;
    j["note"] = item.note;
    j["family"] = family_name(item.family);
    j["footage"] = item.footage;
    if (item.has_params) {
        j["params"] = item.params.to_array();
        j["render_seed"] = item.render_seed;
    }
    if (!item.wav_path.empty())
        j["wav"] = item.wav_path;
    else
        j["samples"] = item.samples;
    return j;
}

DatasetItem item_from_json(const ordered_json& j) {
    DatasetItem item;
    item.stop = j.at("stop").get<std::string>();
    item.note = j.at("note").get<int>();
    item.family = family_from_name(j.at("family").get<std::string>());
    item.footage = j.at("footage").get<std::string>();
    if (j.contains("params")) {
        item.has_params = true;
        item.params = ParamVector::from_array(j.at("params").get<std::array<double, 27>>());
        item.render_seed = j.at("render_seed").get<std::uint64_t>();
    }
    if (j.contains("wav"))
        item.wav_path = j.at("wav").get<std::string>();
    else
        item.samples = j.at("samples").get<std::vector<double>>();
    return item;
}

}  // namespace

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    manifest.validate();
    std::ostringstream out;
    out << kManifestMagic << '\n';
    ordered_json head;
    head["seed"] = manifest.seed;
    head["sample_rate"] = manifest.render.sample_rate;
    head["duration_s"] = manifest.render.duration_s;
    out << head.dump() << '\n';
    for (const auto& item : manifest.items) out << item_to_json(item).dump() << '\n';
    atomic_write_file(path, out.str());
}

DatasetManifest load_manifest(const std::string& path, bool check_files) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kManifestMagic)
        throw FormatError(path + ": not a manifest (bad header line)");
    if (!std::getline(in, line)) throw FormatError(path + ": missing settings line");

    DatasetManifest manifest;
    try {
        const ordered_json head = ordered_json::parse(line);
        manifest.seed = head.at("seed").get<std::uint64_t>();
        manifest.render.sample_rate = head.at("sample_rate").get<double>();
        manifest.render.duration_s = head.at("duration_s").get<double>();
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            manifest.items.push_back(item_from_json(ordered_json::parse(line)));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    manifest.validate();
    if (check_files) {
        const fs::path base = fs::path(path).parent_path();
        for (const auto& item : manifest.items)
            if (!item.wav_path.empty() && !fs::exists(base / item.wav_path))
                throw UnreadableFile((base / item.wav_path).string() + ": referenced by manifest");
    }
    return manifest;
}

std::string manifest_params_csv(const DatasetManifest& manifest) {
    std::ostringstream out;
    out << "stop,note,family,footage,render_seed";
    for (const auto& field : param_fields()) out << ',' << field.name;
    out << '\n';
    for (const auto& item : manifest.items) {
        if (!item.has_params) continue;
        out << csv_escape(item.stop) << ',' << item.note << ',' << family_name(item.family) << ','
            << csv_escape(item.footage) << ',' << item.render_seed;
        for (std::size_t i = 0; i < ParamVector::size(); ++i)
            out << ',' << fmt_double(item.params[i]);
        out << '\n';
    }
    return out.str();
}

}  // namespace pipematch
