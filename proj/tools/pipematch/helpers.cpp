#include "helpers.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

#include <pipematch/errors.hpp>
#include <pipematch/io.hpp>

namespace pmcli {

namespace fs = std::filesystem;
using namespace pipematch;
using ordered_json = nlohmann::ordered_json;

std::vector<int> parse_notes(const std::string& text) {
    std::vector<int> notes;
    if (text.find(':') != std::string::npos) {
        int lo = 0, hi = 0, step = 1;
        if (std::sscanf(text.c_str(), "%d:%d:%d", &lo, &hi, &step) < 2 || step < 1)
            throw FormatError("bad note range '" + text + "', expected lo:hi[:step]");
        for (int n = lo; n <= hi; n += step) notes.push_back(n);
    } else {
        std::istringstream in(text);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            if (tok.empty()) continue;
            notes.push_back(std::stoi(tok));
        }
    }
    if (notes.empty()) throw FormatError("empty note list '" + text + "'");
    return notes;
}

RunSpec parse_run_spec(const std::string& text) {
    RunSpec spec;
    const auto at = text.rfind('@');
    if (at == std::string::npos)
        throw FormatError("bad run spec '" + text + "', expected <cost>@<iterations>");
    spec.cost = WeightedCost::parse(text.substr(0, at));
    const long iters = std::stol(text.substr(at + 1));
    if (iters < 1) throw FormatError("bad iteration count in '" + text + "'");
    spec.iterations = static_cast<std::size_t>(iters);
    return spec;
}

std::string analysis_to_json(const AnalysisConfig& cfg) {
    ordered_json j;
    j["fft_size"] = cfg.fft_size;
    j["hop_size"] = cfg.hop_size;
    j["steady_start_s"] = cfg.steady_start_s;
    j["steady_end_s"] = cfg.steady_end_s;
    j["attack_window_end_s"] = cfg.attack_window_end_s;
    j["harmonic_half_width"] = cfg.harmonic_half_width;
    j["n_harmonics"] = cfg.n_harmonics;
    j["n_mel_bands"] = cfg.n_mel_bands;
    j["n_envelopes"] = cfg.n_envelopes;
    return j.dump(2) + "\n";
}

AnalysisConfig analysis_from_json(const std::string& text) {
    AnalysisConfig cfg;
    try {
        const ordered_json j = ordered_json::parse(text);
        cfg.fft_size = j.at("fft_size").get<std::size_t>();
        cfg.hop_size = j.at("hop_size").get<std::size_t>();
        cfg.steady_start_s = j.at("steady_start_s").get<double>();
        cfg.steady_end_s = j.at("steady_end_s").get<double>();
        cfg.attack_window_end_s = j.at("attack_window_end_s").get<double>();
        cfg.harmonic_half_width = j.at("harmonic_half_width").get<double>();
        cfg.n_harmonics = j.at("n_harmonics").get<std::size_t>();
        cfg.n_mel_bands = j.at("n_mel_bands").get<std::size_t>();
        cfg.n_envelopes = j.at("n_envelopes").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("analysis config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::vector<Mlp> load_ensemble(const std::string& models_dir, AnalysisConfig* analysis_out) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(models_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > 5 && name.substr(name.size() - 5) == ".pmlp") paths.push_back(name);
    }
    std::sort(paths.begin(), paths.end());
    std::vector<Mlp> ensemble;
    ensemble.reserve(paths.size());
    for (const auto& name : paths)
        ensemble.push_back(Mlp::from_bytes(read_file((fs::path(models_dir) / name).string())));
    if (analysis_out) {
        const fs::path ap = fs::path(models_dir) / "analysis.json";
        if (fs::exists(ap)) *analysis_out = analysis_from_json(read_file(ap.string()));
    }
    return ensemble;
}

StageRow stage_row(const std::string& stage, const Tone& target, const Tone& candidate,
                   const AnalysisConfig& cfg) {
    StageRow row;
    row.stage = stage;
    row.h_h = harmonic_distance_nyquist(target, candidate, cfg);
    row.h_10 = harmonic_distance(target, candidate, 10, cfg);
    row.h_10w = weighted_harmonic_distance(target, candidate, 10, cfg);
    row.e_d2 = envelope_distance(target, candidate, EnvelopeBand::Harmonic2, cfg);
    row.e_d1 = envelope_distance(target, candidate, EnvelopeBand::Harmonic1, cfg);
    row.e_d = envelope_distance(target, candidate, EnvelopeBand::Full, cfg);
    return row;
}

std::string stage_table_csv(const std::vector<StageRow>& rows) {
    std::ostringstream out;
    out << "stage,H_H,H_10,H_10W,E_D2,E_D1,E_D\n";
    for (const auto& r : rows)
        out << r.stage << ',' << format_double(r.h_h) << ',' << format_double(r.h_10) << ','
            << format_double(r.h_10w) << ',' << format_double(r.e_d2) << ','
            << format_double(r.e_d1) << ',' << format_double(r.e_d) << '\n';
    return out.str();
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Tone load_target_wav(const std::string& path, int note, double sample_rate, double duration_s) {
    IngestConfig icfg;
    icfg.render.sample_rate = sample_rate;
    icfg.render.duration_s = duration_s;
    const IngestResult ing = ingest_wav(path, note, "target", Family::Unknown, "8", icfg);
    if (ing.pitch_warning)
        std::fprintf(stderr,
                     "warning: dominant peak %.1f Hz deviates from note %d (%.1f Hz) by more "
                     "than %.1f%%\n",
                     ing.measured_f0, note, note_to_f0(note), icfg.pitch_tolerance * 100.0);
    Tone tone;
    tone.note = note;
    tone.sample_rate = sample_rate;
    tone.samples = ing.item.samples;
    return tone;
}

Tone load_target_item(const std::string& manifest_path, const std::string& stop, int note) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    const std::string base = fs::path(manifest_path).parent_path().string();
    for (const auto& item : manifest.items)
        if (item.stop == stop && item.note == note) return load_tone(item, manifest, base);
    throw FormatError("manifest has no item for stop '" + stop + "' note " + std::to_string(note));
}

}  // namespace pmcli
