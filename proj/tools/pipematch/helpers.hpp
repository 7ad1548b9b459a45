#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <pipematch/corpus.hpp>
#include <pipematch/features.hpp>
#include <pipematch/metrics.hpp>
#include <pipematch/mlp.hpp>
#include <pipematch/search.hpp>
#include <pipematch/tone.hpp>

namespace pmcli {

// "24,30,36" or "lo:hi:step" (inclusive).
std::vector<int> parse_notes(const std::string& text);

// "H_H:1,H_10:1,H_10W:3@4000" -> cost + iteration budget.
struct RunSpec {
    pipematch::WeightedCost cost;
    std::size_t iterations = 0;
};
RunSpec parse_run_spec(const std::string& text);

std::string analysis_to_json(const pipematch::AnalysisConfig& cfg);
pipematch::AnalysisConfig analysis_from_json(const std::string& text);

// Model files in rank order (model_00... sorts first); optionally reads
// analysis.json written next to them at training time.
std::vector<pipematch::Mlp> load_ensemble(const std::string& models_dir,
                                          pipematch::AnalysisConfig* analysis_out);

// Row of the stage-distance report: all six standard metrics of a candidate
// parameter set rendered against the target.
struct StageRow {
    std::string stage;
    double h_h = 0.0, h_10 = 0.0, h_10w = 0.0;
    double e_d2 = 0.0, e_d1 = 0.0, e_d = 0.0;
};
StageRow stage_row(const std::string& stage, const pipematch::Tone& target,
                   const pipematch::Tone& candidate, const pipematch::AnalysisConfig& cfg);
std::string stage_table_csv(const std::vector<StageRow>& rows);

std::string format_double(double v);

// Loads a matching target: WAV files go through ingestion (first channel,
// resample, -3 dBFS, trim/pad); manifest items load as stored.
pipematch::Tone load_target_wav(const std::string& path, int note, double sample_rate,
                                double duration_s);
pipematch::Tone load_target_item(const std::string& manifest_path, const std::string& stop,
                                 int note);

}  // namespace pmcli
