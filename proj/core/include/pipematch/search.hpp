#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pipematch/metrics.hpp"
#include "pipematch/mlp.hpp"
#include "pipematch/params.hpp"
#include "pipematch/pipe_model.hpp"
#include "pipematch/rng.hpp"
#include "pipematch/tone.hpp"

namespace pipematch {

// Selection over rendered candidates: d_i = sum_k a_k J_k(target, candidate_i).
struct SelectionConfig {
    WeightedCost cost;
    AnalysisConfig analysis;
};

enum class PerturbationMode { Relative, Absolute };

// Stochastic local search configuration. step_size, sparsity and sigma shape
// the proposal distribution; epsilon/patience/max_iterations stop the loop.
struct MorisConfig {
    WeightedCost cost;
    AnalysisConfig analysis;
    double step_size = 0.2;      // mu
    double sparsity = 0.15;      // rho: ceil(rho * n) coordinates per proposal
    double gaussian_sigma = 1.0;
    double epsilon = 0.0;        // stop once best distance <= epsilon
    std::size_t patience = 4000; // stop after this many rejections in a row
    std::size_t max_iterations = 4000;
    std::uint64_t seed = 0;
    PerturbationMode mode = PerturbationMode::Relative;

    void validate() const;
};

enum class StopReason { Epsilon, Patience, MaxIterations, None };
std::string stop_reason_name(StopReason r);

struct SearchTrace {
    struct Row {
        std::size_t iteration = 0;  // 1-based
        double d_proposed = 0.0;
        double d_best = 0.0;
        bool accepted = false;
        std::vector<std::size_t> coords;  // perturbed coordinate indices, ascending
    };
    double d0 = 0.0;
    std::vector<Row> rows;
    StopReason stop = StopReason::None;
};

std::string trace_to_csv(const SearchTrace& trace);

struct SelectionResult {
    std::size_t best_index = 0;
    ParamVector best;
    std::vector<double> distances;     // +inf for candidates that failed to render
    std::vector<std::string> errors;   // parallel to distances, empty string when ok
};

// Renders every candidate at the given note/seed, evaluates the weighted cost
// against the target and returns the strict argmin (first seen wins on ties).
// Candidates that fail to render get +inf distance; if all fail,
// AllCandidatesFailed is thrown.
SelectionResult select_best(const std::vector<ParamVector>& candidates, const Tone& target,
                            const SelectionConfig& cfg, int note, double duration_s,
                            double sample_rate, std::uint64_t render_seed, int workers = 1);

// One proposal: a uniformly drawn subset of ceil(sparsity * n) coordinates is
// displaced by step_size * d_b * N(0, sigma) (times |theta_b[j]| in relative
// mode), then clamped to [-1, 1]. Draw order is part of the determinism
// contract: first the subset via a partial Fisher-Yates shuffle (one
// uniform_int per selected slot), indices then sorted ascending, then one
// gaussian per selected coordinate in ascending index order.
NormalizedParams perturb(const NormalizedParams& theta_b, double d_b, const MorisConfig& cfg,
                         Rng& rng, std::vector<std::size_t>* coords_out = nullptr);

struct MorisResult {
    ParamVector best;
    double d0 = 0.0;
    double d_final = 0.0;
    SearchTrace trace;
};

// Accept-only-if-better stochastic descent from theta_0. Perturbation
// magnitude is scaled by d_b / d0 so step_size keeps its meaning across
// metrics of different magnitude. Deterministic from cfg.seed.
MorisResult moris_optimize(const ParamVector& theta_0, const Tone& target, const MorisConfig& cfg,
                           int note, double duration_s, double sample_rate,
                           std::uint64_t render_seed);

struct PipelineConfig {
    AnalysisConfig feature_analysis;  // must match the ensemble's training extraction
    SelectionConfig selection;
    std::vector<MorisConfig> moris_runs;  // applied in order, each from the previous best
    int note = 0;
    double candidate_duration_s = kSearchToneSeconds;
    double sample_rate = kDefaultSampleRate;
    std::uint64_t render_seed = 0;
    int workers = 1;
};

struct PipelineResult {
    std::vector<ParamVector> candidates;   // denormalized ensemble outputs, ensemble order
    std::vector<double> selection_distances;
    std::size_t selected_index = 0;
    ParamVector theta_ns_best;  // first ensemble member's estimate
    ParamVector theta_ss;
    std::vector<MorisResult> moris;
    ParamVector theta_final;
};

// Full three-stage estimation: ensemble forward passes -> selection ->
// sequential refinement runs. The ensemble is assumed ranked (member 0 =
// best); errors carry a stage label.
PipelineResult run_pipeline(const Tone& target, const std::vector<Mlp>& ensemble,
                            const PipelineConfig& cfg);

}  // namespace pipematch
