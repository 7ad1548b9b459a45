#include "pipematch/search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "pipematch/errors.hpp"
#include "pipematch/io.hpp"

namespace pipematch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_range(const char* name, double v, double lo, double hi, bool lo_open, bool hi_open) {
    const bool bad_lo = lo_open ? !(v > lo) : !(v >= lo);
    const bool bad_hi = hi_open ? !(v < hi) : !(v <= hi);
    if (bad_lo || bad_hi) throw OutOfRangeParam(name, v, lo, hi);
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void MorisConfig::validate() const {
    cost.validate();
    analysis.validate();
    check_range("step_size", step_size, 0.0, 1.0, true, true);
    check_range("sparsity", sparsity, 0.0, 1.0, true, false);
    check_range("gaussian_sigma", gaussian_sigma, 0.0, kInf, true, true);
    check_range("epsilon", epsilon, 0.0, kInf, false, true);
    if (patience < 1)
        throw OutOfRangeParam("patience", static_cast<double>(patience), 1, kInf);
    if (max_iterations < 1)
        throw OutOfRangeParam("max_iterations", static_cast<double>(max_iterations), 1, kInf);
}

std::string stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::Epsilon: return "epsilon";
        case StopReason::Patience: return "patience";
        case StopReason::MaxIterations: return "max_iterations";
        case StopReason::None: return "none";
    }
    return "none";
}

std::string trace_to_csv(const SearchTrace& trace) {
    std::ostringstream out;
    out << "iteration,d_proposed,d_best,accepted,coords\n";
    for (const auto& row : trace.rows) {
        out << row.iteration << ',' << fmt_double(row.d_proposed) << ','
            << fmt_double(row.d_best) << ',' << (row.accepted ? 1 : 0) << ',';
        for (std::size_t i = 0; i < row.coords.size(); ++i) {
            if (i) out << ';';
            out << row.coords[i];
        }
        out << '\n';
    }
    return out.str();
}

SelectionResult select_best(const std::vector<ParamVector>& candidates, const Tone& target,
                            const SelectionConfig& cfg, int note, double duration_s,
                            double sample_rate, std::uint64_t render_seed, int workers) {
    if (candidates.empty()) throw EmptyDataset("no candidates to select from");
    cfg.cost.validate();
    cfg.analysis.validate();

    const CostEvaluator eval(target, cfg.cost, cfg.analysis);
    SelectionResult result;
    result.distances.assign(candidates.size(), kInf);
    result.errors.assign(candidates.size(), std::string());

    parallel_for(candidates.size(), workers, [&](std::size_t i) {
        try {
            const Tone tone = render_tone(candidates[i], note, duration_s, sample_rate, render_seed);
            result.distances[i] = eval(tone);
        } catch (const std::exception& e) {
            result.errors[i] = e.what();
        }
    });

    std::size_t best = candidates.size();
    double best_d = kInf;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (result.distances[i] < best_d) {
            best_d = result.distances[i];
            best = i;
        }
    }
    if (best == candidates.size())
        throw AllCandidatesFailed("all " + std::to_string(candidates.size()) +
                                  " candidates failed to render or evaluate");
    result.best_index = best;
    result.best = candidates[best];
    return result;
}

NormalizedParams perturb(const NormalizedParams& theta_b, double d_b, const MorisConfig& cfg,
                         Rng& rng, std::vector<std::size_t>* coords_out) {
    const std::size_t n = NormalizedParams::size();
    const std::size_t k =
        std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(cfg.sparsity * n)));

    // Partial Fisher-Yates: one uniform_int per selected slot, then sort.
    std::array<std::size_t, NormalizedParams::size()> pool;
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t pick = static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(j), static_cast<int>(n - 1)));
        std::swap(pool[j], pool[pick]);
    }
    std::vector<std::size_t> coords(pool.begin(), pool.begin() + k);
    std::sort(coords.begin(), coords.end());

    NormalizedParams out = theta_b;
    for (std::size_t j : coords) {
        const double g = rng.gaussian() * cfg.gaussian_sigma;
        const double scale =
            cfg.mode == PerturbationMode::Relative ? std::abs(theta_b[j]) : 1.0;
        out[j] = std::clamp(theta_b[j] + cfg.step_size * d_b * g * scale, -1.0, 1.0);
    }
    if (coords_out) *coords_out = std::move(coords);
    return out;
}

MorisResult moris_optimize(const ParamVector& theta_0, const Tone& target, const MorisConfig& cfg,
                           int note, double duration_s, double sample_rate,
                           std::uint64_t render_seed) {
    cfg.validate();
    const CostEvaluator eval(target, cfg.cost, cfg.analysis);

    // The starting point must evaluate; anything after it may fail softly.
    const Tone tone_0 = render_tone(theta_0, note, duration_s, sample_rate, render_seed);
    const double d_0 = eval(tone_0);

    MorisResult result;
    result.d0 = d_0;
    result.trace.d0 = d_0;

    NormalizedParams theta_b = normalize(theta_0);
    double d_b = d_0;

    if (d_b <= cfg.epsilon) {
        result.trace.stop = StopReason::Epsilon;
        result.best = denormalize(theta_b);
        result.d_final = d_b;
        return result;
    }

    Rng rng(cfg.seed);
    result.trace.rows.reserve(cfg.max_iterations);
    std::size_t rejections = 0;
    for (std::size_t iter = 1; iter <= cfg.max_iterations; ++iter) {
        SearchTrace::Row row;
        row.iteration = iter;

        // Step scale uses the distance relative to d_0 so step_size means the
        // same thing whatever the metric's absolute magnitude.
        const NormalizedParams proposal = perturb(theta_b, d_b / d_0, cfg, rng, &row.coords);

        double d_i = kInf;
        try {
            const Tone tone_i =
                render_tone(denormalize(proposal), note, duration_s, sample_rate, render_seed);
            d_i = eval(tone_i);
        } catch (const Error&) {
            d_i = kInf;
        }

        row.d_proposed = d_i;
        row.accepted = d_i < d_b;
        if (row.accepted) {
            theta_b = proposal;
            d_b = d_i;
            rejections = 0;
        } else {
            ++rejections;
        }
        row.d_best = d_b;
        result.trace.rows.push_back(std::move(row));

        if (d_b <= cfg.epsilon) {
            result.trace.stop = StopReason::Epsilon;
            break;
        }
        if (rejections >= cfg.patience) {
            result.trace.stop = StopReason::Patience;
            break;
        }
    }
    if (result.trace.stop == StopReason::None) result.trace.stop = StopReason::MaxIterations;

    result.best = denormalize(theta_b);
    result.d_final = d_b;
    return result;
}

PipelineResult run_pipeline(const Tone& target, const std::vector<Mlp>& ensemble,
                            const PipelineConfig& cfg) {
    if (ensemble.empty()) throw Error("neural stage: empty ensemble");

    PipelineResult result;
    try {
        const FeatureVector features = extract_features(target, cfg.feature_analysis);
        result.candidates.reserve(ensemble.size());
        for (const Mlp& mlp : ensemble) {
            const std::vector<double> y = mlp.forward(features.values);
            if (y.size() != NormalizedParams::size())
                throw DimensionMismatch("network emits " + std::to_string(y.size()) +
                                        " outputs, expected " +
                                        std::to_string(NormalizedParams::size()));
            NormalizedParams np;
            std::copy(y.begin(), y.end(), np.values.begin());
            result.candidates.push_back(denormalize(clamp_normalized(np)));
        }
    } catch (const Error& e) {
        throw Error(std::string("neural stage: ") + e.what());
    }
    result.theta_ns_best = result.candidates.front();

    try {
        SelectionResult sel =
            select_best(result.candidates, target, cfg.selection, cfg.note,
                        cfg.candidate_duration_s, cfg.sample_rate, cfg.render_seed, cfg.workers);
        result.selection_distances = std::move(sel.distances);
        result.selected_index = sel.best_index;
        result.theta_ss = sel.best;
    } catch (const Error& e) {
        throw Error(std::string("selection stage: ") + e.what());
    }

    ParamVector theta = result.theta_ss;
    for (std::size_t r = 0; r < cfg.moris_runs.size(); ++r) {
        try {
            MorisResult run = moris_optimize(theta, target, cfg.moris_runs[r], cfg.note,
                                             cfg.candidate_duration_s, cfg.sample_rate,
                                             cfg.render_seed);
            theta = run.best;
            result.moris.push_back(std::move(run));
        } catch (const Error& e) {
            throw Error("refinement stage run " + std::to_string(r) + ": " + e.what());
        }
    }
    result.theta_final = theta;
    return result;
}

}  // namespace pipematch
