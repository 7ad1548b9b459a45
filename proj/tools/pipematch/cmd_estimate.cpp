#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <pipematch/corpus.hpp>
#include <pipematch/errors.hpp>
#include <pipematch/io.hpp>
#include <pipematch/search.hpp>
#include <pipematch/wav.hpp>

#include "commands.hpp"
#include "helpers.hpp"

namespace pmcli {

namespace fs = std::filesystem;
using namespace pipematch;

namespace {

struct MatchOptions {
    std::string models;
    std::string selection_cost = "H_H:1,H_10:1,H_10W:3";
    std::vector<std::string> runs = {"H_H:1,H_10:1,H_10W:3@4000", "E_D:1,E_D1:1,E_D2:1@300"};
    bool no_refine = false;
    double step_size = 0.2;
    double sparsity = 0.15;
    double sigma = 1.0;
    double epsilon = 0.0;
    std::size_t stall = 0;  // 0: never stop early on rejections
    std::string mode = "relative";
    std::uint64_t moris_seed = 0;
    std::uint64_t render_seed = 0;
    double candidate_duration = kSearchToneSeconds;
    double sample_rate = kDefaultSampleRate;
    int workers = 1;
};

void add_match_options(CLI::App* sub, MatchOptions& m) {
    sub->add_option("--models", m.models, "Directory of ranked .pmlp model files")->required();
    sub->add_option("--selection-cost", m.selection_cost, "Weighted cost for candidate selection");
    sub->add_option("--run", m.runs, "Refinement run '<cost>@<iterations>', repeatable")
        ->delimiter(';');
    sub->add_flag("--no-refine", m.no_refine, "Skip refinement; report NS and SS only");
    sub->add_option("--step-size", m.step_size, "Perturbation step scale in (0,1)");
    sub->add_option("--sparsity", m.sparsity, "Fraction of coordinates perturbed, (0,1]");
    sub->add_option("--sigma", m.sigma, "Gaussian spread of perturbations");
    sub->add_option("--epsilon", m.epsilon, "Stop once the best distance falls to this");
    sub->add_option("--stall", m.stall, "Stop after this many consecutive rejections");
    sub->add_option("--mode", m.mode, "Perturbation scaling: relative | absolute");
    sub->add_option("--moris-seed", m.moris_seed, "Refinement seed (mixed per run)");
    sub->add_option("--render-seed", m.render_seed, "Render seed for candidate tones");
    sub->add_option("--candidate-duration", m.candidate_duration,
                    "Length of candidate tones in seconds");
    sub->add_option("--sample-rate", m.sample_rate, "Sample rate in Hz");
    sub->add_option("--workers", m.workers, "Parallel workers");
}

PipelineConfig build_pipeline_config(const MatchOptions& m, const AnalysisConfig& feature_cfg,
                                     int note, int workers) {
    PipelineConfig cfg;
    cfg.feature_analysis = feature_cfg;
    cfg.note = note;
    cfg.candidate_duration_s = m.candidate_duration;
    cfg.sample_rate = m.sample_rate;
    cfg.render_seed = m.render_seed;
    cfg.workers = workers;

    const AnalysisConfig match_cfg =
        AnalysisConfig::defaults_for(m.sample_rate, m.candidate_duration);
    cfg.selection.cost = WeightedCost::parse(m.selection_cost);
    cfg.selection.analysis = match_cfg;

    if (!m.no_refine) {
        for (std::size_t r = 0; r < m.runs.size(); ++r) {
            const RunSpec spec = parse_run_spec(m.runs[r]);
            MorisConfig mc;
            mc.cost = spec.cost;
            mc.analysis = match_cfg;
            mc.max_iterations = spec.iterations;
            mc.step_size = m.step_size;
            mc.sparsity = m.sparsity;
            mc.gaussian_sigma = m.sigma;
            mc.epsilon = m.epsilon;
            mc.patience = m.stall > 0 ? m.stall : spec.iterations;
            mc.seed = mix_seed(m.moris_seed, r);
            if (m.mode == "relative")
                mc.mode = PerturbationMode::Relative;
            else if (m.mode == "absolute")
                mc.mode = PerturbationMode::Absolute;
            else
                throw FormatError("unknown perturbation mode '" + m.mode + "'");
            cfg.moris_runs.push_back(std::move(mc));
        }
    }
    return cfg;
}

struct EstimateOutcome {
    PipelineResult pipe;
    std::vector<StageRow> table;
};

std::string theta_json(const ParamVector& p) {
    const NormalizedParams n = normalize(p);
    std::ostringstream out;
    out << "{\n  \"physical\": " << params_to_json(p) << ",\n  \"normalized\": [";
    for (std::size_t i = 0; i < NormalizedParams::size(); ++i)
        out << (i ? ", " : "") << format_double(n[i]);
    out << "]\n}\n";
    return out.str();
}

EstimateOutcome estimate_one(const Tone& target, const std::vector<Mlp>& ensemble,
                             const MatchOptions& m, const AnalysisConfig& feature_cfg,
                             const std::string& out_dir, int workers) {
    const PipelineConfig cfg = build_pipeline_config(m, feature_cfg, target.note, workers);

    EstimateOutcome outcome;
    outcome.pipe = run_pipeline(target, ensemble, cfg);
    const PipelineResult& pipe = outcome.pipe;

    auto render_stage = [&](const ParamVector& p) {
        return render_tone(p, cfg.note, cfg.candidate_duration_s, cfg.sample_rate,
                           cfg.render_seed);
    };
    const AnalysisConfig& acfg = cfg.selection.analysis;
    outcome.table.push_back(stage_row("NS", target, render_stage(pipe.theta_ns_best), acfg));
    outcome.table.push_back(stage_row("SS", target, render_stage(pipe.theta_ss), acfg));
    for (std::size_t r = 0; r < pipe.moris.size(); ++r)
        outcome.table.push_back(stage_row("MORIS_" + std::to_string(r + 1), target,
                                          render_stage(pipe.moris[r].best), acfg));

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const fs::path out(out_dir);
        atomic_write_file((out / "report.csv").string(), stage_table_csv(outcome.table));
        for (std::size_t r = 0; r < pipe.moris.size(); ++r)
            atomic_write_file((out / ("trace_run" + std::to_string(r + 1) + ".csv")).string(),
                              trace_to_csv(pipe.moris[r].trace));
        atomic_write_file((out / "theta.txt").string(), params_to_text(pipe.theta_final));
        atomic_write_file((out / "theta.json").string(), theta_json(pipe.theta_final));
        const Tone best = render_tone(pipe.theta_final, cfg.note, target.duration_s(),
                                      cfg.sample_rate, cfg.render_seed);
        write_wav((out / "best.wav").string(), best.samples, best.sample_rate);

        std::ostringstream sum;
        sum << "note " << target.note << ", ensemble of " << ensemble.size() << " models\n";
        sum << "selected candidate " << pipe.selected_index << " (selection distance "
            << format_double(pipe.selection_distances[pipe.selected_index]) << ")\n";
        for (std::size_t r = 0; r < pipe.moris.size(); ++r) {
            const MorisResult& run = pipe.moris[r];
            sum << "run " << (r + 1) << ": " << run.trace.rows.size() << " iterations, d "
                << format_double(run.d0) << " -> " << format_double(run.d_final) << " ("
                << stop_reason_name(run.trace.stop) << ")\n";
        }
        atomic_write_file((out / "summary.txt").string(), sum.str());
    }
    return outcome;
}

struct EstimateOptions {
    MatchOptions match;
    std::string target_wav;
    std::string manifest;
    std::string stop;
    int note = -1;
    double target_duration = kDatasetToneSeconds;
    std::string out;
};

void run_estimate(const EstimateOptions& opt) {
    Tone target;
    if (!opt.target_wav.empty()) {
        if (opt.note < 0) throw FormatError("--note is required with --target");
        target = load_target_wav(opt.target_wav, opt.note, opt.match.sample_rate,
                                 opt.target_duration);
    } else if (!opt.manifest.empty()) {
        if (opt.stop.empty() || opt.note < 0)
            throw FormatError("--stop and --note are required with --manifest");
        target = load_target_item(opt.manifest, opt.stop, opt.note);
    } else {
        throw FormatError("give a target: --target <wav> or --manifest/--stop/--note");
    }

    AnalysisConfig feature_cfg =
        AnalysisConfig::defaults_for(target.sample_rate, target.duration_s());
    const std::vector<Mlp> ensemble = load_ensemble(opt.match.models, &feature_cfg);
    if (ensemble.empty()) throw Error("no .pmlp models in " + opt.match.models);

    const EstimateOutcome outcome =
        estimate_one(target, ensemble, opt.match, feature_cfg, opt.out, opt.match.workers);
    std::fputs(stage_table_csv(outcome.table).c_str(), stdout);
}

struct EvaluateOptions {
    MatchOptions match;
    std::string manifest;
    std::string stop;
    std::string out;
    std::vector<std::size_t> checkpoints = {0, 300, 1500, 4000};
};

double trace_distance_at(const SearchTrace& trace, std::size_t iteration) {
    double d = trace.d0;
    for (const auto& row : trace.rows) {
        if (row.iteration > iteration) break;
        d = row.d_best;
    }
    return d;
}

void run_evaluate(const EvaluateOptions& opt) {
    const DatasetManifest manifest = load_manifest(opt.manifest);
    const std::string base = fs::path(opt.manifest).parent_path().string();
    const std::string stop = opt.stop.empty() ? manifest.stops().at(0) : opt.stop;

    std::vector<const DatasetItem*> items;
    for (const auto& item : manifest.items)
        if (item.stop == stop) items.push_back(&item);
    if (items.empty()) throw FormatError("manifest has no items for stop '" + stop + "'");
    std::sort(items.begin(), items.end(),
              [](const DatasetItem* a, const DatasetItem* b) { return a->note < b->note; });

    AnalysisConfig feature_cfg =
        AnalysisConfig::defaults_for(manifest.render.sample_rate, manifest.render.duration_s);
    const std::vector<Mlp> ensemble = load_ensemble(opt.match.models, &feature_cfg);
    if (ensemble.empty()) throw Error("no .pmlp models in " + opt.match.models);

    struct NoteOutcome {
        int note = 0;
        bool failed = false;
        std::string error;
        EstimateOutcome est;
    };
    std::vector<NoteOutcome> outcomes(items.size());
    fs::create_directories(opt.out);

    parallel_for(items.size(), opt.match.workers, [&](std::size_t i) {
        NoteOutcome& res = outcomes[i];
        res.note = items[i]->note;
        try {
            const Tone target = load_tone(*items[i], manifest, base);
            const std::string note_dir =
                (fs::path(opt.out) / ("note_" + std::to_string(res.note))).string();
            res.est = estimate_one(target, ensemble, opt.match, feature_cfg, note_dir, 1);
        } catch (const std::exception& e) {
            res.failed = true;
            res.error = e.what();
        }
    });

    std::ostringstream per_note;
    per_note << "note,stage,H_H,H_10,H_10W,E_D2,E_D1,E_D\n";
    std::vector<StageRow> sums;
    std::size_t ok = 0;
    std::ostringstream failures;
    failures << "note,error\n";
    std::ostringstream convergence;
    convergence << "note,iteration,d_best\n";

    for (const auto& res : outcomes) {
        if (res.failed) {
            failures << res.note << ',' << csv_escape(res.error) << '\n';
            continue;
        }
        ++ok;
        for (const auto& row : res.est.table) {
            per_note << res.note << ',' << row.stage << ',' << format_double(row.h_h) << ','
                     << format_double(row.h_10) << ',' << format_double(row.h_10w) << ','
                     << format_double(row.e_d2) << ',' << format_double(row.e_d1) << ','
                     << format_double(row.e_d) << '\n';
        }
        if (sums.empty()) sums.assign(res.est.table.size(), StageRow{});
        for (std::size_t s = 0; s < res.est.table.size() && s < sums.size(); ++s) {
            const StageRow& row = res.est.table[s];
            sums[s].stage = row.stage;
            sums[s].h_h += row.h_h;
            sums[s].h_10 += row.h_10;
            sums[s].h_10w += row.h_10w;
            sums[s].e_d2 += row.e_d2;
            sums[s].e_d1 += row.e_d1;
            sums[s].e_d += row.e_d;
        }
        if (!res.est.pipe.moris.empty()) {
            const SearchTrace& trace = res.est.pipe.moris[0].trace;
            for (std::size_t c : opt.checkpoints)
                convergence << res.note << ',' << c << ','
                            << format_double(trace_distance_at(trace, c)) << '\n';
        }
    }
    if (ok == 0) throw Error("every note failed for stop '" + stop + "'");

    for (auto& row : sums) {
        row.h_h /= static_cast<double>(ok);
        row.h_10 /= static_cast<double>(ok);
        row.h_10w /= static_cast<double>(ok);
        row.e_d2 /= static_cast<double>(ok);
        row.e_d1 /= static_cast<double>(ok);
        row.e_d /= static_cast<double>(ok);
    }

    atomic_write_file((fs::path(opt.out) / "per_note.csv").string(), per_note.str());
    atomic_write_file((fs::path(opt.out) / "aggregate.csv").string(), stage_table_csv(sums));
    atomic_write_file((fs::path(opt.out) / "convergence.csv").string(), convergence.str());
    if (ok < outcomes.size())
        atomic_write_file((fs::path(opt.out) / "failures.csv").string(), failures.str());

    std::printf("stop '%s': %zu of %zu notes evaluated, reports in %s\n", stop.c_str(), ok,
                outcomes.size(), opt.out.c_str());
    std::fputs(stage_table_csv(sums).c_str(), stdout);
}

}  // namespace

void register_estimate(CLI::App& app) {
    auto opt = std::make_shared<EstimateOptions>();
    CLI::App* sub = app.add_subcommand("estimate", "Match one target tone");
    sub->add_option("--target", opt->target_wav, "Target WAV file");
    sub->add_option("--manifest", opt->manifest, "Dataset manifest holding the target");
    sub->add_option("--stop", opt->stop, "Stop name inside the manifest");
    sub->add_option("--note", opt->note, "Note number 0-73");
    sub->add_option("--target-duration", opt->target_duration,
                    "Target length in seconds (WAV targets)");
    sub->add_option("--out", opt->out, "Artifact directory (report, traces, WAV, theta)");
    add_match_options(sub, opt->match);
    sub->callback([opt] { run_estimate(*opt); });
}

void register_evaluate(CLI::App& app) {
    auto opt = std::make_shared<EvaluateOptions>();
    CLI::App* sub = app.add_subcommand("evaluate", "Match every note of a stop and aggregate");
    sub->add_option("--manifest", opt->manifest, "Dataset manifest")->required();
    sub->add_option("--stop", opt->stop, "Stop to evaluate (default: first in manifest)");
    sub->add_option("--out", opt->out, "Report directory")->required();
    sub->add_option("--checkpoints", opt->checkpoints, "Convergence sample iterations")
        ->delimiter(',');
    add_match_options(sub, opt->match);
    sub->callback([opt] { run_evaluate(*opt); });
}

}  // namespace pmcli
