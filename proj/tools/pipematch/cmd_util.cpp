#include <cstdio>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <pipematch/features.hpp>
#include <pipematch/io.hpp>
#include <pipematch/params.hpp>
#include <pipematch/pipe_model.hpp>
#include <pipematch/wav.hpp>

#include "commands.hpp"
#include "helpers.hpp"

namespace pmcli {

using namespace pipematch;

namespace {

ParamVector load_params(const std::string& path) {
    const std::string text = read_file(path);
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json")
        return params_from_json(text);
    return params_from_text(text);
}

struct RenderOptions {
    std::string params;
    std::string out;
    int note = 36;
    double duration = kDatasetToneSeconds;
    double sample_rate = kDefaultSampleRate;
    std::uint64_t seed = 0;
};

void run_render(const RenderOptions& opt) {
    const ParamVector p = opt.params.empty() ? ParamVector{} : load_params(opt.params);
    const Tone tone = render_tone(p, opt.note, opt.duration, opt.sample_rate, opt.seed);
    write_wav(opt.out, tone.samples, tone.sample_rate);
    std::printf("wrote %zu samples at %g Hz to %s\n", tone.samples.size(), tone.sample_rate,
                opt.out.c_str());
}

struct FeatureOptions {
    std::string target;
    std::string out;
    int note = 36;
    double duration = kDatasetToneSeconds;
    double sample_rate = kDefaultSampleRate;
};

void run_features(const FeatureOptions& opt) {
    const Tone tone = load_target_wav(opt.target, opt.note, opt.sample_rate, opt.duration);
    const AnalysisConfig cfg = AnalysisConfig::defaults_for(opt.sample_rate, opt.duration);
    const FeatureVector fv = extract_features(tone, cfg);
    const std::string csv = features_to_csv({fv});
    if (opt.out.empty())
        std::fputs(csv.c_str(), stdout);
    else
        atomic_write_file(opt.out, csv);
}

struct MetricsOptions {
    std::string a;
    std::string b;
    std::string out;
    int note = 36;
    double duration = kDatasetToneSeconds;
    double sample_rate = kDefaultSampleRate;
};

void run_metrics(const MetricsOptions& opt) {
    const Tone a = load_target_wav(opt.a, opt.note, opt.sample_rate, opt.duration);
    const Tone b = load_target_wav(opt.b, opt.note, opt.sample_rate, opt.duration);
    const AnalysisConfig cfg = AnalysisConfig::defaults_for(opt.sample_rate, opt.duration);
    const StageRow row = stage_row("a_vs_b", a, b, cfg);

    std::ostringstream csv;
    csv << "metric,value\n";
    csv << "H_H," << format_double(row.h_h) << '\n';
    csv << "H_10," << format_double(row.h_10) << '\n';
    csv << "H_10W," << format_double(row.h_10w) << '\n';
    csv << "E_D2," << format_double(row.e_d2) << '\n';
    csv << "E_D1," << format_double(row.e_d1) << '\n';
    csv << "E_D," << format_double(row.e_d) << '\n';
    if (opt.out.empty())
        std::fputs(csv.str().c_str(), stdout);
    else
        atomic_write_file(opt.out, csv.str());
}

}  // namespace

void register_render(CLI::App& app) {
    auto opt = std::make_shared<RenderOptions>();
    CLI::App* sub = app.add_subcommand("render", "Render a parameter file to WAV");
    sub->add_option("--params", opt->params, "theta file (.txt or .json); defaults when absent");
    sub->add_option("--out", opt->out, "Output WAV path")->required();
    sub->add_option("--note", opt->note, "Note number 0-73");
    sub->add_option("--duration", opt->duration, "Seconds");
    sub->add_option("--sample-rate", opt->sample_rate, "Hz");
    sub->add_option("--seed", opt->seed, "Noise seed");
    sub->callback([opt] { run_render(*opt); });
}

void register_features(CLI::App& app) {
    auto opt = std::make_shared<FeatureOptions>();
    CLI::App* sub = app.add_subcommand("features", "Extract the feature row of a WAV");
    sub->add_option("--target", opt->target, "Input WAV")->required();
    sub->add_option("--out", opt->out, "Output CSV (stdout when omitted)");
    sub->add_option("--note", opt->note, "Note number 0-73")->required();
    sub->add_option("--duration", opt->duration, "Analysis length in seconds");
    sub->add_option("--sample-rate", opt->sample_rate, "Hz");
    sub->callback([opt] { run_features(*opt); });
}

void register_metrics(CLI::App& app) {
    auto opt = std::make_shared<MetricsOptions>();
    CLI::App* sub = app.add_subcommand("metrics", "Acoustic distances between two WAVs");
    sub->add_option("--a", opt->a, "First WAV (reference)")->required();
    sub->add_option("--b", opt->b, "Second WAV (candidate)")->required();
    sub->add_option("--out", opt->out, "Output CSV (stdout when omitted)");
    sub->add_option("--note", opt->note, "Shared note number 0-73")->required();
    sub->add_option("--duration", opt->duration, "Analysis length in seconds");
    sub->add_option("--sample-rate", opt->sample_rate, "Hz");
    sub->callback([opt] { run_metrics(*opt); });
}

}  // namespace pmcli
