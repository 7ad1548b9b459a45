#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <pipematch/corpus.hpp>
#include <pipematch/errors.hpp>
#include <pipematch/hypersearch.hpp>
#include <pipematch/io.hpp>

#include "commands.hpp"
#include "helpers.hpp"

namespace pmcli {

namespace fs = std::filesystem;
using namespace pipematch;

namespace {

struct TrainOptions {
    std::string manifest;
    std::string out;
    std::size_t trials = 10;
    std::size_t top_k = 4;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string features_out;

    std::size_t n_harmonics = 12;
    std::size_t n_mel = 128;
    std::size_t n_env = 10;

    std::vector<std::size_t> layers;
    std::vector<std::size_t> width_exponents;
    std::vector<std::string> activations;
    std::vector<std::string> optimizers;
    std::vector<int> lr_exponents;
    std::vector<double> dropouts;
    std::vector<double> momenta;
    std::size_t batch_min = 10;
    std::size_t batch_max = 2000;
    std::size_t max_epochs = 4000;
    std::size_t patience = 400;
    double val_split = 0.10;
};

void run_train(const TrainOptions& opt) {
    const DatasetManifest manifest = load_manifest(opt.manifest);
    const std::string base = fs::path(opt.manifest).parent_path().string();

    std::vector<const DatasetItem*> usable;
    for (const auto& item : manifest.items)
        if (item.has_params) usable.push_back(&item);
    if (usable.empty()) throw EmptyDataset("manifest has no items with parameters");
    if (usable.size() < manifest.items.size())
        std::fprintf(stderr, "note: skipping %zu items without parameters\n",
                     manifest.items.size() - usable.size());

    AnalysisConfig acfg =
        AnalysisConfig::defaults_for(manifest.render.sample_rate, manifest.render.duration_s);
    acfg.n_harmonics = opt.n_harmonics;
    acfg.n_mel_bands = opt.n_mel;
    acfg.n_envelopes = opt.n_env;
    acfg.validate();

    std::vector<std::vector<double>> x(usable.size()), y(usable.size());
    parallel_for(usable.size(), opt.workers, [&](std::size_t i) {
        const Tone tone = load_tone(*usable[i], manifest, base);
        x[i] = extract_features(tone, acfg).values;
        const NormalizedParams n = normalize(usable[i]->params);
        y[i].assign(n.values.begin(), n.values.end());
    });
    std::printf("extracted %zu feature rows (%zu dims)\n", x.size(), x[0].size());

    if (!opt.features_out.empty()) {
        std::vector<FeatureVector> rows(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            rows[i].layout = {acfg.n_harmonics, acfg.n_mel_bands, acfg.n_envelopes};
            rows[i].values = x[i];
        }
        atomic_write_file(opt.features_out, features_to_csv(rows));
    }

    SearchSpace space;
    if (!opt.layers.empty()) space.layer_counts = opt.layers;
    if (!opt.width_exponents.empty()) space.size_exponents = opt.width_exponents;
    if (!opt.activations.empty()) {
        space.activations.clear();
        for (const auto& name : opt.activations)
            space.activations.push_back(activation_from_name(name));
    }
    if (!opt.optimizers.empty()) {
        space.optimizers.clear();
        for (const auto& name : opt.optimizers)
            space.optimizers.push_back(optimizer_from_name(name));
    }
    if (!opt.lr_exponents.empty()) space.lr_exponents = opt.lr_exponents;
    if (!opt.dropouts.empty()) space.dropout_rates = opt.dropouts;
    if (!opt.momenta.empty()) space.momenta = opt.momenta;
    space.batch_min = opt.batch_min;
    space.batch_max = opt.batch_max;
    space.max_epochs = opt.max_epochs;
    space.patience = opt.patience;
    space.validation_split = opt.val_split;

    const std::vector<TrialResult> trials =
        hyperparameter_search(space, x, y, opt.trials, opt.seed, opt.workers);

    fs::create_directories(opt.out);
    atomic_write_file((fs::path(opt.out) / "trials.csv").string(), trials_to_csv(trials));
    atomic_write_file((fs::path(opt.out) / "analysis.json").string(), analysis_to_json(acfg));

    std::size_t saved = 0;
    for (const auto& trial : trials) {
        if (trial.failed || saved >= opt.top_k) break;
        char name[32];
        std::snprintf(name, sizeof name, "model_%02zu.pmlp", saved);
        atomic_write_file((fs::path(opt.out) / name).string(), trial.model.to_bytes());
        ++saved;
    }
    if (saved == 0) throw Error("every trial failed; no model saved");

    std::size_t failed = 0;
    for (const auto& trial : trials) failed += trial.failed;
    std::printf("ran %zu trials (%zu failed), saved top %zu models to %s\n", trials.size(),
                failed, saved, opt.out.c_str());
    std::printf("best: val MAE %.6f, %zu epochs\n", trials[0].val_mae, trials[0].epochs_run);
}

}  // namespace

void register_train(CLI::App& app) {
    auto opt = std::make_shared<TrainOptions>();
    CLI::App* sub = app.add_subcommand("train", "Random-search training over a dataset");
    sub->add_option("--manifest", opt->manifest, "Dataset manifest path")->required();
    sub->add_option("--out", opt->out, "Output directory for models and ledger")->required();
    sub->add_option("--trials", opt->trials, "Number of random configurations");
    sub->add_option("--top-k", opt->top_k, "Models to keep, best first");
    sub->add_option("--seed", opt->seed, "Search master seed");
    sub->add_option("--workers", opt->workers, "Parallel trial workers");
    sub->add_option("--features-out", opt->features_out, "Also dump the feature table CSV");
    sub->add_option("--n-harmonics", opt->n_harmonics, "Harmonic feature count");
    sub->add_option("--n-mel", opt->n_mel, "Mel band count");
    sub->add_option("--n-envelopes", opt->n_env, "Envelope band count");
    sub->add_option("--layers", opt->layers, "Hidden layer count choices")->delimiter(',');
    sub->add_option("--width-exponents", opt->width_exponents, "Layer width 2^i choices")
        ->delimiter(',');
    sub->add_option("--activations", opt->activations, "tanh,relu subset")->delimiter(',');
    sub->add_option("--optimizers", opt->optimizers, "sgd,adam,adamax subset")->delimiter(',');
    sub->add_option("--lr-exponents", opt->lr_exponents, "Learning rate 10^i choices")
        ->delimiter(',');
    sub->add_option("--dropouts", opt->dropouts, "Dropout rate choices")->delimiter(',');
    sub->add_option("--momenta", opt->momenta, "SGD momentum choices")->delimiter(',');
    sub->add_option("--batch-min", opt->batch_min, "Minimum batch size");
    sub->add_option("--batch-max", opt->batch_max, "Maximum batch size");
    sub->add_option("--max-epochs", opt->max_epochs, "Epoch cap per trial");
    sub->add_option("--patience", opt->patience, "Early-stopping patience in epochs");
    sub->add_option("--val-split", opt->val_split, "Validation fraction");
    sub->callback([opt] { run_train(*opt); });
}

}  // namespace pmcli
