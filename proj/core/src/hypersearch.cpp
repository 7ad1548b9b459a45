#include "pipematch/hypersearch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pipematch/errors.hpp"
#include "pipematch/io.hpp"

namespace pipematch {

namespace {

template <typename T>
const T& pick(const std::vector<T>& options, Rng& rng) {
    if (options.empty()) throw FormatError("empty hyperparameter range");
    return options[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(options.size()) - 1))];
}

}  // namespace

MlpSpec SearchSpace::draw_spec(Rng& rng, std::size_t input_dim, std::size_t output_dim) const {
    MlpSpec spec;
    spec.input_dim = input_dim;
    spec.output_dim = output_dim;
    const std::size_t n_layers = pick(layer_counts, rng);
    spec.hidden_sizes.reserve(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l)
        spec.hidden_sizes.push_back(std::size_t{1} << pick(size_exponents, rng));
    spec.activation = pick(activations, rng);
    spec.dropout_rate = pick(dropout_rates, rng);
    return spec;
}

TrainConfig SearchSpace::draw_train(Rng& rng) const {
    TrainConfig cfg;
    cfg.optimizer = pick(optimizers, rng);
    cfg.learning_rate = std::pow(10.0, pick(lr_exponents, rng));
    cfg.momentum = pick(momenta, rng);
    cfg.batch_size = static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(batch_min), static_cast<int>(batch_max)));
    cfg.max_epochs = max_epochs;
    cfg.patience = patience;
    cfg.validation_split = validation_split;
    return cfg;
}

std::vector<TrialResult> hyperparameter_search(const SearchSpace& space,
                                               const std::vector<std::vector<double>>& x,
                                               const std::vector<std::vector<double>>& y,
                                               std::size_t n_trials, std::uint64_t seed,
                                               int workers) {
    if (n_trials < 1) throw FormatError("hyperparameter search needs n_trials >= 1");
    if (x.empty() || x.size() != y.size()) throw DimensionMismatch("bad dataset shape");

    std::vector<TrialResult> trials(n_trials);
    parallel_for(n_trials, workers, [&](std::size_t t) {
        TrialResult& out = trials[t];
        out.trial = t;
        Rng trial_rng(mix_seed(seed, t));
        out.spec = space.draw_spec(trial_rng, x[0].size(), y[0].size());
        out.train_cfg = space.draw_train(trial_rng);
        out.train_cfg.seed = trial_rng.next_u64();
        try {
            TrainResult res = train(out.spec, x, y, out.train_cfg);
            std::vector<std::vector<double>> vx, vy;
            for (std::size_t i : res.val_indices) {
                vx.push_back(x[i]);
                vy.push_back(y[i]);
            }
            out.val_mae = res.model.mean_absolute_error(vx, vy);
            out.best_epoch = res.best_epoch;
            out.epochs_run = res.epochs_run;
            out.model = std::move(res.model);
            if (!std::isfinite(out.val_mae)) {
                out.failed = true;
                out.error = "non-finite validation MAE";
                out.val_mae = std::numeric_limits<double>::infinity();
            }
        } catch (const Error& e) {
            out.failed = true;
            out.error = e.what();
            out.val_mae = std::numeric_limits<double>::infinity();
        }
    });

    std::stable_sort(trials.begin(), trials.end(), [](const TrialResult& a, const TrialResult& b) {
        if (a.failed != b.failed) return !a.failed;
        return a.val_mae < b.val_mae;
    });
    return trials;
}

std::string trials_to_csv(const std::vector<TrialResult>& trials) {
    std::ostringstream os;
    os << "rank,trial,layers,sizes,activation,dropout,optimizer,learning_rate,momentum,"
          "batch_size,epochs_run,best_epoch,val_mae,failed,error\n";
    for (std::size_t r = 0; r < trials.size(); ++r) {
        const TrialResult& t = trials[r];
        std::string sizes;
        for (std::size_t i = 0; i < t.spec.hidden_sizes.size(); ++i) {
            if (i) sizes += 'x';
            sizes += std::to_string(t.spec.hidden_sizes[i]);
        }
        std::vector<std::string> row = {
            std::to_string(r + 1),
            std::to_string(t.trial),
            std::to_string(t.spec.hidden_sizes.size()),
            sizes,
            activation_name(t.spec.activation),
            std::to_string(t.spec.dropout_rate),
            optimizer_name(t.train_cfg.optimizer),
            std::to_string(t.train_cfg.learning_rate),
            std::to_string(t.train_cfg.momentum),
            std::to_string(t.train_cfg.batch_size),
            std::to_string(t.epochs_run),
            std::to_string(t.best_epoch),
            std::to_string(t.val_mae),
            t.failed ? "1" : "0",
            t.error};
        os << csv_join(row) << "\n";
    }
    return os.str();
}

}  // namespace pipematch
