#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pipematch/mlp.hpp"

namespace pipematch {

// Random-search ranges for architecture and training hyperparameters.
// Defaults cover 2-12 fully connected layers of size 2^i (5 <= i <= 12),
// tanh/relu, sgd/adam/adamax, learning rate 10^i (-8 <= i <= -2), momentum
// {0.8, 0.9} and batch sizes 10-2000.
struct SearchSpace {
    std::vector<std::size_t> layer_counts = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    std::vector<std::size_t> size_exponents = {5, 6, 7, 8, 9, 10, 11, 12};
    std::vector<Activation> activations = {Activation::Tanh, Activation::Relu};
    std::vector<double> dropout_rates = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<Optimizer> optimizers = {Optimizer::SgdMomentum, Optimizer::Adam,
                                         Optimizer::Adamax};
    std::vector<int> lr_exponents = {-8, -7, -6, -5, -4, -3, -2};
    std::vector<double> momenta = {0.8, 0.9};
    std::size_t batch_min = 10;
    std::size_t batch_max = 2000;
    std::size_t max_epochs = 4000;
    std::size_t patience = 400;
    double validation_split = 0.10;

    // Draw order is part of the determinism contract: layer count, one size
    // exponent per layer, activation, dropout, optimizer, learning-rate
    // exponent, momentum, batch size.
    MlpSpec draw_spec(Rng& rng, std::size_t input_dim, std::size_t output_dim) const;
    TrainConfig draw_train(Rng& rng) const;
};

struct TrialResult {
    std::size_t trial = 0;
    MlpSpec spec;
    TrainConfig train_cfg;
    bool failed = false;
    std::string error;
    double val_mae = 0.0;  // +inf when failed
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    Mlp model;
};

// Trains n_trials independently seeded random configurations and returns them
// ranked by validation MAE (non-decreasing, failed trials last). Trials are
// independent; `workers` > 1 trains them concurrently with identical results.
std::vector<TrialResult> hyperparameter_search(const SearchSpace& space,
                                               const std::vector<std::vector<double>>& x,
                                               const std::vector<std::vector<double>>& y,
                                               std::size_t n_trials, std::uint64_t seed,
                                               int workers = 1);

// Trial ledger as CSV (one row per trial, ranked order).
std::string trials_to_csv(const std::vector<TrialResult>& trials);

}  // namespace pipematch
