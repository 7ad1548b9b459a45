#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pipematch/rng.hpp"

namespace pipematch {

enum class Activation { Tanh, Relu };
enum class Optimizer { SgdMomentum, Adam, Adamax };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);
std::string optimizer_name(Optimizer o);
Optimizer optimizer_from_name(const std::string& name);

// Architecture of a fully connected regression network. Hidden layers use
// `activation`; the output layer is always linear.
struct MlpSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::vector<std::size_t> hidden_sizes;
    Activation activation = Activation::Tanh;
    double dropout_rate = 0.0;

    void validate() const;
};

struct TrainConfig {
    Optimizer optimizer = Optimizer::Adam;
    double learning_rate = 1e-3;
    double momentum = 0.9;  // SGD only
    std::size_t batch_size = 32;
    std::size_t max_epochs = 4000;
    std::size_t patience = 400;
    double validation_split = 0.10;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct Gradients {
    std::vector<std::vector<double>> weights;  // per layer, row-major [out][in]
    std::vector<std::vector<double>> biases;
};

class Mlp {
public:
    Mlp() = default;
    explicit Mlp(MlpSpec spec);  // all parameters zero

    // Glorot-uniform initialization (sqrt(2)-scaled fan bound for relu).
    static Mlp random_init(MlpSpec spec, Rng& rng);

    const MlpSpec& spec() const { return spec_; }
    std::size_t n_layers() const { return weights_.size(); }
    std::vector<double>& weights(std::size_t layer) { return weights_[layer]; }
    std::vector<double>& biases(std::size_t layer) { return biases_[layer]; }
    const std::vector<double>& weights(std::size_t layer) const { return weights_[layer]; }
    const std::vector<double>& biases(std::size_t layer) const { return biases_[layer]; }
    std::size_t layer_inputs(std::size_t layer) const;
    std::size_t layer_outputs(std::size_t layer) const;

    // Optional input z-score standardization applied before the first layer;
    // identity until fitted (train fits it on the training split).
    void set_standardization(std::vector<double> mean, std::vector<double> stddev);
    bool standardized() const { return !mean_.empty(); }

    // Inference pass. With training=true, inverted dropout is applied to the
    // hidden activations and `rng` must be non-null when dropout_rate > 0.
    std::vector<double> forward(std::span<const double> x) const;
    std::vector<double> forward(std::span<const double> x, bool training, Rng* rng) const;

    // Mean squared error over the batch plus parameter gradients (shapes
    // mirror the layers). Dropout masks are drawn from `dropout_rng` when the
    // spec has dropout and training gradients are requested.
    double loss_and_gradients(const std::vector<std::vector<double>>& x,
                              const std::vector<std::vector<double>>& y, Gradients& grads,
                              Rng* dropout_rng = nullptr) const;

    double mean_squared_error(const std::vector<std::vector<double>>& x,
                              const std::vector<std::vector<double>>& y) const;
    double mean_absolute_error(const std::vector<std::vector<double>>& x,
                               const std::vector<std::vector<double>>& y) const;

    const std::vector<EpochStats>& history() const { return history_; }
    void set_history(std::vector<EpochStats> h) { history_ = std::move(h); }

    std::string to_bytes() const;
    static Mlp from_bytes(const std::string& blob);
    std::string to_json() const;

private:
    friend struct MlpTrainer;
    MlpSpec spec_;
    std::vector<std::vector<double>> weights_;  // layer l: [out x in] row-major
    std::vector<std::vector<double>> biases_;
    std::vector<double> mean_, std_;
    std::vector<EpochStats> history_;
};

struct TrainResult {
    Mlp model;                             // parameters from the best-validation epoch
    std::vector<EpochStats> history;
    std::vector<std::size_t> val_indices;  // rows held out for validation
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
};

// Trains from scratch: splits off the validation rows, fits input
// standardization on the training split, runs minibatch gradient descent with
// early stopping, and returns the best-validation-epoch snapshot. Fully
// reproducible from cfg.seed.
TrainResult train(const MlpSpec& spec, const std::vector<std::vector<double>>& x,
                  const std::vector<std::vector<double>>& y, const TrainConfig& cfg);

std::string history_to_csv(const std::vector<EpochStats>& history);

}  // namespace pipematch
