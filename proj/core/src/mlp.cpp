#include "pipematch/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pipematch/errors.hpp"
#include "pipematch/io.hpp"

namespace pipematch {

namespace {

double activate(Activation a, double z) {
    return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

double activate_deriv(Activation a, double z) {
    if (a == Activation::Tanh) {
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }
    return z > 0.0 ? 1.0 : 0.0;
}

}  // namespace

std::string activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_name(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw FormatError("unknown activation '" + name + "'");
}

std::string optimizer_name(Optimizer o) {
    switch (o) {
        case Optimizer::SgdMomentum: return "sgd";
        case Optimizer::Adam: return "adam";
        case Optimizer::Adamax: return "adamax";
    }
    return "?";
}

Optimizer optimizer_from_name(const std::string& name) {
    if (name == "sgd") return Optimizer::SgdMomentum;
    if (name == "adam") return Optimizer::Adam;
    if (name == "adamax") return Optimizer::Adamax;
    throw FormatError("unknown optimizer '" + name + "'");
}

void MlpSpec::validate() const {
    if (input_dim == 0 || output_dim == 0) throw DimensionMismatch("zero network dimension");
    for (std::size_t s : hidden_sizes)
        if (s == 0) throw DimensionMismatch("zero hidden layer size");
    if (!(dropout_rate >= 0.0 && dropout_rate <= 0.5))
        throw FormatError("dropout_rate must be in [0, 0.5]");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw FormatError("learning_rate must be positive");
    if (batch_size == 0) throw FormatError("batch_size must be >= 1");
    if (max_epochs == 0) throw FormatError("max_epochs must be >= 1");
    // patience >= max_epochs is allowed: early stopping simply never fires
    if (patience == 0) throw FormatError("patience must be >= 1");
    if (!(validation_split > 0.0 && validation_split < 1.0))
        throw FormatError("validation_split must be in (0, 1)");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw FormatError("momentum must be in [0, 1)");
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    std::vector<std::size_t> sizes;
    sizes.push_back(spec_.input_dim);
    for (std::size_t s : spec_.hidden_sizes) sizes.push_back(s);
    sizes.push_back(spec_.output_dim);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        weights_.emplace_back(sizes[l + 1] * sizes[l], 0.0);
        biases_.emplace_back(sizes[l + 1], 0.0);
    }
}

Mlp Mlp::random_init(MlpSpec spec, Rng& rng) {
    Mlp mlp(std::move(spec));
    const double gain = mlp.spec_.activation == Activation::Relu ? std::sqrt(2.0) : 1.0;
    for (std::size_t l = 0; l < mlp.n_layers(); ++l) {
        const double fan_in = static_cast<double>(mlp.layer_inputs(l));
        const double fan_out = static_cast<double>(mlp.layer_outputs(l));
        const double bound = gain * std::sqrt(6.0 / (fan_in + fan_out));
        for (double& w : mlp.weights_[l]) w = rng.uniform(-bound, bound);
    }
    return mlp;
}

std::size_t Mlp::layer_inputs(std::size_t layer) const {
    return weights_[layer].size() / biases_[layer].size();
}

std::size_t Mlp::layer_outputs(std::size_t layer) const { return biases_[layer].size(); }

void Mlp::set_standardization(std::vector<double> mean, std::vector<double> stddev) {
    if (mean.size() != spec_.input_dim || stddev.size() != spec_.input_dim)
        throw DimensionMismatch("standardization size must equal input_dim");
    mean_ = std::move(mean);
    std_ = std::move(stddev);
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
    return forward(x, false, nullptr);
}

std::vector<double> Mlp::forward(std::span<const double> x, bool training, Rng* rng) const {
    if (x.size() != spec_.input_dim)
        throw DimensionMismatch("input length " + std::to_string(x.size()) + ", expected " +
                                std::to_string(spec_.input_dim));
    std::vector<double> a(x.begin(), x.end());
    if (standardized())
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = (a[i] - mean_[i]) / std_[i];

    const bool dropout = training && spec_.dropout_rate > 0.0;
    if (dropout && rng == nullptr) throw Error("training forward with dropout needs an rng");
    const double keep = 1.0 - spec_.dropout_rate;

    std::vector<double> z;
    for (std::size_t l = 0; l < n_layers(); ++l) {
        const std::size_t in = layer_inputs(l), out = layer_outputs(l);
        z.assign(out, 0.0);
        const double* w = weights_[l].data();
        for (std::size_t o = 0; o < out; ++o) {
            double acc = biases_[l][o];
            const double* row = w + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += row[i] * a[i];
            z[o] = acc;
        }
        if (l + 1 == n_layers()) return z;  // linear output layer
        a.resize(out);
        for (std::size_t o = 0; o < out; ++o) a[o] = activate(spec_.activation, z[o]);
        if (dropout)
            for (double& v : a) v = rng->uniform() < spec_.dropout_rate ? 0.0 : v / keep;
    }
    return a;  // degenerate zero-layer network
}

double Mlp::loss_and_gradients(const std::vector<std::vector<double>>& x,
                               const std::vector<std::vector<double>>& y, Gradients& grads,
                               Rng* dropout_rng) const {
    if (x.empty() || x.size() != y.size()) throw DimensionMismatch("bad batch shape");
    const std::size_t n = x.size();
    const std::size_t d_out = spec_.output_dim;

    grads.weights.resize(n_layers());
    grads.biases.resize(n_layers());
    for (std::size_t l = 0; l < n_layers(); ++l) {
        grads.weights[l].assign(weights_[l].size(), 0.0);
        grads.biases[l].assign(biases_[l].size(), 0.0);
    }

    const bool dropout = spec_.dropout_rate > 0.0 && dropout_rng != nullptr;
    const double keep = 1.0 - spec_.dropout_rate;
    const double scale = 2.0 / (static_cast<double>(n) * static_cast<double>(d_out));

    double sq_sum = 0.0;
    std::vector<std::vector<double>> acts(n_layers() + 1);  // post-activation values
    std::vector<std::vector<double>> zs(n_layers());
    std::vector<std::vector<double>> masks(n_layers());
    std::vector<double> delta, delta_prev;

    for (std::size_t s = 0; s < n; ++s) {
        if (x[s].size() != spec_.input_dim || y[s].size() != d_out)
            throw DimensionMismatch("batch row " + std::to_string(s) + " has wrong shape");

        acts[0].assign(x[s].begin(), x[s].end());
        if (standardized())
            for (std::size_t i = 0; i < acts[0].size(); ++i)
                acts[0][i] = (acts[0][i] - mean_[i]) / std_[i];

        for (std::size_t l = 0; l < n_layers(); ++l) {
            const std::size_t in = layer_inputs(l), out = layer_outputs(l);
            zs[l].assign(out, 0.0);
            const double* w = weights_[l].data();
            const std::vector<double>& prev = acts[l];
            for (std::size_t o = 0; o < out; ++o) {
                double acc = biases_[l][o];
                const double* row = w + o * in;
                for (std::size_t i = 0; i < in; ++i) acc += row[i] * prev[i];
                zs[l][o] = acc;
            }
            acts[l + 1].resize(out);
            if (l + 1 == n_layers()) {
                acts[l + 1] = zs[l];
            } else {
                for (std::size_t o = 0; o < out; ++o)
                    acts[l + 1][o] = activate(spec_.activation, zs[l][o]);
                if (dropout) {
                    masks[l].resize(out);
                    for (std::size_t o = 0; o < out; ++o) {
                        masks[l][o] = dropout_rng->uniform() < spec_.dropout_rate ? 0.0 : 1.0 / keep;
                        acts[l + 1][o] *= masks[l][o];
                    }
                }
            }
        }

        const std::vector<double>& yhat = acts[n_layers()];
        delta.assign(d_out, 0.0);
        for (std::size_t o = 0; o < d_out; ++o) {
            const double e = yhat[o] - y[s][o];
            sq_sum += e * e;
            delta[o] = scale * e;
        }

        for (std::size_t l = n_layers(); l-- > 0;) {
            const std::size_t in = layer_inputs(l), out = layer_outputs(l);
            const std::vector<double>& prev = acts[l];
            double* gw = grads.weights[l].data();
            for (std::size_t o = 0; o < out; ++o) {
                const double d = delta[o];
                grads.biases[l][o] += d;
                double* row = gw + o * in;
                for (std::size_t i = 0; i < in; ++i) row[i] += d * prev[i];
            }
            if (l == 0) break;
            delta_prev.assign(in, 0.0);
            const double* w = weights_[l].data();
            for (std::size_t o = 0; o < out; ++o) {
                const double d = delta[o];
                const double* row = w + o * in;
                for (std::size_t i = 0; i < in; ++i) delta_prev[i] += d * row[i];
            }
            for (std::size_t i = 0; i < in; ++i) {
                double g = activate_deriv(spec_.activation, zs[l - 1][i]);
                if (dropout && !masks[l - 1].empty()) g *= masks[l - 1][i];
                delta_prev[i] *= g;
            }
            delta.swap(delta_prev);
        }
    }

    const double mse = sq_sum / (static_cast<double>(n) * static_cast<double>(d_out));
    if (!std::isfinite(mse)) throw NonFiniteLoss();
    return mse;
}

double Mlp::mean_squared_error(const std::vector<std::vector<double>>& x,
                               const std::vector<std::vector<double>>& y) const {
    if (x.empty() || x.size() != y.size()) throw DimensionMismatch("bad batch shape");
    double acc = 0.0;
    for (std::size_t s = 0; s < x.size(); ++s) {
        if (y[s].size() != spec_.output_dim)
            throw DimensionMismatch("target row length " + std::to_string(y[s].size()) +
                                    ", expected " + std::to_string(spec_.output_dim));
        const auto yhat = forward(x[s]);
        for (std::size_t o = 0; o < yhat.size(); ++o) {
            const double e = yhat[o] - y[s][o];
            acc += e * e;
        }
    }
    return acc / (static_cast<double>(x.size()) * static_cast<double>(spec_.output_dim));
}

double Mlp::mean_absolute_error(const std::vector<std::vector<double>>& x,
                                const std::vector<std::vector<double>>& y) const {
    if (x.empty() || x.size() != y.size()) throw DimensionMismatch("bad batch shape");
    double acc = 0.0;
    for (std::size_t s = 0; s < x.size(); ++s) {
        if (y[s].size() != spec_.output_dim)
            throw DimensionMismatch("target row length " + std::to_string(y[s].size()) +
                                    ", expected " + std::to_string(spec_.output_dim));
        const auto yhat = forward(x[s]);
        for (std::size_t o = 0; o < yhat.size(); ++o) acc += std::abs(yhat[o] - y[s][o]);
    }
    return acc / (static_cast<double>(x.size()) * static_cast<double>(spec_.output_dim));
}

// --- training ---

namespace {

struct OptimizerState {
    std::vector<std::vector<double>> a, b;  // velocity / first moment, second moment
    std::size_t step = 0;
};

void apply_update(Mlp& mlp, const Gradients& grads, const TrainConfig& cfg, OptimizerState& st) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    ++st.step;
    const auto t = static_cast<double>(st.step);
    for (std::size_t l = 0; l < mlp.n_layers(); ++l) {
        // weights then biases share one state slot per layer pair
        for (int part = 0; part < 2; ++part) {
            auto& params = part == 0 ? mlp.weights(l) : mlp.biases(l);
            const auto& g = part == 0 ? grads.weights[l] : grads.biases[l];
            auto& m = st.a[2 * l + part];
            auto& v = st.b[2 * l + part];
            switch (cfg.optimizer) {
                case Optimizer::SgdMomentum:
                    for (std::size_t i = 0; i < params.size(); ++i) {
                        m[i] = cfg.momentum * m[i] - cfg.learning_rate * g[i];
                        params[i] += m[i];
                    }
                    break;
                case Optimizer::Adam: {
                    const double bc1 = 1.0 - std::pow(kBeta1, t);
                    const double bc2 = 1.0 - std::pow(kBeta2, t);
                    for (std::size_t i = 0; i < params.size(); ++i) {
                        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
                        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
                        params[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
                    }
                    break;
                }
                case Optimizer::Adamax: {
                    const double bc1 = 1.0 - std::pow(kBeta1, t);
                    for (std::size_t i = 0; i < params.size(); ++i) {
                        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
                        v[i] = std::max(kBeta2 * v[i], std::abs(g[i]));
                        params[i] -= cfg.learning_rate * m[i] / (bc1 * (v[i] + kEps));
                    }
                    break;
                }
            }
        }
    }
}

}  // namespace

TrainResult train(const MlpSpec& spec, const std::vector<std::vector<double>>& x,
                  const std::vector<std::vector<double>>& y, const TrainConfig& cfg) {
    spec.validate();
    cfg.validate();
    if (x.size() != y.size()) throw DimensionMismatch("feature/target row counts differ");
    if (x.size() < 10)
        throw DatasetTooSmall("training needs at least 10 items, got " + std::to_string(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i].size() != spec.input_dim || y[i].size() != spec.output_dim)
            throw DimensionMismatch("dataset row " + std::to_string(i) + " has wrong shape");

    Rng rng(cfg.seed);
    Rng split_rng = rng.substream(0);
    Rng init_rng = rng.substream(1);
    Rng dropout_rng = rng.substream(2);
    Rng batch_rng = rng.substream(3);

    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[split_rng.uniform_int(0, static_cast<int>(i))]);
    const std::size_t n_val =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.validation_split * n)));
    if (n_val >= n) throw DatasetTooSmall("validation split leaves no training rows");

    TrainResult result;
    result.val_indices.assign(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

    std::vector<std::vector<double>> val_x, val_y;
    for (std::size_t i : result.val_indices) {
        val_x.push_back(x[i]);
        val_y.push_back(y[i]);
    }

    Mlp mlp = Mlp::random_init(spec, init_rng);
    {
        // z-score standardization fitted on the training split
        std::vector<double> mean(spec.input_dim, 0.0), sd(spec.input_dim, 0.0);
        for (std::size_t i : train_idx)
            for (std::size_t k = 0; k < spec.input_dim; ++k) mean[k] += x[i][k];
        for (double& m : mean) m /= static_cast<double>(train_idx.size());
        for (std::size_t i : train_idx)
            for (std::size_t k = 0; k < spec.input_dim; ++k) {
                const double d = x[i][k] - mean[k];
                sd[k] += d * d;
            }
        for (double& s : sd) {
            s = std::sqrt(s / static_cast<double>(train_idx.size()));
            if (s < 1e-8) s = 1.0;  // constant feature
        }
        mlp.set_standardization(std::move(mean), std::move(sd));
    }

    OptimizerState st;
    st.a.resize(2 * mlp.n_layers());
    st.b.resize(2 * mlp.n_layers());
    for (std::size_t l = 0; l < mlp.n_layers(); ++l) {
        st.a[2 * l].assign(mlp.weights(l).size(), 0.0);
        st.b[2 * l].assign(mlp.weights(l).size(), 0.0);
        st.a[2 * l + 1].assign(mlp.biases(l).size(), 0.0);
        st.b[2 * l + 1].assign(mlp.biases(l).size(), 0.0);
    }

    Mlp best = mlp;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0, since_best = 0;
    Gradients grads;
    std::vector<std::vector<double>> bx, by;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        for (std::size_t i = train_idx.size() - 1; i > 0; --i)
            std::swap(train_idx[i], train_idx[batch_rng.uniform_int(0, static_cast<int>(i))]);

        double train_sq = 0.0;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, train_idx.size());
            bx.clear();
            by.clear();
            for (std::size_t i = start; i < stop; ++i) {
                bx.push_back(x[train_idx[i]]);
                by.push_back(y[train_idx[i]]);
            }
            double mse;
            try {
                mse = mlp.loss_and_gradients(bx, by, grads,
                                             spec.dropout_rate > 0.0 ? &dropout_rng : nullptr);
            } catch (const NonFiniteLoss&) {
                throw NonFiniteLoss(static_cast<int>(epoch));
            }
            train_sq += mse * static_cast<double>(stop - start);
            apply_update(mlp, grads, cfg, st);
        }

        const double train_mse = train_sq / static_cast<double>(train_idx.size());
        const double val_mse = mlp.mean_squared_error(val_x, val_y);
        if (!std::isfinite(train_mse) || !std::isfinite(val_mse))
            throw NonFiniteLoss(static_cast<int>(epoch));
        result.history.push_back({train_mse, val_mse});
        result.epochs_run = epoch + 1;

        if (val_mse < best_val) {
            best_val = val_mse;
            best = mlp;
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    result.best_epoch = best_epoch;
    best.set_history(result.history);
    result.model = std::move(best);
    return result;
}

std::string history_to_csv(const std::vector<EpochStats>& history) {
    std::ostringstream os;
    os << "epoch,train_mse,val_mse\n";
    char buf[96];
    for (std::size_t e = 0; e < history.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e, history[e].train_mse,
                      history[e].val_mse);
        os << buf;
    }
    return os.str();
}

// --- serialization ---

std::string Mlp::to_bytes() const {
    std::string out = "PMLP";
    append_raw<std::uint32_t>(out, 1);  // version
    append_raw<std::uint8_t>(out, spec_.activation == Activation::Tanh ? 0 : 1);
    append_raw<double>(out, spec_.dropout_rate);
    append_raw<std::uint32_t>(out, static_cast<std::uint32_t>(spec_.input_dim));
    append_raw<std::uint32_t>(out, static_cast<std::uint32_t>(spec_.output_dim));
    append_raw<std::uint32_t>(out, static_cast<std::uint32_t>(spec_.hidden_sizes.size()));
    for (std::size_t s : spec_.hidden_sizes)
        append_raw<std::uint32_t>(out, static_cast<std::uint32_t>(s));
    append_raw<std::uint8_t>(out, standardized() ? 1 : 0);
    if (standardized()) {
        for (double v : mean_) append_raw<double>(out, v);
        for (double v : std_) append_raw<double>(out, v);
    }
    for (std::size_t l = 0; l < n_layers(); ++l) {
        for (double v : weights_[l]) append_raw<double>(out, v);
        for (double v : biases_[l]) append_raw<double>(out, v);
    }
    append_raw<std::uint32_t>(out, static_cast<std::uint32_t>(history_.size()));
    for (const auto& h : history_) {
        append_raw<double>(out, h.train_mse);
        append_raw<double>(out, h.val_mse);
    }
    return out;
}

Mlp Mlp::from_bytes(const std::string& blob) {
    if (blob.size() < 4 || blob.compare(0, 4, "PMLP") != 0)
        throw FormatError("not a model file");
    std::size_t pos = 4;
    const auto version = read_raw<std::uint32_t>(blob, pos);
    if (version != 1) throw FormatError("unsupported model file version");
    MlpSpec spec;
    spec.activation = read_raw<std::uint8_t>(blob, pos) == 0 ? Activation::Tanh : Activation::Relu;
    spec.dropout_rate = read_raw<double>(blob, pos);
    spec.input_dim = read_raw<std::uint32_t>(blob, pos);
    spec.output_dim = read_raw<std::uint32_t>(blob, pos);
    const auto n_hidden = read_raw<std::uint32_t>(blob, pos);
    for (std::uint32_t i = 0; i < n_hidden; ++i)
        spec.hidden_sizes.push_back(read_raw<std::uint32_t>(blob, pos));
    Mlp mlp(spec);
    if (read_raw<std::uint8_t>(blob, pos) != 0) {
        std::vector<double> mean(spec.input_dim), sd(spec.input_dim);
        for (double& v : mean) v = read_raw<double>(blob, pos);
        for (double& v : sd) v = read_raw<double>(blob, pos);
        mlp.set_standardization(std::move(mean), std::move(sd));
    }
    for (std::size_t l = 0; l < mlp.n_layers(); ++l) {
        for (double& v : mlp.weights_[l]) v = read_raw<double>(blob, pos);
        for (double& v : mlp.biases_[l]) v = read_raw<double>(blob, pos);
    }
    const auto n_hist = read_raw<std::uint32_t>(blob, pos);
    mlp.history_.resize(n_hist);
    for (auto& h : mlp.history_) {
        h.train_mse = read_raw<double>(blob, pos);
        h.val_mse = read_raw<double>(blob, pos);
    }
    if (pos != blob.size()) throw FormatError("trailing bytes in model file");
    return mlp;
}

std::string Mlp::to_json() const {
    nlohmann::ordered_json j;
    j["activation"] = activation_name(spec_.activation);
    j["dropout_rate"] = spec_.dropout_rate;
    j["input_dim"] = spec_.input_dim;
    j["output_dim"] = spec_.output_dim;
    j["hidden_sizes"] = spec_.hidden_sizes;
    if (standardized()) {
        j["standardization"]["mean"] = mean_;
        j["standardization"]["std"] = std_;
    } else {
        j["standardization"] = nullptr;
    }
    auto& layers = j["layers"];
    layers = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < n_layers(); ++l) {
        nlohmann::ordered_json layer;
        layer["inputs"] = layer_inputs(l);
        layer["outputs"] = layer_outputs(l);
        layer["weights"] = weights_[l];
        layer["biases"] = biases_[l];
        layers.push_back(std::move(layer));
    }
    j["epochs_trained"] = history_.size();
    return j.dump(2);
}

}  // namespace pipematch
