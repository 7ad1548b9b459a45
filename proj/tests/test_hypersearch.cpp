#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <doctest.h>

#include <pipematch/hypersearch.hpp>
#include <pipematch/rng.hpp>

using namespace pipematch;

namespace {

SearchSpace tiny_space() {
    SearchSpace s;
    s.layer_counts = {1, 2};
    s.size_exponents = {3, 4};
    s.activations = {Activation::Tanh};
    s.dropout_rates = {0.0};
    s.optimizers = {Optimizer::Adam};
    s.lr_exponents = {-3, -2};
    s.momenta = {0.9};
    s.batch_min = 4;
    s.batch_max = 8;
    s.max_epochs = 25;
    s.patience = 25;
    s.validation_split = 0.15;
    return s;
}

void line_data(std::size_t n, std::vector<std::vector<double>>& x,
               std::vector<std::vector<double>>& y) {
    Rng rng(4);
    x.clear();
    y.clear();
    for (std::size_t i = 0; i < n; ++i) {
        const double a = rng.uniform(-1.0, 1.0);
        x.push_back({a});
        y.push_back({0.7 * a - 0.1});
    }
}

}  // namespace

TEST_SUITE_BEGIN("hypersearch");

TEST_CASE("draws stay inside the space and are seed-deterministic") {
    const SearchSpace space;  // full default ranges
    Rng r1(42), r2(42);
    for (int i = 0; i < 50; ++i) {
        const MlpSpec a = space.draw_spec(r1, 161, 27);
        const MlpSpec b = space.draw_spec(r2, 161, 27);
        CHECK(a.hidden_sizes == b.hidden_sizes);
        CHECK(a.activation == b.activation);
        CHECK(a.dropout_rate == b.dropout_rate);

        CHECK(a.input_dim == 161);
        CHECK(a.output_dim == 27);
        CHECK(std::count(space.layer_counts.begin(), space.layer_counts.end(),
                         a.hidden_sizes.size()) == 1);
        for (std::size_t sz : a.hidden_sizes) {
            const double e = std::log2(double(sz));
            CHECK(e == std::floor(e));
            CHECK(std::count(space.size_exponents.begin(), space.size_exponents.end(),
                             std::size_t(e)) == 1);
        }
        CHECK(std::count(space.dropout_rates.begin(), space.dropout_rates.end(),
                         a.dropout_rate) == 1);

        const TrainConfig ta = space.draw_train(r1);
        const TrainConfig tb = space.draw_train(r2);
        CHECK(ta.learning_rate == tb.learning_rate);
        CHECK(ta.batch_size == tb.batch_size);
        CHECK(ta.optimizer == tb.optimizer);
        const double le = std::log10(ta.learning_rate);
        CHECK(std::abs(le - std::round(le)) < 1e-12);
        CHECK(int(std::round(le)) >= -8);
        CHECK(int(std::round(le)) <= -2);
        CHECK(ta.batch_size >= space.batch_min);
        CHECK(ta.batch_size <= space.batch_max);
        CHECK(std::count(space.momenta.begin(), space.momenta.end(), ta.momentum) == 1);
        CHECK(ta.max_epochs == space.max_epochs);
        CHECK(ta.patience == space.patience);
        CHECK(ta.validation_split == space.validation_split);
    }
    // Different seeds explore different configurations.
    Rng r3(42), r4(43);
    bool differ = false;
    for (int i = 0; i < 10 && !differ; ++i) {
        const MlpSpec a = tiny_space().draw_spec(r3, 2, 1);
        const MlpSpec b = tiny_space().draw_spec(r4, 2, 1);
        differ = a.hidden_sizes != b.hidden_sizes;
    }
    CHECK(differ);
}

TEST_CASE("search ranks trials by validation error") {
    std::vector<std::vector<double>> x, y;
    line_data(40, x, y);
    const auto trials = hyperparameter_search(tiny_space(), x, y, 6, 17);
    REQUIRE(trials.size() == 6);

    std::set<std::size_t> ids;
    for (const auto& t : trials) ids.insert(t.trial);
    CHECK(ids.size() == 6);

    bool seen_failed = false;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        if (trials[i].failed) {
            seen_failed = true;
            CHECK(std::isinf(trials[i].val_mae));
        } else {
            CHECK(!seen_failed);  // failures sort after every success
            CHECK(std::isfinite(trials[i].val_mae));
            CHECK(trials[i].epochs_run >= 1);
            if (i > 0 && !trials[i - 1].failed)
                CHECK(trials[i - 1].val_mae <= trials[i].val_mae);
        }
    }
    // The winner can actually predict: forward dim matches.
    const auto out = trials[0].model.forward(std::vector<double>{0.5});
    CHECK(out.size() == 1);
}

TEST_CASE("worker count does not change results") {
    std::vector<std::vector<double>> x, y;
    line_data(30, x, y);
    const auto a = hyperparameter_search(tiny_space(), x, y, 5, 23, 1);
    const auto b = hyperparameter_search(tiny_space(), x, y, 5, 23, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].trial == b[i].trial);
        CHECK(a[i].val_mae == b[i].val_mae);
        CHECK(a[i].model.to_bytes() == b[i].model.to_bytes());
    }
}

TEST_CASE("search is reproducible from its seed") {
    std::vector<std::vector<double>> x, y;
    line_data(30, x, y);
    const auto a = hyperparameter_search(tiny_space(), x, y, 4, 29);
    const auto b = hyperparameter_search(tiny_space(), x, y, 4, 29);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].val_mae == b[i].val_mae);
        CHECK(a[i].model.to_bytes() == b[i].model.to_bytes());
    }
}

TEST_CASE("trial csv lists every trial in ranked order") {
    std::vector<std::vector<double>> x, y;
    line_data(30, x, y);
    const auto trials = hyperparameter_search(tiny_space(), x, y, 3, 31);
    const std::string csv = trials_to_csv(trials);
    CHECK(csv.rfind("rank,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.find("adam") != std::string::npos);
}

TEST_SUITE_END();
