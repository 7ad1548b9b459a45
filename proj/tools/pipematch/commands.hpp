#pragma once

namespace CLI {
class App;
}

namespace pmcli {

void register_gen_dataset(CLI::App& app);
void register_train(CLI::App& app);
void register_estimate(CLI::App& app);
void register_evaluate(CLI::App& app);
void register_render(CLI::App& app);
void register_features(CLI::App& app);
void register_metrics(CLI::App& app);

}  // namespace pmcli
