#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Flue-pipe timbre matching toolkit"};
    app.set_config("--config", "", "INI config file; flags override its values")
        ->envname("PIPEMATCH_CONFIG");
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    pmcli::register_gen_dataset(app);
    pmcli::register_train(app);
    pmcli::register_estimate(app);
    pmcli::register_evaluate(app);
    pmcli::register_render(app);
    pmcli::register_features(app);
    pmcli::register_metrics(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
