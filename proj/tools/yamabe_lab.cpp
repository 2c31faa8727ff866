#include "yamabe/lab.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"yamabe_lab: verification runs for the perturbed Yamabe blow-up construction"};
    app.require_subcommand(1);

    yamabe::lab::RunOptions opt;
    std::string config, out;
    std::uint64_t seed = 0;
    for (const char* name : {"verify", "expand", "rates", "blowup"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "experiment configuration (JSON)")->required();
        sub->add_option("--out", out, "output directory; overrides output_dir");
        sub->add_option("--seed", seed, "seed for randomized oracles; overrides the config");
        sub->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
    }
    CLI11_PARSE(app, argc, argv);

    auto* sub = app.get_subcommands().front();
    opt.config = config;
    if (!out.empty()) opt.out = out;
    if (sub->count("--seed")) opt.seed = seed;
    return yamabe::lab::run(sub->get_name(), opt, std::cerr);
}
