#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "tensormor/bench.hpp"

namespace tb = tensormor::bench;

int main(int argc, char** argv) {
    // `tensormor run <method> ...` is accepted as an alias of `tensormor <method> ...`
    std::vector<std::string> args(argv + 1, argv + argc);
    if (!args.empty() && args.front() == "run") args.erase(args.begin());
    std::reverse(args.begin(), args.end());

    CLI::App app{"Low-rank approximation and reduced-order modelling experiments"};
    app.require_subcommand(1);

    std::string config;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool verbose = false;
    std::vector<CLI::App*> method_cmds;
    for (const auto& m : tb::methods()) {
        CLI::App* sub = app.add_subcommand(m, "run the " + m + " experiment");
        sub->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides config.output.dir)");
        sub->add_option("--seed", seed, "random seed (overrides config.seed)");
        sub->add_flag("--verbose,-v", verbose, "progress on standard output");
        method_cmds.push_back(sub);
    }

    std::string report_a;
    std::string report_b;
    double factor = 1.1;
    CLI::App* cmp = app.add_subcommand("compare", "per-rank ratios b/a of two CSV reports");
    cmp->add_option("a", report_a, "baseline report")->required();
    cmp->add_option("b", report_b, "candidate report")->required();
    cmp->add_option("--factor", factor, "flag ratios above this value")->check(CLI::PositiveNumber);

    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : tb::kUsage;
    }

    if (cmp->parsed()) return tb::compare(report_a, report_b, factor, std::cout, std::cerr);
    for (CLI::App* sub : method_cmds) {
        if (!sub->parsed()) continue;
        tb::RunOptions ro;
        ro.method = sub->get_name();
        ro.config = config;
        if (sub->count("--out")) ro.out_dir = out_dir;
        if (sub->count("--seed")) ro.seed = seed;
        ro.verbose = verbose;
        return tb::run(ro, std::cout, std::cerr);
    }
    return tb::kUsage;
}
