// fraclap run <config> | fraclap checks <config> | fraclap --version
#include "fraclap/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace fraclap;
    CLI::App app{"Variational solver for (-Delta)^s u = h(x) f(u) with nonlocal Dirichlet conditions"};
    app.set_version_flag("--version", std::string("fraclap ") + kVersion);
    app.require_subcommand(1);

    std::string config_path, out_dir;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "JSON configuration file")->required();
        sub->add_option("-o,--out", out_dir, "output directory (overrides output_dir)");
    };
    CLI::App* run = app.add_subcommand("run", "check hypotheses, solve, write report.json, solution.csv, plot.dat");
    CLI::App* checks = app.add_subcommand("checks", "check hypotheses only and write report.json");
    add_common(run);
    add_common(checks);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    RunConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "fraclap: " << e.what() << '\n';
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "fraclap: " << e.what() << '\n';
        return kExitConfig;
    }
    if (!out_dir.empty()) cfg.output_dir = out_dir;

    const PipelineResult res = run_pipeline(cfg, checks->parsed());
    try {
        write_outputs(res, cfg.output_dir);
    } catch (const IoError& e) {
        std::cerr << "fraclap: " << e.what() << '\n';
        return kExitNumeric;
    }
    std::cout << "fraclap: exit " << res.exit_code << ": " << res.message << '\n'
              << "fraclap: wrote " << (cfg.output_dir / "report.json").string() << '\n';
    if (res.exit_code != kExitOk) std::cerr << "fraclap: " << res.message << '\n';
    return res.exit_code;
}
