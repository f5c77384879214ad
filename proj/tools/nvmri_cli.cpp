#include <iostream>

#include "CLI11.hpp"
#include "nvmri/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"nvmri: spiral spin-texture simulation, exchange analytics and Fourier magnetic imaging"};
    app.require_subcommand(1);

    nvmri::Invocation inv;
    std::uint64_t seed = 0;
    int workers = 1;

    auto common = [&](CLI::App* sub, bool needsConfig) {
        auto* c = sub->add_option("--config", inv.configPath, "run config (JSON)");
        if (needsConfig) c->check(CLI::ExistingFile);
        sub->add_option("--out", inv.outDir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "override the master seed");
        sub->add_option("--workers", workers, "override the worker count");
        sub->add_flag("--verify", inv.verify, "recompute and compare against the stored manifest");
    };

    auto* quench = app.add_subcommand("simulate-quench", "wind, quench and read out antipodal spirals");
    common(quench, true);
    auto* scan = app.add_subcommand("scan", "anisotropy, wavevector or wind-unwind scans");
    common(scan, true);
    scan->add_option("--type", inv.scanType, "anisotropy | wavevector | wind-unwind")
        ->check(CLI::IsMember({"anisotropy", "wavevector", "wind-unwind"}));
    auto* fmi = app.add_subcommand("fmi", "Fourier magnetic imaging scan and reconstruction");
    common(fmi, true);
    auto* analytics = app.add_subcommand("analytics", "exchange-field tables");
    common(analytics, true);
    auto* compile = app.add_subcommand("compile-sequence", "toggling-frame report for a pulse program");
    common(compile, false);
    compile->add_option("--pulses,pulses", inv.pulsesPath, "pulse program file")->required()->check(CLI::ExistingFile);
    auto* fit = app.add_subcommand("fit-pumping", "saturation-time fit of a contrast curve");
    common(fit, true);
    fit->add_option("--data", inv.dataPath, "CSV with header tau_s,contrast")->required()->check(CLI::ExistingFile);

    for (auto* sub : {quench, scan, fmi, analytics, fit}) sub->get_option("--config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    inv.command = app.get_subcommands().front()->get_name();
    auto* sub = app.get_subcommands().front();
    if (sub->count("--seed")) inv.seed = seed;
    if (sub->count("--workers")) inv.workers = workers;
    return nvmri::execute(inv, std::cout, std::cerr);
}
