// Synthetic contrast curve from the polarization section of a run config, with seeded
// multiplicative Gaussian noise.
#include <iostream>

#include "CLI11.hpp"
#include "nvmri/errors.hpp"
#include "nvmri/polarization.hpp"
#include "nvmri/random.hpp"
#include "nvmri/runconfig.hpp"

int main(int argc, char** argv) {
    CLI::App app{"generate a pumping contrast dataset"};
    std::string config, out;
    double noise = 0.01;
    app.add_option("--config", config, "run config with a polarization section")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "output CSV")->required();
    app.add_option("--noise", noise, "relative noise level")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        const nvmri::RunConfig cfg = nvmri::loadRunConfig(config);
        const auto& pc = nvmri::requireSection(cfg.polarization, "polarization");
        if (pc.pumpTimes.empty()) throw nvmri::InvalidArgument("missing required key 'polarization.pump_times_s'");
        if (!(pc.tauS > 0.0)) throw nvmri::InvalidArgument("missing required key 'polarization.tau_s'");
        if (pc.intensity != "toy") throw nvmri::InvalidArgument("generator supports 'polarization.intensity' = toy only");
        const auto I = nvmri::toyInterferenceIntensity(pc.toy);
        auto c = nvmri::contrastCurve(I, pc.pumpTimes, pc.tauS, pc.rho0);
        nvmri::Rng rng(nvmri::streamSeed(cfg.seed, 0x70756d70));
        for (double& v : c) v *= 1.0 + noise * nvmri::standardNormal(rng);
        nvmri::writeContrastCsv(out, pc.pumpTimes, c);
        std::cout << out << "\n";
    } catch (const nvmri::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
