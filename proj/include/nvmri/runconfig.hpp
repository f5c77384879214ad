#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "nvmri/analytics.hpp"
#include "nvmri/dtwa.hpp"
#include "nvmri/geometry.hpp"
#include "nvmri/hamiltonian.hpp"
#include "nvmri/imaging.hpp"
#include "nvmri/polarization.hpp"
#include "nvmri/protocol.hpp"

namespace nvmri {

using Json = nlohmann::ordered_json;

/// Strict view of one JSON object: every key must be consumed before finish().
class ConfigSection {
public:
    ConfigSection(const Json& j, std::string path);

    bool has(const std::string& key) const;
    double number(const std::string& key);
    double number(const std::string& key, double def);
    long long integer(const std::string& key);
    long long integer(const std::string& key, long long def);
    std::string string(const std::string& key);
    std::string string(const std::string& key, const std::string& def);
    bool boolean(const std::string& key, bool def);
    Vec3 vec3(const std::string& key);
    std::vector<double> numbers(const std::string& key);
    /// Array of numbers or {"start", "stop", "count", "log"}.
    std::vector<double> grid(const std::string& key);
    ConfigSection child(const std::string& key);
    const Json& raw(const std::string& key);
    std::string keyPath(const std::string& key) const;
    void finish() const;

private:
    const Json& get(const std::string& key);
    const Json* j_;
    std::string path_;
    std::set<std::string> used_;
};

struct EnsembleConfig {
    Boundary boundary = Boundary::PeriodicBox;
    Vec3 extent;
    std::optional<double> densityPpm;
    std::optional<long long> count;
    double uvCutoff = 0.0;
    int group = 1;
    std::uint64_t stream = 0;
};

struct CoilConfig {
    std::string file;        // vertex CSV, um
    double currentMilliAmp = 0.0;
    Vec3 pointNm;            // where the gradient is evaluated, coil coordinates
};

struct ProtocolConfig {
    double theta = 0.0;
    std::vector<Vec3> wavevectors;  // rad/nm, one trace set each
    std::optional<Vec3> gradient;   // mT/um, when the spiral is given by a gradient
    std::optional<CoilConfig> coil; // gradient from a coil model instead
    double windingTimeUs = 0.0;
    std::vector<double> timesUs;
    int trajectories = 0;
    double polarization = 1.0;
    EvolutionFrame frame = EvolutionFrame::Lab;
    IntegratorSettings integrator;
    int earlySamples = 0;
    std::vector<double> pairAngles;
    std::optional<DecoherenceModel> decoherence;
    int blockSize = kDefaultBlockSize;
};

struct ScanConfig {
    std::string type;  // anisotropy | wavevector | wind-unwind
    std::vector<double> ratios;
    std::vector<double> qMagnitudes;
    Vec3 direction{1, 0, 0};
    double gradientMagnitude = 1.0;  // mT/um
    std::optional<DecoherenceModel> decoherence;
    Vec3 axis{1, 0, 0};
    double qpMax = 0.0;
    int qpPoints = 0;
    double holdUs = 0.0;
};

struct ImagingConfig {
    Vec3 axis{1, 0, 0};
    double qpMax = 0.0;
    int qpPoints = 0;
    Window window = Window::None;
    int zeroPad = 1;
    double fitThreshold = 0.5;
};

struct PolarizationConfig {
    std::string intensity = "toy";  // toy | grid
    ToyIntensityParams toy;
    std::string gridPath;
    std::string weighting = "intensity";  // intensity | uniform | path to a grid
    double tauS = 0.0;                    // s, used by generators and the moment sweep
    std::vector<double> pumpTimes;        // s
    double rho0 = 1.0;
};

struct AnalyticsConfig {
    std::string kind;  // isotropic_shell | gaussian | ensemble | grid | moment_pumping
    std::vector<double> qValues;
    Vec3 qDirection{0, 0, 1};
    Vec3 eta{0, 0, 1};
    double theta = 0.7853981633974483;
    // isotropic shell
    double innerCutoff = 0.0;
    std::vector<double> outerExtents;
    double density = 0.0;  // nm^-3
    // gaussian
    double width = 0.0;
    double lambda = 0.0;
    double totalPolarization = 1.0;
    // grid / moments
    std::string densityGrid, weightGrid;
    double Lambda = 1.0;
    KernelMode kernel = KernelMode::Spectral;
    int pad = 2;
    double dQ = 1e-4;
    Vec3 momentDirection{1, 0, 0};
};

struct RunConfig {
    Json snapshot;          // resolved document
    std::string baseDir;    // directory of the config file, for relative paths
    std::uint64_t seed = 0;
    int workers = 1;
    std::optional<EnsembleConfig> ensemble;
    std::optional<XXZModel> model;
    std::optional<ProtocolConfig> protocol;
    std::optional<ScanConfig> scan;
    std::optional<ImagingConfig> imaging;
    std::optional<PolarizationConfig> polarization;
    std::optional<AnalyticsConfig> analytics;
    std::string outputPrefix;

    std::string resolvePath(const std::string& p) const;
};

/// Parses and validates the whole document; throws InvalidArgument naming the offending key.
RunConfig parseRunConfig(const Json& doc, const std::string& baseDir = ".");
RunConfig loadRunConfig(const std::string& path);

/// Throws "missing required key '<name>'" when the section is absent.
template <class T>
const T& requireSection(const std::optional<T>& s, const std::string& name);

SpinEnsemble buildEnsemble(const EnsembleConfig& c, std::uint64_t seed);

}  // namespace nvmri
