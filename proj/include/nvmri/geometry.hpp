#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nvmri/vec3.hpp"

namespace nvmri {

struct NvGroup {
    int index = 1;  // 1..4
    Vec3 axis;
};

/// The four <111> axes. Labels: (1,1,1), (1,-1,-1), (-1,1,-1), (-1,-1,1), normalized.
std::array<NvGroup, 4> nvGroupAxes();
NvGroup nvGroup(int index);

enum class Boundary { PeriodicBox, OpenNanobeam };

/// Axis-aligned region [0,Lx) x [0,Ly) x [0,Lz) in nm. For the nanobeam the long axis is x.
struct Region {
    Boundary boundary = Boundary::PeriodicBox;
    Vec3 extent;
    double volume() const { return extent.x * extent.y * extent.z; }
    bool contains(const Vec3& p) const;
};

struct SpinEnsemble {
    std::vector<Vec3> positions;       // nm
    std::vector<double> polarizations; // in [0,1]
    NvGroup group = nvGroup(1);
    Region region;
    double uvCutoff = 0.0;             // nm

    std::size_t size() const { return positions.size(); }

    /// r_j - r_i, using the minimum image under periodic boundaries.
    Vec3 displacement(std::size_t i, std::size_t j) const;
    double meanPolarization() const;
};

Vec3 minimumImage(Vec3 d, const Region& region);
/// Periodic box: each component moved to the nearest 2 pi m / L. Open regions: unchanged.
Vec3 commensurateWavevector(const Vec3& Q, const Region& region);

/// Per-group NV density (nm^-3) for a total concentration in ppm.
double nvGroupDensity(double ppm);
/// n^{-1/3}
double typicalSpacing(double density);

/// Hard-sphere rejection sampling, count = round(density * volume), all polarizations 1.
SpinEnsemble samplePositions(const Region& region, double density, double uvCutoff,
                             std::uint64_t seed, int maxAttemptsPerSpin = 1000);
SpinEnsemble samplePositionsCount(const Region& region, std::size_t count, double uvCutoff,
                                  std::uint64_t seed, int maxAttemptsPerSpin = 1000);

double minPairDistance(const SpinEnsemble& ens);

/// (3 (eta.r)^2 - 1) / 2; both inputs must be unit vectors.
double dipolarAnisotropy(const Vec3& eta, const Vec3& rhat);

/// J(r) = J0 A(r^) / r^3 in rad/s; r in nm.
double dipolarCoupling(const Vec3& r, const Vec3& eta, double uvCutoff = 0.0);

struct CoilPath {
    std::vector<Vec3> vertices;  // um
    double current = 0.0;        // mA
    void validate() const;
};

/// Field in mT at point (um), sum of exact finite-segment contributions.
Vec3 biotSavartField(const CoilPath& path, const Vec3& point);

/// Field function taking positions in nm, returning mT.
using FieldFn = std::function<Vec3(const Vec3&)>;
FieldFn coilField(CoilPath path, Vec3 offsetUm = {}, double scale = 1.0);

struct GradientSpec {
    enum class Source { CoilModel, Direct };
    Vec3 gradient;  // mT/um
    Source source = Source::Direct;
};

/// Central difference of B.eta at point (nm), step in nm.
GradientSpec effectiveGradient(const FieldFn& field, const Vec3& eta, const Vec3& point,
                               double step = 1.0);

/// gamma (B.eta) in MHz at each point.
std::vector<double> esrDetuningProfile(const FieldFn& field, const NvGroup& group,
                                       const std::vector<Vec3>& points);
std::array<std::vector<double>, 4> esrDetuningProfiles(const FieldFn& field,
                                                       const std::vector<Vec3>& points);

void writeEnsembleCsv(const std::string& path, const SpinEnsemble& ens);
CoilPath readCoilCsv(const std::string& path, double currentMilliAmp);

}  // namespace nvmri
