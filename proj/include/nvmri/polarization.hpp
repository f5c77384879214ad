#pragma once

#include <string>
#include <vector>

#include "nvmri/grid.hpp"

namespace nvmri {

/// Normalized |E|^2 on a grid; nonnegative.
using IntensityField = Grid3;

struct ToyIntensityParams {
    double beamWidth = 800.0;       // nm, Gaussian spot waist along the beam axis
    double refractiveIndex = 2.4;
    double reflection = 0.6;        // amplitude of the counter-propagating wave
    double phase = 3.141592653589793;
    double wavelength = 532.0;      // nm, vacuum
    Vec3 extent{2250.0, 300.0, 300.0};  // x is the beam long axis, y the standing-wave axis
    std::array<int, 3> dims{256, 64, 64};
};

/// |e^{i k n Y} + r e^{-i k n Y + i phi}|^2 across y (Y measured from the beam centre), times
/// exp(-2 X^2 / w^2) along x. Cell-centred samples.
IntensityField toyInterferenceIntensity(const ToyIntensityParams& p);
double fringePeriod(const ToyIntensityParams& p);

struct PolarizationProfile {
    Grid3 rho;
    double rho0 = 1.0;
    double tauPump = 0.0;  // s
    double tauS = 1.0;     // s
};

/// rho0 (1 - exp(-tau |E|^2 / tau_S)) pointwise.
PolarizationProfile pumpProfile(const IntensityField& intensity, double tauPump, double tauS,
                                double rho0 = 1.0);

/// Default weighting: intensity times a collection profile (uniform when null).
Grid3 defaultWeighting(const IntensityField& intensity, const Grid3* collection = nullptr);

/// C(tau) = dV sum w rho(tau); w null means defaultWeighting(intensity).
std::vector<double> contrastCurve(const IntensityField& intensity, const std::vector<double>& taus,
                                  double tauS, double rho0 = 1.0, const Grid3* w = nullptr);

struct SaturationFit {
    double tauS = 0.0;
    double amplitude = 0.0;  // rho0 estimate
    double residualNorm = 0.0;
};
/// Profile least squares: amplitude solved in closed form, tau_S by golden section in log space.
SaturationFit fitSaturation(const std::vector<double>& taus, const std::vector<double>& contrast,
                            const IntensityField& intensity, const Grid3* w = nullptr);

/// Pointwise ratio to the reference profile; cells with reference below 1e-6 max are set to 0.
std::vector<Grid3> normalizedProfiles(const std::vector<Grid3>& profiles, std::size_t reference);

void writeContrastCsv(const std::string& path, const std::vector<double>& taus,
                      const std::vector<double>& contrast);
void readContrastCsv(const std::string& path, std::vector<double>& taus, std::vector<double>& contrast);

}  // namespace nvmri
