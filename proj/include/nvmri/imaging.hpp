#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "nvmri/dtwa.hpp"
#include "nvmri/geometry.hpp"
#include "nvmri/protocol.hpp"

namespace nvmri {

struct CoherenceScan {
    Vec3 axis{1, 0, 0};
    std::vector<double> Qp;  // rad/nm, uniform
    std::vector<std::complex<double>> amplitude;
    double theta = 0.0;
    double windQ = 0.0;  // rad/nm along axis
    std::optional<DecoherenceModel> decoherence;
    bool symmetric = true;  // false when produced by Hermitian extension of a one-sided scan

    double spacing() const;
    void checkUniform(double tol = 1e-9) const;
};

struct SpatialProfile {
    std::vector<double> x;  // nm
    std::vector<std::complex<double>> value;
    double resolution = 0.0;  // 2 pi / max |Q'|
    double spacing() const { return x.size() > 1 ? x[1] - x[0] : 0.0; }
};

enum class Window { None, Hann };

/// Uniform grid of n points from -qmax to qmax inclusive.
std::vector<double> symmetricGrid(double qmax, int n);

/// amplitude(Q') = sum_j c_j e^{-i Q' axis.r_j}, times the T2 envelope at tau' = |Q'| / (gamma |grad|)
/// when a decoherence model is given.
CoherenceScan acquireScan(const SpinEnsemble& ens, const std::vector<std::complex<double>>& coherence,
                          const Vec3& axis, const std::vector<double>& Qp,
                          std::optional<DecoherenceModel> decoherence = std::nullopt,
                          double gradMag = 1.0);
/// Same from a trajectory batch via measureFourierMode, parallel over Q'.
CoherenceScan acquireScan(const TrajectoryBatch& batch, const SpinEnsemble& ens, const Vec3& axis,
                          const std::vector<double>& Qp,
                          std::optional<DecoherenceModel> decoherence = std::nullopt,
                          double gradMag = 1.0, int workers = 1);

/// Coherent spiral c_j = (1/2) sin(theta) P_j e^{i Q.r_j}.
std::vector<std::complex<double>> spiralCoherence(const SpinEnsemble& ens, const Vec3& Q, double theta);

/// Mirror a one-sided scan (Q' >= 0) assuming a real underlying profile.
CoherenceScan hermitianExtend(const CoherenceScan& oneSided);

/// rho(x) = (dQ / 2 pi) sum_k w_k a_k e^{i Q'_k x}, x spacing 2 pi / (N dQ pad), centred on 0.
SpatialProfile reconstruct(const CoherenceScan& scan, Window window = Window::None, int zeroPad = 1);

/// (dQ / 2 pi) sum |a|^2 and dx sum |rho|^2.
double scanEnergy(const CoherenceScan& scan);
double profileEnergy(const SpatialProfile& p);

struct PhaseSlopeResult {
    double slope = 0.0;  // rad/nm
    double slopeErr = 0.0;
    int points = 0;
};
/// Weighted linear fit of the unwrapped phase over the contiguous region around the peak where
/// |rho| >= threshold * max.
PhaseSlopeResult phaseSlope(const SpatialProfile& p, double threshold = 0.5);

struct RevivalWidth {
    double fwhm = 0.0;        // rad/nm
    double peakQ = 0.0;
    double peakValue = 0.0;
    double nullHalfWidth = 0.0;  // mean distance from peak to the first minimum on each side
    bool multimodal = false;
};
RevivalWidth revivalWidth(const CoherenceScan& scan);

void writeScanCsv(const std::string& path, const CoherenceScan& scan);
CoherenceScan readScanCsv(const std::string& path);
void writeProfileCsv(const std::string& path, const SpatialProfile& p);

}  // namespace nvmri
