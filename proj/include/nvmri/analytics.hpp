#pragma once

#include <optional>
#include <vector>

#include "nvmri/geometry.hpp"
#include "nvmri/grid.hpp"
#include "nvmri/hamiltonian.hpp"
#include "nvmri/vec3.hpp"

namespace nvmri {

/// Exchange fields in rad/s, normalized as the plain double sum over pairs.
struct ExchangeFields {
    double chiXY = 0.0;
    double chiZZ = 0.0;
    /// Fields acting on a classical spin of length 1/2 (what the dTWA integrates).
    ExchangeFields spinHalf() const { return {0.5 * chiXY, 0.5 * chiZZ}; }
};

struct IsotropicShellParams {
    double innerCutoff = 1.0;  // a, nm
    double outerExtent = 10.0; // R*, nm
    double density = 1e-3;     // nm^-3
    void validate() const;
};

struct GaussianProfileParams {
    double width = 10.0;       // R*, nm; standard deviation of the profile
    double lambda = 0.1;       // 1/(Lambda R*)
    double totalPolarization = 1.0;
    void validate() const;
};

/// (1/rho0) sum_i w_i P_i sum_{j != i} P_j J(r_ij)(1 - cos Q.r_ij), rho0 = sum_i w_i P_i.
double chiNumeric(const SpinEnsemble& ens, const Vec3& Q,
                  const std::vector<double>* weights = nullptr);
double chiZZ(const SpinEnsemble& ens, const std::vector<double>* weights = nullptr);
ExchangeFields exchangeFields(const SpinEnsemble& ens, const Vec3& Q,
                              const std::vector<double>* weights = nullptr);

/// J0 (4 pi / 3) A(Q^) n [V(Qa) - V(QR*)]; Q in rad/nm, eta the NV axis.
double chiIsotropicClosed(const IsotropicShellParams& p, const Vec3& Q, const Vec3& eta);

/// Gaussian-profile moment F_n(q) = e^{-q^2} int_0^inf x^{2n+2} e^{-x^2} i2(2qx) dx.
double gaussianMoment(int n, double q);
double gaussianMomentQuadrature(int n, double q);

struct SeriesResult {
    double value = 0.0;
    int terms = 0;
};
/// F(q, lambda) = sum_n 6(n+1)/(2n+3)! (-1)^n F_n(q) lambda^{2n}.
SeriesResult gaussianExchangeSeries(double q, double lambda, int nMax = 60, double tol = 1e-17);
/// (2/(3 pi)) J0 (rho0 / R^3) A(Q^) F(Q R, lambda) for rho = rho0 exp(-r^2/2R^2)/((2 pi)^{3/2} R^3).
double chiGaussian(const GaussianProfileParams& p, const Vec3& Q, const Vec3& eta);

enum class KernelMode { Spectral, LatticeSum };

struct KernelOptions {
    Vec3 eta{0, 0, 1};
    double Lambda = 1.0;  // nm^-1; real-space exclusion radius 1/Lambda
    KernelMode mode = KernelMode::Spectral;
    int pad = 2;
};

struct ConvolutionResult {
    double chi = 0.0;
    bool aliasing = false;
};

/// Grid evaluation of chi_Q for density rho (nm^-3) and optional weighting w (same shape).
/// Spectral mode integrates against J_q = -(4 pi/3) J0 A(q^) V(q/Lambda) on the padded grid;
/// lattice mode sums J(d)(1 - cos Q.d) over grid displacements with |d| >= 1/Lambda, d != 0.
ConvolutionResult kernelConvolution(const Grid3& rho, const Grid3* w, const Vec3& Q,
                                    const KernelOptions& opt);
double chiZZGrid(const Grid3& rho, const Grid3* w, const KernelOptions& opt);

struct MomentResult {
    double finiteDifference = 0.0;
    double direct = 0.0;
};

/// kappa along unit direction: 2 chi(dQ)/dQ^2 and (1/rho0) sum w P P J (dir.r)^2.
MomentResult exchangeMoment(const SpinEnsemble& ens, const Vec3& direction, double dQ,
                            const std::vector<double>* weights = nullptr);
/// Direct route is always the lattice sum; the finite difference follows opt.mode.
MomentResult exchangeMoment(const Grid3& rho, const Grid3* w, const Vec3& direction, double dQ,
                            const KernelOptions& opt);

/// cos(theta) (g0 chiXY + g2 chiZZ)
double precessionFrequency(double theta, double g0, double g2, const ExchangeFields& f);
inline double precessionFrequency(double theta, const XXZModel& m, const ExchangeFields& f) {
    return precessionFrequency(theta, m.g0, m.g2, f);
}

struct ChiRow {
    double Q = 0.0;
    double chiXY = 0.0;
    double chiZZ = 0.0;
    double omega = 0.0;
};
void writeChiCsv(const std::string& path, const std::vector<ChiRow>& rows);

}  // namespace nvmri
