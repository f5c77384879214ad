#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace nvmri {

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double slopeErr = 0.0;
    double residualNorm = 0.0;
};

/// Weighted least squares y = a + b x. Empty weights means uniform.
LineFit fitLine(const std::vector<double>& x, const std::vector<double>& y,
                const std::vector<double>& w = {});

/// Removes 2 pi jumps between consecutive samples.
std::vector<double> unwrapPhase(const std::vector<double>& phase);

struct NonlinearFit {
    Eigen::VectorXd params;
    Eigen::VectorXd stderrs;
    double residualNorm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Levenberg-Marquardt on residuals r(p) with forward-difference Jacobian.
/// `typical` sets the finite-difference scale per parameter.
NonlinearFit levenbergMarquardt(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
                                Eigen::VectorXd p0, int maxIter = 200, double tol = 1e-12,
                                const Eigen::VectorXd& typical = {});

struct DampedSine {
    double amplitude = 0.0;
    double omega = 0.0;  // rad per time unit of the input
    double phase = 0.0;
    double decayTime = 0.0;  // infinite when no decay resolved
    double omegaErr = 0.0;
    bool converged = false;
};

/// Fit Im = A sin(Omega t + phi) exp(-t/tau). When re is nonempty the real part is fitted jointly
/// with A cos(Omega t + phi) exp(-t/tau), which fixes the sign of Omega. Initial Omega comes from
/// the peak of a zero-padded DFT.
DampedSine fitDampedSine(const std::vector<double>& t, const std::vector<double>& im,
                         const std::vector<double>& re = {});

/// Golden-section minimization on [a, b].
double goldenSection(const std::function<double(double)>& f, double a, double b, double tol = 1e-12,
                     int maxIter = 300);

}  // namespace nvmri
