#pragma once

namespace nvmri::special {

/// Dawson integral D(x) = e^{-x^2} int_0^x e^{t^2} dt.
double dawson(double x);
/// erfi(x) = 2 e^{x^2} D(x) / sqrt(pi).
double erfi(double x);

/// Kummer 1F1(a; b; z) by power series; intended for |z| <= 25.
double hyp1f1(double a, double b, double z);

/// G(x) = ((3 - x^2) sin x / x - 3 cos x) / x^2, the spherical Bessel j2.
double gFunction(double x);
double gFunctionDefinition(double x);
double gFunctionTaylor(double x);

/// V(x) = 3 (sinc x - cos x) / x^2, V(0) = 1.
double vFunction(double x);
double vFunctionDefinition(double x);
double vFunctionTaylor(double x);

/// Modified spherical Bessel i2(z) = -j2(iz), z >= 0.
double i2(double z);

inline constexpr double kTaylorCrossover = 1e-2;

}  // namespace nvmri::special
