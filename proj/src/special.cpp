#include "nvmri/special.hpp"

#include <quadmath.h>

#include <cmath>
#include <limits>

#include "nvmri/errors.hpp"

namespace nvmri::special {

double dawson(double x) {
    const double ax = std::abs(x);
    if (ax < 0.2) {
        // x - 2x^3/3 + 4x^5/15 - ...
        const double x2 = x * x;
        double term = x, sum = x;
        for (int k = 1; k < 30; ++k) {
            term *= -2.0 * x2 / (2.0 * k + 1.0);
            sum += term;
            if (std::abs(term) < 1e-18 * std::abs(sum)) break;
        }
        return sum;
    }
    if (ax > 12.0) {
        // asymptotic 1/(2x) sum (2k-1)!! / (2x^2)^k
        const double y = 1.0 / (2.0 * x * x);
        double term = 1.0, sum = 1.0;
        for (int k = 1; k < 30; ++k) {
            const double next = term * (2.0 * k - 1.0) * y;
            if (next > term) break;
            term = next;
            sum += term;
            if (term < 1e-17 * sum) break;
        }
        return sum / (2.0 * x);
    }
    // Rybicki: D(x) = (1/sqrt(pi)) sum_{n odd} e^{-(x - n h)^2} / n, h = 0.1, in extended precision
    const long double h = 0.1L;
    const int n0 = 2 * static_cast<int>(std::lround(0.5 * ax / 0.1));
    const long double xp = static_cast<long double>(ax) - n0 * h;
    const long double e1 = std::exp(2.0L * xp * h);
    const long double e2 = e1 * e1;
    long double d1 = n0 + 1;
    long double d2 = d1 - 2.0L;
    long double sum = 0.0L;
    long double ef = e1, eb = 1.0L / e1;
    for (int k = 1; k <= 201; k += 2) {
        const long double w = std::exp(-(k * h) * (k * h));
        sum += w * (ef / d1 + eb / d2);
        ef *= e2;
        eb /= e2;
        d1 += 2.0L;
        d2 -= 2.0L;
    }
    const double r = static_cast<double>(std::exp(-xp * xp) * sum / 1.772453850905516027298167483341145L);
    return x < 0 ? -r : r;
}

double erfi(double x) {
    const long double x2 = static_cast<long double>(x) * x;
    return static_cast<double>(2.0L * std::exp(x2) * dawson(x) / 1.772453850905516027298167483341145L);
}

double hyp1f1(double a, double b, double z) {
    if (b <= 0.0 && b == std::floor(b)) throw InvalidArgument("hyp1f1: b must not be a nonpositive integer");
    double term = 1.0, sum = 1.0;
    for (int k = 0; k < 2000; ++k) {
        const double ratio = (a + k) * z / ((b + k) * (k + 1.0));
        term *= ratio;
        sum += term;
        // stop once terms are shrinking and negligible
        if (std::abs(ratio) < 1.0 && std::abs(term) <= 1e-17 * std::abs(sum)) return sum;
        if (term == 0.0) return sum;
    }
    throw NumericalError("hyp1f1: series did not converge");
}

double gFunctionTaylor(double x) {
    // x^2 sum_k (-x^2/2)^k / (k! (2k+5)!!)
    const double x2 = x * x;
    double term = 1.0 / 15.0, sum = term;
    for (int k = 1; k < 40; ++k) {
        term *= -0.5 * x2 / (k * (2.0 * k + 5.0));
        sum += term;
        if (std::abs(term) < 1e-20 * std::abs(sum)) break;
    }
    return x2 * sum;
}

double gFunctionDefinition(double x) {
    if (x == 0.0) return 0.0;
    if (std::abs(x) < 1.0) {
        const __float128 q = x;
        const __float128 r = ((3 - q * q) * sinq(q) / q - 3 * cosq(q)) / (q * q);
        return static_cast<double>(r);
    }
    const long double q = x;
    return static_cast<double>(((3.0L - q * q) * std::sin(q) / q - 3.0L * std::cos(q)) / (q * q));
}

double gFunction(double x) {
    return std::abs(x) < kTaylorCrossover ? gFunctionTaylor(x) : gFunctionDefinition(x);
}

double vFunctionTaylor(double x) {
    // 3 sum_k (-x^2/2)^k / (k! (2k+3)!!)
    const double x2 = x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 40; ++k) {
        term *= -0.5 * x2 / (k * (2.0 * k + 3.0));
        sum += term;
        if (std::abs(term) < 1e-20 * std::abs(sum)) break;
    }
    return sum;
}

double vFunctionDefinition(double x) {
    if (x == 0.0) return 1.0;
    if (std::abs(x) < 1.0) {
        const __float128 q = x;
        return static_cast<double>(3 * (sinq(q) / q - cosq(q)) / (q * q));
    }
    const long double q = x;
    return static_cast<double>(3.0L * (std::sin(q) / q - std::cos(q)) / (q * q));
}

double vFunction(double x) {
    return std::abs(x) < kTaylorCrossover ? vFunctionTaylor(x) : vFunctionDefinition(x);
}

double i2(double z) {
    if (z < 0.0) return i2(-z);
    if (z < 2.0) {
        const double z2 = z * z;
        double term = 1.0 / 15.0, sum = term;
        for (int k = 1; k < 60; ++k) {
            term *= 0.5 * z2 / (k * (2.0 * k + 5.0));
            sum += term;
            if (term < 1e-18 * sum) break;
        }
        return z2 * sum;
    }
    return (3.0 / (z * z) + 1.0) * std::sinh(z) / z - 3.0 * std::cosh(z) / (z * z);
}

}  // namespace nvmri::special
