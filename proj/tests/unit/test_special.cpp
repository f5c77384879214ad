#include <gsl/gsl_sf_bessel.h>
#include <gsl/gsl_sf_dawson.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "nvmri/special.hpp"

using namespace nvmri::special;

namespace {

struct Ref {
    std::string kind;
    double a, b, x, value;
};

std::vector<Ref> loadRefs() {
    std::ifstream f(std::string(NVMRI_SOURCE_DIR) + "/tests/data/special_refs.csv");
    std::string line;
    std::getline(f, line);
    std::vector<Ref> out;
    while (std::getline(f, line)) {
        std::stringstream ss(line);
        std::string c[5];
        for (auto& s : c) std::getline(ss, s, ',');
        auto num = [](const std::string& s) { return s.empty() ? 0.0 : std::stod(s); };
        out.push_back({c[0], num(c[1]), num(c[2]), num(c[3]), num(c[4])});
    }
    return out;
}

double rel(double a, double b) { return b == 0.0 ? std::abs(a) : std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_SUITE("special") {

TEST_CASE("arbitrary-precision references") {
    const auto refs = loadRefs();
    REQUIRE(refs.size() == 75);
    for (const auto& r : refs) {
        double got = 0.0;
        if (r.kind == "erfi") got = erfi(r.x);
        else if (r.kind == "dawson") got = dawson(r.x);
        else got = hyp1f1(r.a, r.b, r.x);
        INFO(r.kind << " a=" << r.a << " b=" << r.b << " x=" << r.x);
        CHECK(rel(got, r.value) <= 1e-15);
    }
}

TEST_CASE("odd symmetry and GSL cross-check") {
    for (double x = 0.05; x < 8.0; x += 0.37) {
        CHECK(dawson(-x) == -dawson(x));
        CHECK(erfi(-x) == -erfi(x));
        CHECK(rel(dawson(x), gsl_sf_dawson(x)) < 1e-14);
    }
    CHECK(dawson(0.0) == 0.0);
    CHECK(hyp1f1(1.5, 2.5, 0.0) == 1.0);
}

TEST_CASE("G is j2 and V is 3 j1 / x") {
    for (double x : {1e-6, 1e-4, 1e-3, 5e-3, 9.9e-3, 1e-2, 1.01e-2, 0.1, 0.5, 1.0, 3.0, 10.0, 40.0, 200.0}) {
        INFO("x=" << x);
        CHECK(rel(gFunction(x), gsl_sf_bessel_jl(2, x)) < 1e-13);
        CHECK(rel(vFunction(x), 3.0 * gsl_sf_bessel_j1(x) / x) < 1e-13);
    }
    CHECK(gFunction(0.0) == 0.0);
    CHECK(vFunction(0.0) == 1.0);
}

TEST_CASE("Taylor branch takes over where the definition cancels") {
    // definitions lose ~1/x^4 to cancellation; the series is accurate there
    for (double x : {1e-4, 1e-3, 5e-3, 1e-2}) {
        CHECK(rel(gFunctionTaylor(x), gsl_sf_bessel_jl(2, x)) < 1e-15);
        CHECK(rel(vFunctionTaylor(x), 3.0 * gsl_sf_bessel_j1(x) / x) < 1e-15);
    }
    const double xc = kTaylorCrossover;
    CHECK(rel(gFunctionTaylor(xc), gFunctionDefinition(xc)) < 1e-5);
    CHECK(rel(vFunctionTaylor(xc), vFunctionDefinition(xc)) < 1e-5);
    CHECK(rel(gFunctionDefinition(0.5), gsl_sf_bessel_jl(2, 0.5)) < 1e-13);
    CHECK(gFunction(xc * 0.999) == gFunctionTaylor(xc * 0.999));
    CHECK(gFunction(xc * 1.001) == gFunctionDefinition(xc * 1.001));
}

TEST_CASE("G and V limits and bounds") {
    // G(x)/x^2 = 1/15 - x^2/210 + ..., so at x = 1e-3 the leading limit alone is off by 4.8e-9
    CHECK(std::abs(gFunction(1e-3) / 1e-6 - (1.0 / 15.0 - 1e-6 / 210.0)) < 1e-10);
    CHECK(std::abs(gFunction(1e-5) / 1e-10 - 1.0 / 15.0) < 1e-10);
    CHECK(std::abs(gFunctionDefinition(kTaylorCrossover) - gFunctionTaylor(kTaylorCrossover)) < 1e-12);
    CHECK(std::abs(vFunctionDefinition(kTaylorCrossover) - vFunctionTaylor(kTaylorCrossover)) < 1e-12);
    CHECK(rel(vFunction(M_PI), 3.0 / (M_PI * M_PI)) < 1e-15);
    CHECK(std::abs(vFunction(1e-9) - 1.0) < 1e-15);
    for (double x = 0.5; x < 500.0; x *= 1.07) {
        CHECK(std::abs(gFunction(x)) <= (3 + x * x + 3 * x) / (x * x));
        CHECK(std::abs(vFunction(x)) * x <= 3.0 * (1.0 + 1.0 / x));
    }
}

TEST_CASE("i2 against GSL") {
    for (double z : {0.0, 1e-5, 1e-3, 0.02, 0.3, 1.0, 4.0, 15.0, 40.0}) {
        INFO("z=" << z);
        const double ref = gsl_sf_bessel_il_scaled(2, z) * std::exp(z);
        if (z == 0.0) CHECK(i2(z) == 0.0);
        else CHECK(rel(i2(z), ref) < 1e-13);
    }
}

}  // TEST_SUITE
