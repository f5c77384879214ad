#include <cmath>
#include <cstdio>
#include <random>

#include "doctest.h"
#include "nvmri/errors.hpp"
#include "nvmri/imaging.hpp"

using namespace nvmri;

namespace {

// spins on a 1 nm lattice along x over [a, b), weights from f
template <class F>
SpinEnsemble lineEnsemble(double a, double b, F weight, double step = 1.0) {
    SpinEnsemble e;
    e.region = {Boundary::OpenNanobeam, {b - a, 1, 1}};
    for (double x = a + 0.5 * step; x < b; x += step) {
        e.positions.push_back({x, 0, 0});
        e.polarizations.push_back(weight(x));
    }
    return e;
}

SpinEnsemble slab(double L) {
    return lineEnsemble(-0.5 * L, 0.5 * L, [](double) { return 1.0; });
}

std::vector<std::complex<double>> uniformCoherence(const SpinEnsemble& e) {
    std::vector<std::complex<double>> c(e.size());
    for (std::size_t j = 0; j < e.size(); ++j) c[j] = e.polarizations[j];
    return c;
}

int localMaxima(const SpatialProfile& p, double frac) {
    double vmax = 0;
    for (const auto& v : p.value) vmax = std::max(vmax, std::abs(v));
    int n = 0;
    for (std::size_t i = 1; i + 1 < p.value.size(); ++i) {
        const double m = std::abs(p.value[i]);
        if (m > frac * vmax && m > std::abs(p.value[i - 1]) && m >= std::abs(p.value[i + 1])) ++n;
    }
    return n;
}

}  // namespace

TEST_SUITE("imaging") {

TEST_CASE("Parseval without window or padding") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-600, 600);
    SpinEnsemble e;
    e.region = {Boundary::OpenNanobeam, {1200, 1, 1}};
    for (int j = 0; j < 500; ++j) {
        e.positions.push_back({u(rng), 0, 0});
        e.polarizations.push_back(0.5 + 0.5 * std::abs(std::sin(j * 0.7)));
    }
    const auto c = spiralCoherence(e, {2 * M_PI / 126, 0, 0}, M_PI / 2);
    for (int n : {64, 81, 128}) {
        const auto s = acquireScan(e, c, {1, 0, 0}, symmetricGrid(0.1, n));
        const auto p = reconstruct(s);
        CHECK(p.x.size() == s.Qp.size());
        CHECK(std::abs(profileEnergy(p) - scanEnergy(s)) <= 1e-10 * scanEnergy(s));
    }
    const auto s = acquireScan(e, c, {1, 0, 0}, symmetricGrid(0.1, 64));
    CHECK(reconstruct(s, Window::None, 4).x.size() == 256);
}

TEST_CASE("sample spacing and resolution") {
    CoherenceScan s;
    s.Qp = symmetricGrid(0.2, 41);
    s.amplitude.assign(41, 1.0);
    const auto p = reconstruct(s, Window::None, 3);
    CHECK(p.spacing() == doctest::Approx(2 * M_PI / (41 * s.spacing() * 3)).epsilon(1e-12));
    CHECK(p.resolution == doctest::Approx(2 * M_PI / 0.2));
    CHECK(p.x[p.x.size() / 2] == 0.0);
}

TEST_CASE("delta scan gives a flat profile") {
    CoherenceScan s;
    s.Qp = symmetricGrid(0.1, 33);
    s.amplitude.assign(33, 0.0);
    s.amplitude[16] = {2.0, -1.0};
    const auto p = reconstruct(s);
    for (const auto& v : p.value) CHECK(std::abs(v - p.value[0]) < 1e-15);
    CHECK(std::abs(p.value[0]) == doctest::Approx(std::abs(s.amplitude[16]) * s.spacing() / (2 * M_PI)));
}

TEST_CASE("trivial sources") {
    auto e = slab(200);
    const auto grid = symmetricGrid(0.3, 61);
    const auto zero = acquireScan(e, spiralCoherence(e, {0.05, 0, 0}, 0.0), {1, 0, 0}, grid);
    for (const auto& a : zero.amplitude) CHECK(std::abs(a) == 0.0);
    SpinEnsemble one;
    one.positions = {{0, 0, 0}};
    one.polarizations = {1.0};
    const auto pt = acquireScan(one, {{0.5, 0.0}}, {1, 0, 0}, grid);
    for (const auto& a : pt.amplitude) CHECK(std::abs(a) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("lattice source round trip is exact") {
    // sources on the output grid; the DFT pair is then an identity
    const int n = 64;
    const auto grid = symmetricGrid(0.25, n);
    const double dx = 2 * M_PI / (n * (grid[1] - grid[0]));
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    SpinEnsemble e;
    std::vector<std::complex<double>> c;
    for (int i = -n / 2; i < n / 2; ++i) {
        e.positions.push_back({i * dx, 0, 0});
        e.polarizations.push_back(1.0);
        c.emplace_back(g(rng), g(rng));
    }
    const auto p = reconstruct(acquireScan(e, c, {1, 0, 0}, grid));
    double worst = 0;
    for (int i = 0; i < n; ++i) {
        CHECK(std::abs(p.x[i] - e.positions[i].x) < 1e-9);
        worst = std::max(worst, std::abs(p.value[i] * dx - c[i]));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("wound spiral reconstructs its pitch and phase slope") {
    const double Q = 2 * M_PI / 126.0;
    auto e = lineEnsemble(-700, 700, [](double) { return 1.0; }, 0.5);
    const auto grid = symmetricGrid(0.1, 161);
    for (double sgn : {1.0, -1.0}) {
        const auto s = acquireScan(e, spiralCoherence(e, {sgn * Q, 0, 0}, M_PI / 2), {1, 0, 0}, grid);
        const auto p = reconstruct(s, Window::None, 4);
        const auto f = phaseSlope(p);
        CHECK(f.slope == doctest::Approx(sgn * Q).epsilon(0.01));
        CHECK(f.points > 20);
        // zero crossings of the real part, half a period apart
        std::vector<double> z;
        for (std::size_t i = 1; i < p.x.size(); ++i) {
            if (std::abs(p.x[i]) > 600) continue;
            const double a = p.value[i - 1].real(), b = p.value[i].real();
            if (a * b < 0) z.push_back(p.x[i - 1] + (p.x[i] - p.x[i - 1]) * a / (a - b));
        }
        REQUIRE(z.size() > 4);
        const double period = 2 * (z.back() - z.front()) / (z.size() - 1);
        CHECK(std::abs(period - 126.0) < p.spacing());
    }
    const auto s0 = acquireScan(e, spiralCoherence(e, {0, 0, 0}, M_PI / 2), {1, 0, 0}, grid);
    CHECK(std::abs(phaseSlope(reconstruct(s0, Window::None, 4)).slope) < 1e-9);
}

TEST_CASE("rectangle round trip with Hann") {
    // away from the edges; at a discontinuity any band-limited estimate sits near half height
    const double L = 400.0;
    auto e = slab(L);
    const auto grid = symmetricGrid(0.5, 201);
    const auto p = reconstruct(acquireScan(e, uniformCoherence(e), {1, 0, 0}, grid), Window::Hann, 4);
    const double edgeBand = p.resolution;
    double sup = 0;
    for (std::size_t i = 0; i < p.x.size(); ++i) {
        const double x = std::abs(p.x[i]);
        if (std::abs(x - 0.5 * L) < edgeBand) continue;
        const double truth = x < 0.5 * L ? 1.0 : 0.0;
        sup = std::max(sup, std::abs(p.value[i] - truth));
    }
    CHECK(sup <= 0.15);
    CHECK(std::abs(std::abs(p.value[p.x.size() / 2]) - 1.0) < 0.02);
}

TEST_CASE("revival width of slabs") {
    const double Q = 0.05;
    auto scanFor = [&](double L) {
        auto e = slab(L);
        std::vector<double> g;
        for (int k = -300; k <= 300; ++k) g.push_back(Q + k * 2e-4);
        return acquireScan(e, spiralCoherence(e, {Q, 0, 0}, M_PI / 2), {1, 0, 0}, g);
    };
    const auto s400 = scanFor(400);
    const auto w400 = revivalWidth(s400);
    CHECK(w400.peakQ == doctest::Approx(Q).epsilon(1e-12));
    CHECK_FALSE(w400.multimodal);
    // |sinc(dQ L / 2)| halves at dQ L / 2 = 1.89549
    CHECK(w400.fwhm == doctest::Approx(4 * 1.8954942670 / 400).epsilon(0.01));
    CHECK(w400.nullHalfWidth == doctest::Approx(2 * M_PI / 400).epsilon(0.02));
    const auto w800 = revivalWidth(scanFor(800));
    CHECK(w400.fwhm / w800.fwhm == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("Gaussian profile width") {
    for (double sigma : {40.0, 90.0}) {
        auto e = lineEnsemble(-8 * sigma, 8 * sigma, [&](double x) { return std::exp(-x * x / (2 * sigma * sigma)); },
                              0.5);
        const auto s = acquireScan(e, uniformCoherence(e), {1, 0, 0}, symmetricGrid(8 / sigma, 801));
        const auto w = revivalWidth(s);
        CHECK(w.fwhm == doctest::Approx(2 * std::sqrt(2 * std::log(2.0)) / sigma).epsilon(0.05));
        CHECK(std::abs(w.peakQ) < 1e-12);
    }
}

TEST_CASE("two-point resolution") {
    const double qmax = 0.2, res = 2 * M_PI / qmax;
    auto pair = [&](double d) {
        SpinEnsemble e;
        e.positions = {{-0.5 * d, 0, 0}, {0.5 * d, 0, 0}};
        e.polarizations = {1, 1};
        return reconstruct(acquireScan(e, {1.0, 1.0}, {1, 0, 0}, symmetricGrid(qmax, 64)), Window::None, 16);
    };
    CHECK(localMaxima(pair(1.5 * res), 0.5) == 2);
    CHECK(localMaxima(pair(2.5 * res), 0.5) == 2);
    CHECK(localMaxima(pair(0.4 * res), 0.5) == 1);
}

TEST_CASE("Hermitian extension of a real profile") {
    auto e = lineEnsemble(-150, 250, [](double x) { return 1.0 + 0.3 * std::cos(x / 40); });
    const auto full = acquireScan(e, uniformCoherence(e), {1, 0, 0}, symmetricGrid(0.2, 81));
    std::vector<double> half(full.Qp.begin() + 40, full.Qp.end());
    half.front() = 0.0;
    const auto one = acquireScan(e, uniformCoherence(e), {1, 0, 0}, half);
    const auto ext = hermitianExtend(one);
    CHECK_FALSE(ext.symmetric);
    REQUIRE(ext.Qp.size() == full.Qp.size());
    for (std::size_t k = 0; k < ext.Qp.size(); ++k) {
        CHECK(ext.Qp[k] == doctest::Approx(full.Qp[k]).epsilon(1e-12));
        CHECK(std::abs(ext.amplitude[k] - full.amplitude[k]) < 1e-9 * std::abs(full.amplitude[40]));
    }
    CoherenceScan bad = one;
    bad.Qp.front() = 0.001;
    CHECK_THROWS_AS(hermitianExtend(bad), InvalidArgument);
}

TEST_CASE("non-uniform grids are rejected") {
    CoherenceScan s;
    s.Qp = {-0.1, 0.0, 0.05, 0.1};
    s.amplitude.assign(4, 1.0);
    CHECK_THROWS_AS(reconstruct(s), InvalidArgument);
    CHECK_THROWS_AS(revivalWidth(s), InvalidArgument);
    SpinEnsemble one;
    one.positions = {{0, 0, 0}};
    one.polarizations = {1.0};
    CHECK_THROWS_AS(acquireScan(one, {{1.0, 0.0}}, {1, 0, 0}, s.Qp), InvalidArgument);
    CHECK_THROWS_AS(reconstruct(CoherenceScan{}), InvalidArgument);
    CHECK_THROWS_AS(symmetricGrid(0.1, 1), InvalidArgument);
}

TEST_CASE("decoherence envelope weights each Q'") {
    SpinEnsemble one;
    one.positions = {{0, 0, 0}};
    one.polarizations = {1.0};
    const DecoherenceModel dm{1.0, 1.0};
    const double grad = 2.2e3;  // T/m
    const auto grid = symmetricGrid(0.05, 11);
    const auto s = acquireScan(one, {{1.0, 0.0}}, {1, 0, 0}, grid, dm, grad);
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK(std::abs(s.amplitude[k]) ==
              doctest::Approx(decoherenceEnvelope(windingTimeFor(std::abs(grid[k]), grad), dm)).epsilon(1e-14));
    CHECK(std::abs(s.amplitude[5]) == doctest::Approx(1.0));
}

TEST_CASE("trajectory-batch scans are deterministic across workers") {
    auto e = slab(300);
    for (auto& p : e.positions) p.y = 0.0;
    const auto b = sampleInitial(e, M_PI / 2, 1.0, 5, 40, 8);
    const auto grid = symmetricGrid(0.1, 21);
    const auto a1 = acquireScan(b, e, {1, 0, 0}, grid, std::nullopt, 1.0, 1);
    const auto a3 = acquireScan(b, e, {1, 0, 0}, grid, std::nullopt, 1.0, 3);
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK(a1.amplitude[k] == a3.amplitude[k]);
    // fully polarized along x: s^x = 1/2 on every sample
    CHECK(a1.amplitude[10].real() == doctest::Approx(0.5 * e.size()).epsilon(1e-12));
}

TEST_CASE("scan and profile CSV") {
    auto e = slab(100);
    const auto s = acquireScan(e, spiralCoherence(e, {0.02, 0, 0}, 1.0), {1, 0, 0}, symmetricGrid(0.1, 17));
    const std::string path = "imaging_scan_test.csv";
    writeScanCsv(path, s);
    const auto back = readScanCsv(path);
    REQUIRE(back.Qp.size() == s.Qp.size());
    for (std::size_t k = 0; k < s.Qp.size(); ++k) {
        CHECK(back.Qp[k] == s.Qp[k]);
        CHECK(back.amplitude[k] == s.amplitude[k]);
    }
    writeProfileCsv("imaging_profile_test.csv", reconstruct(s));
    std::FILE* f = std::fopen("imaging_profile_test.csv", "r");
    REQUIRE(f);
    char head[64] = {};
    CHECK(std::fgets(head, sizeof head, f) != nullptr);
    std::fclose(f);
    CHECK(std::string(head) == "x_nm,re,im,mag\n");
    {
        std::FILE* g = std::fopen(path.c_str(), "w");
        std::fputs("q,re,im\n0,1,0\n", g);
        std::fclose(g);
    }
    CHECK_THROWS_AS(readScanCsv(path), InvalidArgument);
    std::remove(path.c_str());
    std::remove("imaging_profile_test.csv");
}

}  // TEST_SUITE
