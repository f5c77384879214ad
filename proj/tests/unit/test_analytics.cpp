#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_bessel.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "nvmri/analytics.hpp"
#include "nvmri/constants.hpp"
#include "nvmri/errors.hpp"
#include "nvmri/special.hpp"

using namespace nvmri;

namespace {

const Vec3 kEta = normalized(Vec3{1, 1, 1});

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// 4 pi A n J0 int_a^R j2(Q r) / r dr by adaptive Gauss-Kronrod
double shellQuadrature(const IsotropicShellParams& p, const Vec3& Q, const Vec3& eta) {
    const double q = norm(Q);
    struct P { double q; } par{q};
    gsl_function f;
    f.function = [](double r, void* v) {
        const double qq = static_cast<P*>(v)->q;
        return gsl_sf_bessel_jl(2, qq * r) / r;
    };
    f.params = &par;
    gsl_set_error_handler_off();
    gsl_integration_workspace* ws = gsl_integration_workspace_alloc(20000);
    double res = 0.0, err = 0.0;
    const int status =
        gsl_integration_qag(&f, p.innerCutoff, p.outerExtent, 0.0, 1e-11, 20000, GSL_INTEG_GAUSS61, ws, &res, &err);
    REQUIRE(status == GSL_SUCCESS);
    gsl_integration_workspace_free(ws);
    const double c = dot(eta, Q / q);
    return 4.0 * M_PI * 0.5 * (3 * c * c - 1) * p.density * constants::J0 * res;
}

struct GaussHermite {
    std::vector<double> x, w;
    explicit GaussHermite(int n) {
        Eigen::VectorXd diag = Eigen::VectorXd::Zero(n), sub(n - 1);
        for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(0.5 * k);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(diag, sub);
        // Christoffel weights from the orthonormal recurrence; eigenvector entries underflow in the tails
        for (int i = 0; i < n; ++i) {
            const double xi = es.eigenvalues()[i];
            double pm = 0.0, p = std::pow(M_PI, -0.25), s = p * p;
            for (int k = 0; k + 1 < n; ++k) {
                const double pn = (xi * p - std::sqrt(0.5 * k) * pm) / std::sqrt(0.5 * (k + 1));
                pm = p;
                p = pn;
                s += p * p;
            }
            x.push_back(xi);
            w.push_back(1.0 / s);
        }
    }
    // int_0^inf f(x) e^{-x^2} dx for even f
    template <class F>
    double half(F f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(std::abs(x[i]));
        return 0.5 * s;
    }
};

const GaussHermite& gh200() {
    static const GaussHermite g(200);
    return g;
}

double vRef(double y) { return y == 0.0 ? 1.0 : 3.0 * gsl_sf_bessel_j1(y) / y; }

// e^{-q^2} i2(2 q x)
double dampedI2(double q, double x) {
    const double z = 2.0 * q * x;
    if (z == 0.0) return 0.0;
    return gsl_sf_bessel_il_scaled(2, z) * std::exp(z - q * q);
}

double fOracle(double q, double lambda) {
    return gh200().half([&](double x) { return x * x * vRef(lambda * x) * dampedI2(q, x); });
}

Grid3 gaussianGrid(int n, double R, double h) {
    Grid3 g({n, n, n}, {h, h, h}, {0, 0, 0});
    const double c = (n / 2) * h;
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const Vec3 p = g.position(x, y, z) - Vec3{c, c, c};
                g.at(x, y, z) = std::exp(-dot(p, p) / (2 * R * R)) / std::pow(2 * M_PI, 1.5) / (R * R * R);
            }
    return g;
}

// dV^2 sum_n sum_m f_n rho_m J(r_m - r_n)(1 - cos Q.d) / (dV sum f), |d| >= 1/Lambda
double gridBruteForce(const Grid3& rho, const Grid3* w, const Vec3& Q, const KernelOptions& opt) {
    const double dV = rho.cellVolume();
    double num = 0.0, den = 0.0;
    const auto& d = rho.dims;
    for (int a = 0; a < d[2]; ++a)
        for (int b = 0; b < d[1]; ++b)
            for (int c = 0; c < d[0]; ++c) {
                const double f = rho.at(c, b, a) * (w ? w->at(c, b, a) : 1.0);
                den += f;
                if (f == 0.0) continue;
                for (int a2 = 0; a2 < d[2]; ++a2)
                    for (int b2 = 0; b2 < d[1]; ++b2)
                        for (int c2 = 0; c2 < d[0]; ++c2) {
                            const Vec3 r = rho.position(c2, b2, a2) - rho.position(c, b, a);
                            const double rn = norm(r);
                            if (rn == 0.0 || rn < 1.0 / opt.Lambda) continue;
                            const double cs = dot(opt.eta, r) / rn;
                            const double J = constants::J0 * 0.5 * (3 * cs * cs - 1) / (rn * rn * rn);
                            num += f * rho.at(c2, b2, a2) * J * (1.0 - std::cos(dot(Q, r)));
                        }
            }
    return num * dV * dV / (den * dV);
}

SpinEnsemble randomCloud(std::size_t n, double side, std::uint64_t seed) {
    Region r{Boundary::OpenNanobeam, {side, side, side}};
    auto e = samplePositionsCount(r, n, 1.0, seed);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    for (double& p : e.polarizations) p = u(rng);
    return e;
}

double bruteChi(const SpinEnsemble& e, const Vec3& Q, const std::vector<double>& w) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        den += w[i] * e.polarizations[i];
        for (std::size_t j = 0; j < e.size(); ++j) {
            if (i == j) continue;
            const Vec3 r = e.positions[j] - e.positions[i];
            const double rn = norm(r), cs = dot(e.group.axis, r) / rn;
            num += w[i] * e.polarizations[i] * e.polarizations[j] * constants::J0 * 0.5 * (3 * cs * cs - 1) /
                   (rn * rn * rn) * (1 - std::cos(dot(Q, r)));
        }
    }
    return num / den;
}

}  // namespace

TEST_SUITE("analytics") {

TEST_CASE("isotropic shell closed form vs adaptive quadrature") {
    IsotropicShellParams p{2.2, 50.0, 6.6e-4};
    const Vec3 dirs[] = {kEta, normalized(Vec3{1, 0, 0.2}), normalized(Vec3{1, -1, 0})};
    for (const Vec3& u : dirs)
        for (double qa = 1e-3; qa <= 30.0 * 1.0001; qa *= std::pow(10.0, 0.25)) {
            const Vec3 Q = u * (qa / p.innerCutoff);
            INFO("Qa=" << qa);
            CHECK(rel(chiIsotropicClosed(p, Q, kEta), shellQuadrature(p, Q, kEta)) <= 1e-8);
        }
    CHECK(chiIsotropicClosed(p, {}, kEta) == 0.0);
    CHECK(std::abs(chiIsotropicClosed(p, Vec3{0.3, 0, 0}, kEta)) < 1e-12 * std::abs(chiIsotropicClosed(p, kEta * 0.3, kEta)));
    CHECK_THROWS_AS(chiIsotropicClosed({3.0, 2.0, 1e-3}, {0.1, 0, 0}, kEta), InvalidArgument);
}

TEST_CASE("shell sign structure and orientation factor") {
    IsotropicShellParams p{2.2, 200.0, 6.6e-4};
    for (double q : {1e-3, 1e-2, 0.05}) {
        CHECK(chiIsotropicClosed(p, kEta * q, kEta) > 0.0);
        CHECK(chiIsotropicClosed(p, normalized(Vec3{1, -1, 0}) * q, kEta) < 0.0);
    }
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n;
    const double q = 0.07;
    const double ref = chiIsotropicClosed(p, kEta * q, kEta);
    for (int k = 0; k < 50; ++k) {
        const Vec3 u = normalized(Vec3{n(rng), n(rng), n(rng)});
        const double A = dipolarAnisotropy(kEta, u);
        if (std::abs(A) < 0.05) continue;
        CHECK(rel(chiIsotropicClosed(p, u * q, kEta) / A, ref) < 1e-6);
    }
}

TEST_CASE("random shell around one spin averages to the closed form") {
    // Poisson cloud in [a, R*] around a probe at the origin; the probe alone carries weight
    const double a = 2.2, R = 30.0, dens = 6.6e-4;
    IsotropicShellParams p{a, R, dens};
    const Vec3 Q = kEta * 0.08;
    std::mt19937_64 rng(11);
    std::poisson_distribution<int> pois(dens * 4.0 / 3.0 * M_PI * (R * R * R - a * a * a));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int trials = 4000;
    double s = 0, s2 = 0;
    for (int t = 0; t < trials; ++t) {
        SpinEnsemble e;
        e.region = {Boundary::OpenNanobeam, {1e6, 1e6, 1e6}};
        e.group = nvGroup(1);
        e.positions.push_back({});
        const int m = pois(rng);
        while (static_cast<int>(e.positions.size()) < m + 1) {
            const Vec3 v{u(rng) * R, u(rng) * R, u(rng) * R};
            const double r = norm(v);
            if (r >= a && r <= R) e.positions.push_back(v);
        }
        e.polarizations.assign(e.positions.size(), 1.0);
        std::vector<double> w(e.size(), 0.0);
        w[0] = 1.0;
        const double chi = chiNumeric(e, Q, &w);
        s += chi;
        s2 += chi * chi;
    }
    const double mean = s / trials, sd = std::sqrt((s2 / trials - mean * mean) / trials);
    const double ref = chiIsotropicClosed(p, Q, kEta);
    INFO("mean=" << mean << " sd=" << sd << " ref=" << ref);
    CHECK(std::abs(mean - ref) <= 3.0 * sd);
}

TEST_CASE("chiNumeric equals the plain double sum") {
    const auto e = randomCloud(150, 40.0, 4);
    std::vector<double> w(e.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 + 0.5 * std::sin(0.3 * i);
    for (const Vec3& Q : {Vec3{0.1, 0, 0}, Vec3{0.02, -0.3, 0.05}}) {
        CHECK(rel(chiNumeric(e, Q, &w), bruteChi(e, Q, w)) < 1e-12);
        CHECK(chiNumeric(e, Q) == doctest::Approx(chiNumeric(e, -Q)).epsilon(1e-14));
    }
    CHECK(chiNumeric(e, {}) == 0.0);
    const auto f = exchangeFields(e, {0.1, 0, 0});
    CHECK(f.spinHalf().chiXY == 0.5 * f.chiXY);
    CHECK(f.spinHalf().chiZZ == 0.5 * f.chiZZ);
    std::vector<double> bad(3, 1.0);
    CHECK_THROWS_AS(chiNumeric(e, {0.1, 0, 0}, &bad), InvalidArgument);
}

TEST_CASE("chiZZ on pairs") {
    SpinEnsemble e;
    e.group = nvGroup(1);
    e.region = {Boundary::OpenNanobeam, {100, 100, 100}};
    e.positions = {{0, 0, 0}, e.group.axis * 7.0};
    e.polarizations = {1.0, 1.0};
    CHECK(chiZZ(e) == doctest::Approx(dipolarCoupling(e.group.axis * 7.0, e.group.axis)).epsilon(1e-15));
    e.positions[1] = Vec3{7.0, 0, 0};
    CHECK(std::abs(chiZZ(e)) < 1e-6);
}

TEST_CASE("Gaussian moments and series vs Gauss-Hermite") {
    for (int n = 0; n <= 6; ++n)
        for (double q : {0.01, 0.3, 1.0, 2.0, 3.0, 4.5}) {
            const double ref = gh200().half([&](double x) { return std::pow(x, 2 * n + 2) * dampedI2(q, x); });
            INFO("n=" << n << " q=" << q);
            CHECK(rel(gaussianMoment(n, q), ref) < 1e-10);
            CHECK(rel(gaussianMomentQuadrature(n, q), ref) < 1e-10);
        }
    for (double lam : {0.01, 0.05, 0.1, 0.2})
        for (double q = 0.05; q <= 3.0 + 1e-9; q += 0.15) {
            INFO("q=" << q << " lambda=" << lam);
            CHECK(rel(gaussianExchangeSeries(q, lam).value, fOracle(q, lam)) <= 1e-8);
        }
    CHECK(gaussianExchangeSeries(0.0, 0.1).value == 0.0);
    const double F0 = [] {
        const double q = 0.7;
        return (2 * std::sqrt(M_PI) * q * (2 * q * q - 3) + 3 * M_PI * std::exp(-q * q) * special::erfi(q)) /
               (16 * q * q * q);
    }();
    CHECK(rel(gaussianMoment(0, 0.7), F0) < 1e-13);
}

TEST_CASE("small-q curvature of F") {
    const double lam = 0.1, h = 1e-3;
    const double curvSeries = 2.0 * gaussianExchangeSeries(h, lam).value / (h * h);
    const double curvOracle = 2.0 * fOracle(h, lam) / (h * h);
    CHECK(rel(curvSeries, curvOracle) < 1e-6);
    // i2(z) ~ z^2/15 gives F'' (0) = (8/15) int x^4 V(lambda x) e^{-x^2}
    const double exact = 8.0 / 15.0 * gh200().half([&](double x) { return std::pow(x, 4) * vRef(lam * x); });
    CHECK(rel(curvSeries, exact) < 1e-5);
}

TEST_CASE("spectral kernel vs Gaussian series") {
    const double R = 10.0, lam = 0.2;
    const Grid3 g = gaussianGrid(64, R, 2.5);
    KernelOptions o;
    o.eta = kEta;
    o.Lambda = 1.0 / (lam * R);
    GaussianProfileParams gp{R, lam, g.sum() * g.cellVolume()};
    for (const Vec3& Q : {Vec3{0.05, 0.05, 0.05}, Vec3{0, 0.2, 0.1}}) {
        const auto r = kernelConvolution(g, nullptr, Q, o);
        CHECK_FALSE(r.aliasing);
        CHECK(rel(r.chi, chiGaussian(gp, Q, kEta)) <= 1e-4);
        CHECK(rel(kernelConvolution(g, nullptr, -Q, o).chi, r.chi) < 1e-12);
    }
    CHECK(kernelConvolution(g, nullptr, {}, o).chi == 0.0);
    CHECK(kernelConvolution(g, nullptr, {1.0, 0, 0}, o).aliasing);
}

TEST_CASE("grid orientation factorization") {
    const double R = 10.0, lam = 0.2;
    const Grid3 g = gaussianGrid(64, R, 2.5);
    KernelOptions o;
    o.eta = kEta;
    o.Lambda = 1.0 / (lam * R);
    const double q = 0.12;
    const double ref = kernelConvolution(g, nullptr, kEta * q, o).chi;
    for (const Vec3& u : {normalized(Vec3{1, 0, 0.3}), normalized(Vec3{1, -1, 0}), normalized(Vec3{0.2, 0.9, 0.4})}) {
        const double A = dipolarAnisotropy(kEta, u);
        CHECK(rel(kernelConvolution(g, nullptr, u * q, o).chi / A, ref) < 1e-4);
    }
}

TEST_CASE("lattice kernel equals brute-force double sum") {
    Grid3 g({12, 12, 12}, {1.5, 1.5, 1.5}, {0, 0, 0});
    Grid3 w({12, 12, 12}, {1.5, 1.5, 1.5}, {0, 0, 0});
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : g.data) v = u(rng) * 0.1;
    for (auto& v : w.data) v = u(rng);
    KernelOptions o;
    o.eta = nvGroup(3).axis;
    o.Lambda = 1.0 / 2.0;
    o.mode = KernelMode::LatticeSum;
    for (const Vec3& Q : {Vec3{0.1, 0.2, -0.05}, Vec3{0.3, 0, 0}}) {
        CHECK(rel(kernelConvolution(g, &w, Q, o).chi, gridBruteForce(g, &w, Q, o)) < 1e-10);
        CHECK(rel(kernelConvolution(g, nullptr, Q, o).chi, gridBruteForce(g, nullptr, Q, o)) < 1e-10);
    }
    Grid3 wrong({6, 6, 6}, {1.5, 1.5, 1.5}, {0, 0, 0}, 1.0);
    CHECK_THROWS_AS(kernelConvolution(g, &wrong, {0.1, 0, 0}, o), InvalidArgument);
    CHECK_THROWS_AS(kernelConvolution(Grid3{}, nullptr, {0.1, 0, 0}, o), InvalidArgument);
}

TEST_CASE("exchange moment routes agree") {
    const auto e = randomCloud(300, 50.0, 6);
    const auto m = exchangeMoment(e, {1, 0, 1}, 1e-5);
    CHECK(rel(m.finiteDifference, m.direct) < 1e-4);

    const Grid3 g = gaussianGrid(24, 6.0, 1.5);
    KernelOptions o;
    o.eta = kEta;
    o.Lambda = 0.4;
    o.mode = KernelMode::LatticeSum;
    const auto mg = exchangeMoment(g, nullptr, {1, 0, 1}, 2e-5, o);
    CHECK(rel(mg.finiteDifference, mg.direct) < 1e-4);
    CHECK_THROWS_AS(exchangeMoment(e, {1, 0, 0}, 0.0), InvalidArgument);
}

TEST_CASE("uniform cloud moment grows as L^2") {
    KernelOptions o;
    o.eta = kEta;
    o.Lambda = 1.0;
    o.mode = KernelMode::LatticeSum;
    std::vector<double> lx, ly;
    for (int n : {6, 10, 16, 24, 36, 60}) {
        Grid3 g({n, n, n}, {1, 1, 1}, {0, 0, 0}, 1.0);
        const double k = exchangeMoment(g, nullptr, kEta, 1e-4, o).direct;
        lx.push_back(std::log(static_cast<double>(n)));
        ly.push_back(std::log(std::abs(k)));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    CHECK(sxy / sxx == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("precession frequency") {
    const ExchangeFields f{1000.0, -300.0};
    CHECK(std::abs(precessionFrequency(M_PI / 2, 2.0, -4.0, f)) < 1e-12);
    CHECK(precessionFrequency(0.3, 0.7, 0.0, f) == doctest::Approx(std::cos(0.3) * 700.0));
    CHECK(precessionFrequency(0.0, xxzFromLambda(2.0), f) == doctest::Approx(2000.0 + 1200.0));
}

}  // TEST_SUITE
