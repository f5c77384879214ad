#include <atomic>
#include <cmath>

#include "doctest.h"
#include "nvmri/constants.hpp"
#include "nvmri/dtwa.hpp"
#include "nvmri/errors.hpp"

using namespace nvmri;

namespace {

Vec3 rodrigues(const Vec3& v, const Vec3& axis, double angle) {
    const Vec3 n = normalized(axis);
    return v * std::cos(angle) + cross(n, v) * std::sin(angle) + n * (dot(n, v) * (1 - std::cos(angle)));
}

SpinEnsemble boxEnsemble(std::size_t n, std::uint64_t seed) {
    const double L = std::cbrt(n / nvGroupDensity(15.0));
    return samplePositionsCount({Boundary::PeriodicBox, {L, L, L}}, n, 2.2, seed);
}

SpinEnsemble pair(const Vec3& d) {
    SpinEnsemble e;
    e.group = nvGroup(1);
    e.region = {Boundary::OpenNanobeam, {100, 100, 100}};
    e.positions = {{10, 10, 10}, Vec3{10, 10, 10} + d};
    e.polarizations = {1.0, 1.0};
    return e;
}

}  // namespace

TEST_SUITE("dtwa") {

TEST_CASE("two-spin Heisenberg precession") {
    const auto e = pair(nvGroup(1).axis * 5.0);
    const auto c = buildCouplings(e, xxzFromLambda(0.0));
    const double J = dipolarCoupling(nvGroup(1).axis * 5.0, nvGroup(1).axis);
    CHECK(c.J(0, 1) == J);
    auto b = sampleInitial(e, 0.7, 1.0, 3, 6);
    std::vector<Vec3> s1, s2;
    for (int t = 0; t < 6; ++t) {
        s1.push_back(b.spin(t, 0));
        s2.push_back(b.spin(t, 1));
    }
    // s1 precesses about S = s1 + s2 at J g0 |S|
    double omegaMin = INFINITY;
    for (int t = 0; t < 6; ++t) {
        const double w = J * (2.0 / 3.0) * norm(s1[t] + s2[t]);
        if (w > 0) omegaMin = std::min(omegaMin, w);
    }
    const double T = 10 * 2 * M_PI / omegaMin * 1e6;
    IntegratorSettings st;
    st.dtFactor = 0.01;
    double err = 0.0;
    for (int k = 1; k <= 20; ++k) {
        evolve(b, c, T / 20, st);
        const double tUs = b.timeUs;
        for (int t = 0; t < 6; ++t) {
            const Vec3 S = s1[t] + s2[t];
            const Vec3 ref = norm(S) == 0 ? s1[t] : rodrigues(s1[t], S, J * (2.0 / 3.0) * norm(S) * tUs * 1e-6);
            err = std::max(err, norm(b.spin(t, 0) - ref));
        }
    }
    CHECK(err <= 1e-6);
}

TEST_CASE("sampling statistics") {
    auto e = boxEnsemble(40, 2);
    for (std::size_t j = 0; j < e.size(); ++j) e.polarizations[j] = j % 2 ? 1.0 : 0.3;
    const double theta = 1.1, P = 0.8;
    const int nt = 4000;
    const auto b = sampleInitial(e, theta, P, 9, nt);
    CHECK(b.blocks.size() == (nt + kDefaultBlockSize - 1) / kDefaultBlockSize);
    const Vec3 n{std::sin(theta), 0, std::cos(theta)};
    for (int j = 0; j < 40; j += 7) {
        double m = 0, m2 = 0, my = 0;
        for (int t = 0; t < nt; ++t) {
            const Vec3 s = b.spin(t, j);
            CHECK(std::abs(norm(s) - std::sqrt(3.0) / 2) < 1e-15);
            const double a = dot(s, n);
            m += a;
            m2 += a * a;
            my += s.y;
        }
        const double expect = 0.5 * P * e.polarizations[j];
        const double sd = std::sqrt((0.25 - expect * expect) / nt);
        CHECK(std::abs(m / nt - expect) < 5 * sd);
        CHECK(m2 / nt == doctest::Approx(0.25));
        CHECK(std::abs(my / nt) < 5 * 0.5 / std::sqrt(nt));
    }
    CHECK_THROWS_AS(sampleInitial(e, 4.0, 1.0, 1, 4), InvalidArgument);
    CHECK_THROWS_AS(sampleInitial(e, 1.0, 1.5, 1, 4), InvalidArgument);
    CHECK_THROWS_AS(sampleInitial(e, 1.0, 1.0, 1, 0), InvalidArgument);
}

TEST_CASE("sampling depends only on seed and trajectory index") {
    const auto e = boxEnsemble(30, 4);
    const auto a = sampleInitial(e, 0.5, 1.0, 77, 50, 32);
    const auto b = sampleInitial(e, 0.5, 1.0, 77, 50, 7);
    for (int t = 0; t < 50; ++t)
        for (int j = 0; j < 30; ++j) CHECK(a.spin(t, j) == b.spin(t, j));
}

TEST_CASE("conservation laws under the SU(2) point") {
    const auto e = boxEnsemble(100, 3);
    const auto c = buildCouplings(e, xxzFromLambda(0.0));
    auto b = sampleInitial(e, M_PI / 4, 1.0, 5, 10);
    std::vector<Vec3> S0;
    for (int t = 0; t < 10; ++t) S0.push_back(totalSpin(b, t));
    const double Jtyp = constants::J0 * nvGroupDensity(15.0);
    IntegratorSettings st;
    st.dtFactor = 0.03;
    evolve(b, c, 10.0 / Jtyp * 1e6, st);
    double drift = 0;
    for (int t = 0; t < 10; ++t) drift = std::max(drift, norm(totalSpin(b, t) - S0[t]) / norm(S0[t]));
    CHECK(drift <= 1e-6);
    CHECK(maxNormDeviation(b) <= 1e-6);
}

TEST_CASE("XXZ keeps energy and total S^z") {
    const auto e = boxEnsemble(80, 5);
    const auto c = buildCouplings(e, xxzFromLambda(2.0));
    auto b = sampleInitial(e, 1.0, 1.0, 6, 8);
    const auto E0 = classicalEnergy(b, c);
    std::vector<double> z0;
    for (int t = 0; t < 8; ++t) z0.push_back(totalSpin(b, t).z);
    IntegratorSettings st;
    st.dtFactor = 0.03;
    evolve(b, c, 20.0, st);
    const auto E1 = classicalEnergy(b, c);
    // single trajectories can sit near E = 0, so compare against the ensemble energy scale
    double scale = 0;
    for (double v : E0) scale += std::abs(v) / 8;
    for (int t = 0; t < 8; ++t) {
        CHECK(std::abs(E1[t] - E0[t]) <= 1e-6 * scale);
        CHECK(std::abs(totalSpin(b, t).z - z0[t]) < 1e-12);
    }
}

TEST_CASE("couplings") {
    const auto e = boxEnsemble(60, 8);
    const auto c = buildCouplings(e, xxzFromLambda(1.0));
    CHECK((c.J - c.J.transpose()).norm() == 0.0);
    CHECK(c.J.diagonal().norm() == 0.0);
    CHECK(c.g0 == doctest::Approx(4.0 / 3.0));
    CHECK(c.g2 == doctest::Approx(-2.0));
    CHECK(c.maxRate() == doctest::Approx(c.J.cwiseAbs().maxCoeff() * 4.0 / 3.0));
    const Vec3 Q{0.05, 0.0, -0.02};
    const auto r = buildCouplings(e, xxzFromLambda(1.0), Q);
    CHECK(r.rotated);
    CHECK((r.Js + r.Js.transpose()).norm() < 1e-6);
    CHECK(((r.Jc.array().square() + r.Js.array().square()) - r.J.array().square()).abs().maxCoeff() <
          1e-9 * r.J.cwiseAbs().maxCoeff() * r.J.cwiseAbs().maxCoeff());

    auto close = pair({1.0, 0.0, 0.0});
    close.uvCutoff = 2.2;
    const auto cc = buildCouplings(close, xxzFromLambda(0.0));
    CHECK(cc.droppedPairs == 1);
    CHECK(cc.J(0, 1) == 0.0);
}

TEST_CASE("byte-identical evolution across worker counts") {
    const auto e = boxEnsemble(80, 12);
    const auto c = buildCouplings(e, xxzFromLambda(2.0));
    auto a = sampleInitial(e, 0.9, 1.0, 21, 70, 16);
    auto b = sampleInitial(e, 0.9, 1.0, 21, 70, 16);
    evolve(a, c, 2.0, {}, 1);
    evolve(b, c, 2.0, {}, 3);
    for (std::size_t k = 0; k < a.blocks.size(); ++k) CHECK(a.blocks[k].s == b.blocks[k].s);
    const auto ma = measureFourierMode(a, e, {0.1, 0, 0});
    const auto mb = measureFourierMode(b, e, {0.1, 0, 0});
    CHECK(ma.mean == mb.mean);
    CHECK(ma.stderrIm == mb.stderrIm);
}

TEST_CASE("step-size convergence of the mode signal") {
    const auto e = boxEnsemble(200, 10);
    const auto c = buildCouplings(e, xxzFromLambda(2.0), Vec3{0.05, 0.05, 0.05});
    std::vector<double> times{0.25, 0.5, 1.0};
    std::vector<Vec3> qs{{0.05, 0.05, 0.05}};
    IntegratorSettings coarse, fine;
    coarse.dtFactor = 0.2;
    fine.dtFactor = 0.04;
    auto b1 = sampleInitial(e, M_PI / 4, 1.0, 3, 8);
    auto b2 = sampleInitial(e, M_PI / 4, 1.0, 3, 8);
    const auto r1 = fourierModeSeries(b1, c, e, times, qs, coarse);
    const auto r2 = fourierModeSeries(b2, c, e, times, qs, fine);
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double scale = std::abs(r2[k][0].mean);
        CHECK(std::abs(r1[k][0].mean - r2[k][0].mean) < 1e-3 * scale);
    }
}

TEST_CASE("Fourier mode and reductions") {
    const auto e = boxEnsemble(25, 6);
    const auto b = sampleInitial(e, 1.2, 1.0, 4, 9);
    const Vec3 Q{0.03, -0.07, 0.11};
    const auto per = fourierModePerTrajectory(b, e, Q);
    REQUIRE(per.size() == 9);
    double sr = 0, si = 0;
    for (int t = 0; t < 9; ++t) {
        std::complex<double> z;
        for (int j = 0; j < 25; ++j) {
            const Vec3 s = b.spin(t, j);
            z += std::polar(1.0, -dot(Q, e.positions[j])) * std::complex<double>(s.x, s.y);
        }
        CHECK(std::abs(per[t] - z) < 1e-13);
        sr += z.real();
        si += z.imag();
    }
    const auto m = measureFourierMode(b, e, Q);
    CHECK(std::abs(m.mean - std::complex<double>(sr / 9, si / 9)) < 1e-13);

    const std::complex<double> v[] = {{1, 2}, {3, -1}, {2, 0}, {-2, 3}};
    const auto r = reduceSamples(v, 4);
    CHECK(r.mean == std::complex<double>(1.0, 1.0));
    // unbiased sample variance / n
    const double varRe = (0 + 4 + 1 + 9) / 3.0, varIm = (1 + 4 + 1 + 4) / 3.0;
    CHECK(r.stderrRe == doctest::Approx(std::sqrt(varRe / 4)));
    CHECK(r.stderrIm == doctest::Approx(std::sqrt(varIm / 4)));
}

TEST_CASE("rotations") {
    const auto e = boxEnsemble(20, 7);
    auto b = sampleInitial(e, 0.4, 1.0, 2, 5);
    auto c = b;
    std::vector<double> phi(20, 0.37);
    rotateAboutZ(b.blocks[0], phi);
    rotateGlobal(c.blocks[0], {0, 0, 1}, 0.37);
    for (int t = 0; t < 5; ++t)
        for (int j = 0; j < 20; ++j) {
            CHECK(norm(b.spin(t, j) - c.spin(t, j)) < 1e-15);
            CHECK(std::abs(norm(b.spin(t, j)) - std::sqrt(3.0) / 2) < 1e-15);
        }
    rotateGlobal(c.blocks[0], {1, 2, 3}, 1.1);
    rotateGlobal(c.blocks[0], {1, 2, 3}, -1.1);
    for (int t = 0; t < 5; ++t)
        for (int j = 0; j < 20; ++j) CHECK(norm(b.spin(t, j) - c.spin(t, j)) < 1e-14);
}

TEST_CASE("parallelFor visits every index once") {
    std::vector<std::atomic<int>> hits(97);
    parallelFor(97, 4, [&](int i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
}

}  // TEST_SUITE
