#include "nvmri/dtwa.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "nvmri/errors.hpp"
#include "nvmri/random.hpp"

namespace nvmri {

Vec3 TrajectoryBatch::spin(int t, int j) const {
    const auto& b = blocks[t / blocks.front().count];
    const int k = t - b.first;
    const int w = b.count;
    return {b.s(j, k), b.s(j, w + k), b.s(j, 2 * w + k)};
}

void TrajectoryBatch::setSpin(int t, int j, const Vec3& v) {
    auto& b = blocks[t / blocks.front().count];
    const int k = t - b.first;
    const int w = b.count;
    b.s(j, k) = v.x;
    b.s(j, w + k) = v.y;
    b.s(j, 2 * w + k) = v.z;
}

TrajectoryBatch sampleInitial(const SpinEnsemble& ens, double theta, double polarization,
                              std::uint64_t seed, int numTrajectories, int blockSize) {
    if (numTrajectories < 1) throw InvalidArgument("need at least one trajectory");
    if (blockSize < 1) throw InvalidArgument("block size must be positive");
    if (!(theta >= 0.0 && theta <= 3.14159265358979324))
        throw InvalidArgument("Bloch angle must lie in [0, pi]");
    if (!(polarization >= 0.0 && polarization <= 1.0))
        throw InvalidArgument("polarization must lie in [0, 1]");

    const int N = static_cast<int>(ens.size());
    TrajectoryBatch batch;
    batch.numTrajectories = numTrajectories;
    batch.numSpins = N;
    batch.masterSeed = seed;

    const Vec3 n{std::sin(theta), 0.0, std::cos(theta)};
    const Vec3 e1{std::cos(theta), 0.0, -std::sin(theta)};
    const Vec3 e2{0.0, 1.0, 0.0};

    for (int first = 0; first < numTrajectories; first += blockSize) {
        TrajectoryBlock b;
        b.first = first;
        b.count = std::min(blockSize, numTrajectories - first);
        b.s.resize(N, 3 * b.count);
        for (int k = 0; k < b.count; ++k) {
            Rng rng(streamSeed(seed, static_cast<std::uint64_t>(first + k)));
            for (int j = 0; j < N; ++j) {
                const double pj = polarization * ens.polarizations[j];
                const double sign = coinFlip(rng, 0.5 * (1.0 + pj)) ? 1.0 : -1.0;
                const double a = (rng() >> 63) ? 0.5 : -0.5;
                const double c = (rng() >> 63) ? 0.5 : -0.5;
                const Vec3 v = n * (0.5 * sign) + e1 * a + e2 * c;
                b.s(j, k) = v.x;
                b.s(j, b.count + k) = v.y;
                b.s(j, 2 * b.count + k) = v.z;
            }
        }
        batch.blocks.push_back(std::move(b));
    }
    return batch;
}

double CouplingMatrix::maxRate() const {
    const double jm = J.size() ? J.cwiseAbs().maxCoeff() : 0.0;
    return jm * std::max(std::abs(g0), std::abs(g0 + g2));
}

CouplingMatrix buildCouplings(const SpinEnsemble& ens, const XXZModel& model,
                              std::optional<Vec3> frameQ) {
    if (ens.size() == 0) throw InvalidArgument("empty ensemble");
    const int N = static_cast<int>(ens.size());
    CouplingMatrix c;
    c.g0 = model.g0;
    c.g2 = model.g2;
    c.J = Eigen::MatrixXd::Zero(N, N);
    const Vec3 eta = ens.group.axis;
    for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j) {
            const Vec3 d = ens.displacement(i, j);
            const double r = norm(d);
            if (r < ens.uvCutoff || r == 0.0) {
                ++c.droppedPairs;
                continue;
            }
            const double v = dipolarCoupling(d, eta);
            c.J(i, j) = v;
            c.J(j, i) = v;
        }
    if (frameQ) {
        c.rotated = true;
        c.frameQ = *frameQ;
        c.Jc.resize(N, N);
        c.Js.resize(N, N);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                const double ph = dot(*frameQ, ens.positions[j] - ens.positions[i]);
                c.Jc(i, j) = c.J(i, j) * std::cos(ph);
                c.Js(i, j) = c.J(i, j) * std::sin(ph);
            }
    }
    return c;
}

namespace {

// B for a block; S is N x 3w. Result scaled to rad/s.
void fields(const CouplingMatrix& c, const Eigen::MatrixXd& S, int w, Eigen::MatrixXd& B) {
    const int N = static_cast<int>(S.rows());
    B.resize(N, 3 * w);
    if (!c.rotated) {
        B.noalias() = c.J * S;
        B.leftCols(2 * w) *= c.g0;
        B.rightCols(w) *= (c.g0 + c.g2);
        return;
    }
    B.leftCols(2 * w).noalias() = c.Jc * S.leftCols(2 * w);
    B.middleCols(0, w).noalias() -= c.Js * S.middleCols(w, w);
    B.middleCols(w, w).noalias() += c.Js * S.middleCols(0, w);
    B.leftCols(2 * w) *= c.g0;
    B.rightCols(w).noalias() = c.J * S.rightCols(w);
    B.rightCols(w) *= (c.g0 + c.g2);
}

// dS = B x S, in per-microsecond units.
void derivative(const CouplingMatrix& c, const Eigen::MatrixXd& S, int w, Eigen::MatrixXd& B,
                Eigen::MatrixXd& dS) {
    fields(c, S, w, B);
    const int N = static_cast<int>(S.rows());
    dS.resize(N, 3 * w);
    const auto X = S.middleCols(0, w), Y = S.middleCols(w, w), Z = S.middleCols(2 * w, w);
    const auto Bx = B.middleCols(0, w), By = B.middleCols(w, w), Bz = B.middleCols(2 * w, w);
    constexpr double us = 1e-6;
    dS.middleCols(0, w) = us * (By.cwiseProduct(Z) - Bz.cwiseProduct(Y));
    dS.middleCols(w, w) = us * (Bz.cwiseProduct(X) - Bx.cwiseProduct(Z));
    dS.middleCols(2 * w, w) = us * (Bx.cwiseProduct(Y) - By.cwiseProduct(X));
}

struct Workspace {
    Eigen::MatrixXd B, k1, k2, k3, k4, k5, k6, k7, tmp, y5;
};

void rk4Step(const CouplingMatrix& c, Eigen::MatrixXd& S, int w, double h, Workspace& ws) {
    derivative(c, S, w, ws.B, ws.k1);
    ws.tmp = S + (0.5 * h) * ws.k1;
    derivative(c, ws.tmp, w, ws.B, ws.k2);
    ws.tmp = S + (0.5 * h) * ws.k2;
    derivative(c, ws.tmp, w, ws.B, ws.k3);
    ws.tmp = S + h * ws.k3;
    derivative(c, ws.tmp, w, ws.B, ws.k4);
    S += (h / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
}

void rk4Block(const CouplingMatrix& c, TrajectoryBlock& b, double duration,
              const IntegratorSettings& st, Workspace& ws) {
    if (duration <= 0.0) return;
    double dt = st.dtUs;
    if (dt <= 0.0) {
        const double rate = c.maxRate() * 1e-6;
        if (rate == 0.0) return;  // no couplings, nothing moves
        dt = st.dtFactor / rate;
    }
    const long steps = static_cast<long>(std::ceil(duration / dt - 1e-12));
    const double h = duration / static_cast<double>(std::max(1L, steps));
    for (long k = 0; k < std::max(1L, steps); ++k) rk4Step(c, b.s, b.count, h, ws);
}

// Dormand-Prince 5(4) with standard step control.
void dopriBlock(const CouplingMatrix& c, TrajectoryBlock& b, double duration,
                const IntegratorSettings& st, Workspace& ws) {
    if (duration <= 0.0) return;
    const int w = b.count;
    constexpr double a21 = 1.0 / 5, a31 = 3.0 / 40, a32 = 9.0 / 40, a41 = 44.0 / 45,
                     a42 = -56.0 / 15, a43 = 32.0 / 9, a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                     a53 = 64448.0 / 6561, a54 = -212.0 / 729, a61 = 9017.0 / 3168,
                     a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656, b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                     b5 = -2187.0 / 6784, b6 = 11.0 / 84, e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                     e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    const double rate = std::max(c.maxRate() * 1e-6, 1e-300);
    double h = std::min(duration, 0.1 / rate);
    double t = 0.0;
    derivative(c, b.s, w, ws.B, ws.k1);
    while (t < duration) {
        if (t + h > duration) h = duration - t;
        if (h < st.minStepUs) throw NumericalError("adaptive step size underflow");
        ws.tmp = b.s + h * a21 * ws.k1;
        derivative(c, ws.tmp, w, ws.B, ws.k2);
        ws.tmp = b.s + h * (a31 * ws.k1 + a32 * ws.k2);
        derivative(c, ws.tmp, w, ws.B, ws.k3);
        ws.tmp = b.s + h * (a41 * ws.k1 + a42 * ws.k2 + a43 * ws.k3);
        derivative(c, ws.tmp, w, ws.B, ws.k4);
        ws.tmp = b.s + h * (a51 * ws.k1 + a52 * ws.k2 + a53 * ws.k3 + a54 * ws.k4);
        derivative(c, ws.tmp, w, ws.B, ws.k5);
        ws.tmp = b.s + h * (a61 * ws.k1 + a62 * ws.k2 + a63 * ws.k3 + a64 * ws.k4 + a65 * ws.k5);
        derivative(c, ws.tmp, w, ws.B, ws.k6);
        ws.y5 = b.s + h * (b1 * ws.k1 + b3 * ws.k3 + b4 * ws.k4 + b5 * ws.k5 + b6 * ws.k6);
        derivative(c, ws.y5, w, ws.B, ws.k7);
        ws.tmp = h * (e1 * ws.k1 + e3 * ws.k3 + e4 * ws.k4 + e5 * ws.k5 + e6 * ws.k6 + e7 * ws.k7);
        const Eigen::ArrayXXd scale =
            st.atol + st.rtol * b.s.cwiseAbs().cwiseMax(ws.y5.cwiseAbs()).array();
        const double err = (ws.tmp.array() / scale).abs().maxCoeff();
        if (std::isfinite(err) && err <= 1.0) {
            t += h;
            b.s.swap(ws.y5);
            ws.k1.swap(ws.k7);
        }
        const double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        h *= std::clamp(std::isfinite(fac) ? fac : 0.2, 0.2, 5.0);
    }
}

void advanceBlock(const CouplingMatrix& c, TrajectoryBlock& b, double duration,
                  const IntegratorSettings& st, Workspace& ws) {
    if (st.method == IntegratorSettings::Method::RK4) rk4Block(c, b, duration, st, ws);
    else dopriBlock(c, b, duration, st, ws);
}

}  // namespace

void parallelFor(int n, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex errMutex;
    std::vector<std::thread> pool;
    const int nt = std::min(workers, n);
    for (int w = 0; w < nt; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(errMutex);
                    if (!error) error = std::current_exception();
                    next.store(n);
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

Eigen::MatrixXd meanField(const Eigen::MatrixXd& spins, const CouplingMatrix& c) {
    if (spins.rows() != c.size() || spins.cols() != 3)
        throw InvalidArgument("meanField: spins must be N x 3 matching the couplings");
    Eigen::MatrixXd B;
    fields(c, spins, 1, B);
    return B;
}

std::vector<double> classicalEnergy(const TrajectoryBatch& batch, const CouplingMatrix& c) {
    std::vector<double> E(batch.numTrajectories, 0.0);
    for (const auto& b : batch.blocks) {
        Eigen::MatrixXd B;
        fields(c, b.s, b.count, B);
        for (int k = 0; k < b.count; ++k) {
            double e = 0.0;
            for (int comp = 0; comp < 3; ++comp)
                e += b.s.col(comp * b.count + k).dot(B.col(comp * b.count + k));
            E[b.first + k] = 0.5 * e;
        }
    }
    return E;
}

void evolve(TrajectoryBatch& batch, const CouplingMatrix& c, double durationUs,
            const IntegratorSettings& settings, int workers) {
    if (durationUs < 0.0) throw InvalidArgument("duration must be >= 0");
    evolveSeries(batch, c, {batch.timeUs + durationUs}, {}, settings, workers);
}

void evolveSeries(TrajectoryBatch& batch, const CouplingMatrix& c,
                  const std::vector<double>& timesUs, const BlockObserver& observer,
                  const IntegratorSettings& settings, int workers) {
    if (c.size() != batch.numSpins) throw InvalidArgument("coupling size does not match batch");
    for (std::size_t k = 0; k < timesUs.size(); ++k) {
        if (timesUs[k] < batch.timeUs || (k > 0 && timesUs[k] < timesUs[k - 1]))
            throw InvalidArgument("sample times must be sorted and not precede the batch time");
    }
    const double t0 = batch.timeUs;
    parallelFor(static_cast<int>(batch.blocks.size()), workers, [&](int bi) {
        Workspace ws;
        auto& b = batch.blocks[bi];
        double t = t0;
        for (std::size_t k = 0; k < timesUs.size(); ++k) {
            advanceBlock(c, b, timesUs[k] - t, settings, ws);
            t = timesUs[k];
            if (observer) observer(k, b);
        }
    });
    if (!timesUs.empty()) batch.timeUs = timesUs.back();
}

namespace {

void blockModes(const TrajectoryBlock& b, const std::vector<double>& cs,
                const std::vector<double>& sn, std::complex<double>* out) {
    const int N = static_cast<int>(b.s.rows());
    const Eigen::Map<const Eigen::VectorXd> C(cs.data(), N), S(sn.data(), N);
    for (int k = 0; k < b.count; ++k) {
        const auto sx = b.s.col(k);
        const auto sy = b.s.col(b.count + k);
        // e^{-i phi} (sx + i sy)
        const double re = C.dot(sx) + S.dot(sy);
        const double im = C.dot(sy) - S.dot(sx);
        out[k] = {re, im};
    }
}

void phaseTables(const SpinEnsemble& ens, const Vec3& q, std::vector<double>& cs,
                 std::vector<double>& sn) {
    const std::size_t N = ens.size();
    cs.resize(N);
    sn.resize(N);
    for (std::size_t j = 0; j < N; ++j) {
        const double ph = dot(q, ens.positions[j]);
        cs[j] = std::cos(ph);
        sn[j] = std::sin(ph);
    }
}

}  // namespace

ModeEstimate reduceSamples(const std::complex<double>* v, int n) {
    ModeEstimate m;
    std::complex<double> s = 0.0;
    for (int t = 0; t < n; ++t) s += v[t];
    m.mean = s / static_cast<double>(n);
    if (n > 1) {
        double vr = 0.0, vi = 0.0;
        for (int t = 0; t < n; ++t) {
            const auto d = v[t] - m.mean;
            vr += d.real() * d.real();
            vi += d.imag() * d.imag();
        }
        m.stderrRe = std::sqrt(vr / (n - 1) / n);
        m.stderrIm = std::sqrt(vi / (n - 1) / n);
    }
    return m;
}

std::vector<std::complex<double>> fourierModePerTrajectory(const TrajectoryBatch& batch,
                                                           const SpinEnsemble& ens,
                                                           const Vec3& Qp) {
    std::vector<double> cs, sn;
    phaseTables(ens, Qp - batch.frameQ, cs, sn);
    std::vector<std::complex<double>> out(batch.numTrajectories);
    for (const auto& b : batch.blocks) blockModes(b, cs, sn, out.data() + b.first);
    return out;
}

ModeEstimate measureFourierMode(const TrajectoryBatch& batch, const SpinEnsemble& ens,
                                const Vec3& Qp) {
    const auto v = fourierModePerTrajectory(batch, ens, Qp);
    return reduceSamples(v.data(), static_cast<int>(v.size()));
}

std::vector<std::complex<double>> fourierModeSeriesRaw(
    TrajectoryBatch& batch, const CouplingMatrix& c, const SpinEnsemble& ens,
    const std::vector<double>& timesUs, const std::vector<Vec3>& Qps,
    const IntegratorSettings& settings, int workers,
    const std::function<void(TrajectoryBlock&)>& beforeMeasure) {
    const std::size_t nq = Qps.size(), nt = timesUs.size();
    const int ntraj = batch.numTrajectories;
    std::vector<std::vector<double>> cs(nq), sn(nq);
    for (std::size_t q = 0; q < nq; ++q) phaseTables(ens, Qps[q] - batch.frameQ, cs[q], sn[q]);
    // each block writes a disjoint slice
    std::vector<std::complex<double>> store(nt * nq * ntraj);
    evolveSeries(
        batch, c, timesUs,
        [&](std::size_t k, const TrajectoryBlock& b) {
            const TrajectoryBlock* src = &b;
            TrajectoryBlock copy;
            if (beforeMeasure) {
                copy = b;
                beforeMeasure(copy);
                src = &copy;
            }
            for (std::size_t q = 0; q < nq; ++q)
                blockModes(*src, cs[q], sn[q], store.data() + (k * nq + q) * ntraj + b.first);
        },
        settings, workers);
    return store;
}

std::vector<std::vector<ModeEstimate>> fourierModeSeries(
    TrajectoryBatch& batch, const CouplingMatrix& c, const SpinEnsemble& ens,
    const std::vector<double>& timesUs, const std::vector<Vec3>& Qps,
    const IntegratorSettings& settings, int workers,
    const std::function<void(TrajectoryBlock&)>& beforeMeasure) {
    const std::size_t nq = Qps.size(), nt = timesUs.size();
    const int ntraj = batch.numTrajectories;
    const auto store =
        fourierModeSeriesRaw(batch, c, ens, timesUs, Qps, settings, workers, beforeMeasure);
    std::vector<std::vector<ModeEstimate>> out(nt, std::vector<ModeEstimate>(nq));
    for (std::size_t k = 0; k < nt; ++k)
        for (std::size_t q = 0; q < nq; ++q)
            out[k][q] = reduceSamples(store.data() + (k * nq + q) * ntraj, ntraj);
    return out;
}

Vec3 totalSpin(const TrajectoryBatch& batch, int t) {
    const auto& b = batch.blocks[t / batch.blocks.front().count];
    const int k = t - b.first;
    return {b.s.col(k).sum(), b.s.col(b.count + k).sum(), b.s.col(2 * b.count + k).sum()};
}

double maxNormDeviation(const TrajectoryBatch& batch) {
    const double target = std::sqrt(3.0) / 2.0;
    double worst = 0.0;
    for (const auto& b : batch.blocks) {
        const int w = b.count;
        const Eigen::ArrayXXd n2 = b.s.leftCols(w).array().square() +
                                   b.s.middleCols(w, w).array().square() +
                                   b.s.rightCols(w).array().square();
        worst = std::max(worst, (n2.sqrt() - target).abs().maxCoeff());
    }
    return worst;
}

void rotateAboutZ(TrajectoryBlock& b, const std::vector<double>& phi) {
    const int w = b.count;
    for (int j = 0; j < b.s.rows(); ++j) {
        const double c = std::cos(phi[j]), s = std::sin(phi[j]);
        for (int k = 0; k < w; ++k) {
            const double x = b.s(j, k), y = b.s(j, w + k);
            b.s(j, k) = c * x - s * y;
            b.s(j, w + k) = s * x + c * y;
        }
    }
}

void rotateGlobal(TrajectoryBlock& b, const Vec3& axis, double angle) {
    const Vec3 n = normalized(axis);
    const double c = std::cos(angle), s = std::sin(angle);
    const int w = b.count;
    for (int j = 0; j < b.s.rows(); ++j)
        for (int k = 0; k < w; ++k) {
            const Vec3 v{b.s(j, k), b.s(j, w + k), b.s(j, 2 * w + k)};
            const Vec3 r = v * c + cross(n, v) * s + n * (dot(n, v) * (1.0 - c));
            b.s(j, k) = r.x;
            b.s(j, w + k) = r.y;
            b.s(j, 2 * w + k) = r.z;
        }
}

}  // namespace nvmri
