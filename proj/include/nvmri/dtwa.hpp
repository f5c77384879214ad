#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "nvmri/geometry.hpp"
#include "nvmri/hamiltonian.hpp"
#include "nvmri/vec3.hpp"

namespace nvmri {

/// One block of trajectories: N x 3b matrix laid out as [sx | sy | sz].
struct TrajectoryBlock {
    Eigen::MatrixXd s;
    int count = 0;  // trajectories in this block
    int first = 0;  // global index of the first trajectory
};

struct TrajectoryBatch {
    std::vector<TrajectoryBlock> blocks;
    int numTrajectories = 0;
    int numSpins = 0;
    std::uint64_t masterSeed = 0;
    double timeUs = 0.0;
    Vec3 frameQ;  // nonzero when spins are stored in a co-rotating spiral frame

    /// Spin j of trajectory t.
    Vec3 spin(int t, int j) const;
    void setSpin(int t, int j, const Vec3& v);
};

inline constexpr int kDefaultBlockSize = 32;

/// Discrete Wigner sampling: orientation +-n(theta) with probability (1 + P p_j)/2, transverse
/// components +-1/2 each. n(theta) = (sin theta, 0, cos theta).
TrajectoryBatch sampleInitial(const SpinEnsemble& ens, double theta, double polarization,
                              std::uint64_t seed, int numTrajectories,
                              int blockSize = kDefaultBlockSize);

struct CouplingMatrix {
    Eigen::MatrixXd J;   // rad/s, symmetric, zero diagonal
    Eigen::MatrixXd Jc;  // J cos(Q.(r_l - r_j)), rotated frame only
    Eigen::MatrixXd Js;  // J sin(Q.(r_l - r_j)), antisymmetric
    double g0 = 2.0 / 3.0;
    double g2 = 0.0;
    Vec3 frameQ;
    bool rotated = false;
    int droppedPairs = 0;  // pairs closer than the uv cutoff, set to zero

    int size() const { return static_cast<int>(J.rows()); }
    double transverseScale() const { return g0; }
    double longitudinalScale() const { return g0 + g2; }
    /// max |J_ij| max(|g0|, |g0+g2|)
    double maxRate() const;
};

CouplingMatrix buildCouplings(const SpinEnsemble& ens, const XXZModel& model,
                              std::optional<Vec3> frameQ = std::nullopt);

/// Fields for one trajectory; spins is N x 3.
Eigen::MatrixXd meanField(const Eigen::MatrixXd& spins, const CouplingMatrix& c);

struct IntegratorSettings {
    enum class Method { RK4, DormandPrince45 };
    Method method = Method::RK4;
    double dtFactor = 0.02;  // dt = dtFactor / maxRate
    double dtUs = 0.0;       // explicit step override when > 0
    double rtol = 1e-8;
    double atol = 1e-10;
    double minStepUs = 1e-12;
};

/// Classical energy 1/2 sum s.b per trajectory (rad/s).
std::vector<double> classicalEnergy(const TrajectoryBatch& batch, const CouplingMatrix& c);

void evolve(TrajectoryBatch& batch, const CouplingMatrix& c, double durationUs,
            const IntegratorSettings& settings = {}, int workers = 1);

/// Per-trajectory Fourier mode sum_j e^{-i Q'.r_j} (s^x + i s^y), in lab coordinates.
std::vector<std::complex<double>> fourierModePerTrajectory(const TrajectoryBatch& batch,
                                                           const SpinEnsemble& ens,
                                                           const Vec3& Qp);

struct ModeEstimate {
    std::complex<double> mean;
    double stderrRe = 0.0;
    double stderrIm = 0.0;
};

/// Trajectory average, reduced in index order.
ModeEstimate measureFourierMode(const TrajectoryBatch& batch, const SpinEnsemble& ens,
                                const Vec3& Qp);

/// Total spin vector of one trajectory.
Vec3 totalSpin(const TrajectoryBatch& batch, int t);
/// max_j,t | |s_j| - sqrt(3)/2 |
double maxNormDeviation(const TrajectoryBatch& batch);

/// Per-block observer called after each sample time: (sample index, block).
using BlockObserver = std::function<void(std::size_t, const TrajectoryBlock&)>;

/// Evolves every block through the sample times; blocks run in parallel, each block
/// sequentially. Observer calls for one block are serialized; blocks may interleave.
void evolveSeries(TrajectoryBatch& batch, const CouplingMatrix& c, const std::vector<double>& timesUs,
                  const BlockObserver& observer, const IntegratorSettings& settings = {},
                  int workers = 1);

/// Time series of trajectory-averaged modes, shape [time][Q'].
std::vector<std::vector<ModeEstimate>> fourierModeSeries(
    TrajectoryBatch& batch, const CouplingMatrix& c, const SpinEnsemble& ens,
    const std::vector<double>& timesUs, const std::vector<Vec3>& Qps,
    const IntegratorSettings& settings = {}, int workers = 1,
    const std::function<void(TrajectoryBlock&)>& beforeMeasure = {});

/// Per-trajectory values, flat layout [(time * nQ + q) * numTrajectories + trajectory].
std::vector<std::complex<double>> fourierModeSeriesRaw(
    TrajectoryBatch& batch, const CouplingMatrix& c, const SpinEnsemble& ens,
    const std::vector<double>& timesUs, const std::vector<Vec3>& Qps,
    const IntegratorSettings& settings = {}, int workers = 1,
    const std::function<void(TrajectoryBlock&)>& beforeMeasure = {});

/// Mean and standard error of per-trajectory samples, summed in index order.
ModeEstimate reduceSamples(const std::complex<double>* values, int count);

/// Rotate each spin about z by angle phi_j (s+ -> e^{i phi_j} s+).
void rotateAboutZ(TrajectoryBlock& block, const std::vector<double>& phi);
/// Global rotation about an arbitrary axis applied to every spin.
void rotateGlobal(TrajectoryBlock& block, const Vec3& axis, double angle);

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallelFor(int n, int workers, const std::function<void(int)>& fn);

}  // namespace nvmri
