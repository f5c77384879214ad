#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "nvmri/dtwa.hpp"
#include "nvmri/geometry.hpp"
#include "nvmri/hamiltonian.hpp"

namespace nvmri {

struct SpiralSpec {
    Vec3 Q;                    // rad/nm
    double theta = 0.0;        // cone angle
    double windingTimeUs = 0.0;

    /// Q = tau * grad * gamma.
    static SpiralSpec fromGradient(const GradientSpec& g, double tauUs, double theta);
};

struct DecoherenceModel {
    double T2Us = 1.0;
    double stretch = 1.0;
    void validate() const;
};

/// exp(-(2 tau / T2)^p)
double decoherenceEnvelope(double tauUs, const DecoherenceModel& model);
/// Winding time that produces |Q| under a gradient of magnitude gradMag (mT/um).
double windingTimeFor(double Qmag, double gradMag);

/// Instantaneous winding: s+_j -> e^{+i Q.r_j} s+_j.
void wind(TrajectoryBatch& batch, const SpinEnsemble& ens, const Vec3& Q);

enum class EvolutionFrame { Lab, Rotated };

struct QuenchSettings {
    int numTrajectories = 100;
    std::uint64_t seed = 1;
    double polarization = 1.0;
    int blockSize = kDefaultBlockSize;
    int workers = 1;
    EvolutionFrame frame = EvolutionFrame::Lab;
    IntegratorSettings integrator;
    /// Early-time window for the phase-slope estimate, as a count of leading samples (>= 3).
    int earlySamples = 0;  // 0 means all samples
    /// Optional global rotation applied to both antipodes before readout (diagnostic).
    Vec3 spuriousAxis{0, 0, 1};
    double spuriousAngle = 0.0;
};

struct AntipodeTrace {
    double theta = 0.0;
    std::vector<std::complex<double>> plus;   // state along +n(theta)
    std::vector<std::complex<double>> minus;  // state along -n(theta)
    /// (S_plus - conj(S_minus)) / 2: imaginary parts average, real parts difference.
    std::vector<std::complex<double>> combined;
    std::vector<double> stderrIm;  // per-time standard error of Im combined
};

struct QuenchResult {
    Vec3 Q;  // wavevector actually wound, after commensuration
    std::vector<double> timesUs;
    std::vector<AntipodeTrace> pairs;
    double envelope = 1.0;
    // from the first pair
    double omega = 0.0;       // rad/s, damped-rotation fit
    double omegaErr = 0.0;
    double omegaEarly = 0.0;  // rad/s, early-time phase slope
    double omegaEarlyErr = 0.0;
    double amplitude = 0.0;   // max_t |Im combined|
    double fitDecayUs = 0.0;

    const std::vector<std::complex<double>>& combined() const { return pairs.front().combined; }
};

/// Combines antipodal traces.
std::vector<std::complex<double>> combineAntipodes(const std::vector<std::complex<double>>& plus,
                                                   const std::vector<std::complex<double>>& minus);

struct FrequencyEstimate {
    double omega = 0.0;
    double omegaErr = 0.0;
};
/// Slope of the unwrapped phase of the trace over the first `samples` points; times in us,
/// result in rad/s.
FrequencyEstimate earlyPhaseSlope(const std::vector<double>& timesUs,
                                  const std::vector<std::complex<double>>& trace, int samples);

/// Wind, evolve, unwind, measure at Q' = Q for each antipodal pair (theta, theta + pi).
/// Under periodic boundaries Q is first snapped to the reciprocal lattice of the box.
/// The second member of each pair is the exact negation of the first sample set.
QuenchResult runQuench(const SpinEnsemble& ens, const XXZModel& model, const SpiralSpec& spec,
                       const std::vector<double>& quenchTimesUs,
                       const std::vector<double>& pairAngles, const QuenchSettings& settings,
                       std::optional<DecoherenceModel> decoherence = std::nullopt);

struct ScanRow {
    double param = 0.0;
    double amplitude = 0.0;
    double omega = 0.0;
    double omegaErr = 0.0;
    double amplitudeIdeal = 0.0;  // wavevector scan only
};

/// Amplitude vs g_Z/g_XX for each ratio in the grid.
std::vector<ScanRow> anisotropyScan(const SpinEnsemble& ens, const SpiralSpec& spec,
                                    const std::vector<double>& ratioGrid,
                                    const std::vector<double>& quenchTimesUs,
                                    const QuenchSettings& settings);

/// Amplitude vs |Q| along `direction`: `amplitudeIdeal` without envelope, `amplitude` with the
/// T2 envelope evaluated at tau = |Q| / (gamma |grad|).
std::vector<ScanRow> wavevectorScan(const SpinEnsemble& ens, const XXZModel& model, double theta,
                                    const Vec3& direction, const std::vector<double>& Qmagnitudes,
                                    const std::vector<double>& quenchTimesUs,
                                    const QuenchSettings& settings,
                                    const DecoherenceModel& decoherence, double gradMag);

/// First |Q| at which amplitudeIdeal reaches `fraction` of its maximum, linearly interpolated.
double scanKnee(const std::vector<ScanRow>& rows, double fraction = 0.8);

}  // namespace nvmri
