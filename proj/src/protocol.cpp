#include "nvmri/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "nvmri/constants.hpp"
#include "nvmri/errors.hpp"
#include "nvmri/fitting.hpp"

namespace nvmri {

SpiralSpec SpiralSpec::fromGradient(const GradientSpec& g, double tauUs, double theta) {
    SpiralSpec s;
    s.Q = g.gradient * (tauUs * constants::windingFactor);
    s.theta = theta;
    s.windingTimeUs = tauUs;
    return s;
}

void DecoherenceModel::validate() const {
    if (!(T2Us > 0.0)) throw InvalidArgument("T2 must be positive");
    if (!(stretch > 0.0 && stretch <= 3.0)) throw InvalidArgument("stretch exponent must lie in (0, 3]");
}

double decoherenceEnvelope(double tauUs, const DecoherenceModel& model) {
    model.validate();
    if (tauUs < 0.0) throw InvalidArgument("winding time must be >= 0");
    return std::exp(-std::pow(2.0 * tauUs / model.T2Us, model.stretch));
}

double windingTimeFor(double Qmag, double gradMag) {
    if (!(gradMag > 0.0)) throw InvalidArgument("gradient magnitude must be positive");
    return std::abs(Qmag) / (constants::windingFactor * gradMag);
}

void wind(TrajectoryBatch& batch, const SpinEnsemble& ens, const Vec3& Q) {
    if (Q == Vec3{}) return;
    std::vector<double> phi(ens.size());
    for (std::size_t j = 0; j < ens.size(); ++j) phi[j] = dot(Q, ens.positions[j]);
    for (auto& b : batch.blocks) rotateAboutZ(b, phi);
}

std::vector<std::complex<double>> combineAntipodes(const std::vector<std::complex<double>>& plus,
                                                   const std::vector<std::complex<double>>& minus) {
    if (plus.size() != minus.size()) throw InvalidArgument("antipode traces differ in length");
    std::vector<std::complex<double>> c(plus.size());
    for (std::size_t k = 0; k < plus.size(); ++k) c[k] = 0.5 * (plus[k] - std::conj(minus[k]));
    return c;
}

FrequencyEstimate earlyPhaseSlope(const std::vector<double>& timesUs,
                                  const std::vector<std::complex<double>>& trace, int samples) {
    const int n = samples <= 0 ? static_cast<int>(trace.size())
                               : std::min<int>(samples, static_cast<int>(trace.size()));
    if (n < 3) throw InvalidArgument("early-time fit needs at least 3 samples");
    std::vector<double> t(timesUs.begin(), timesUs.begin() + n), ph(n);
    for (int k = 0; k < n; ++k) ph[k] = std::arg(trace[k]);
    ph = unwrapPhase(ph);
    const LineFit f = fitLine(t, ph);
    return {f.slope * 1e6, f.slopeErr * 1e6};
}

namespace {

TrajectoryBatch negated(const TrajectoryBatch& b) {
    TrajectoryBatch m = b;
    for (auto& blk : m.blocks) blk.s = -blk.s;
    return m;
}

}  // namespace

QuenchResult runQuench(const SpinEnsemble& ens, const XXZModel& model, const SpiralSpec& spec,
                       const std::vector<double>& quenchTimesUs,
                       const std::vector<double>& pairAngles, const QuenchSettings& settings,
                       std::optional<DecoherenceModel> decoherence) {
    if (pairAngles.empty()) throw InvalidArgument("runQuench needs at least one antipodal pair");
    if (quenchTimesUs.empty()) throw InvalidArgument("runQuench needs quench times");
    if (!std::is_sorted(quenchTimesUs.begin(), quenchTimesUs.end()) || quenchTimesUs.front() < 0.0)
        throw InvalidArgument("quench times must be sorted and nonnegative");

    const Vec3 Q = commensurateWavevector(spec.Q, ens.region);
    const bool rotated = settings.frame == EvolutionFrame::Rotated;
    const CouplingMatrix c =
        rotated ? buildCouplings(ens, model, Q) : buildCouplings(ens, model);

    QuenchResult res;
    res.Q = Q;
    res.timesUs = quenchTimesUs;
    if (decoherence) res.envelope = decoherenceEnvelope(spec.windingTimeUs, *decoherence);

    // readout error: a global rotation of the unwound state
    std::vector<double> unwindPhi(ens.size()), rewindPhi(ens.size());
    const Vec3 Qw = rotated ? Vec3{} : Q;
    for (std::size_t j = 0; j < ens.size(); ++j) {
        rewindPhi[j] = dot(Qw, ens.positions[j]);
        unwindPhi[j] = -rewindPhi[j];
    }
    std::function<void(TrajectoryBlock&)> spurious;
    if (settings.spuriousAngle != 0.0)
        spurious = [&](TrajectoryBlock& b) {
            rotateAboutZ(b, unwindPhi);
            rotateGlobal(b, settings.spuriousAxis, settings.spuriousAngle);
            rotateAboutZ(b, rewindPhi);
        };

    const std::size_t nt = quenchTimesUs.size();
    const int ntraj = settings.numTrajectories;
    for (double theta : pairAngles) {
        TrajectoryBatch plus = sampleInitial(ens, theta, settings.polarization, settings.seed, ntraj,
                                             settings.blockSize);
        TrajectoryBatch minus = negated(plus);
        for (TrajectoryBatch* b : {&plus, &minus}) {
            if (rotated) b->frameQ = Q;
            else wind(*b, ens, Q);
        }
        const auto rp = fourierModeSeriesRaw(plus, c, ens, quenchTimesUs, {Q},
                                             settings.integrator, settings.workers, spurious);
        const auto rm = fourierModeSeriesRaw(minus, c, ens, quenchTimesUs, {Q},
                                             settings.integrator, settings.workers, spurious);
        AntipodeTrace tr;
        tr.theta = theta;
        std::vector<std::complex<double>> comb(ntraj);
        for (std::size_t k = 0; k < nt; ++k) {
            const auto* p = rp.data() + k * ntraj;
            const auto* m = rm.data() + k * ntraj;
            for (int t = 0; t < ntraj; ++t) comb[t] = 0.5 * (p[t] - std::conj(m[t]));
            const double env = res.envelope;
            tr.plus.push_back(reduceSamples(p, ntraj).mean * env);
            tr.minus.push_back(reduceSamples(m, ntraj).mean * env);
            const ModeEstimate e = reduceSamples(comb.data(), ntraj);
            tr.combined.push_back(e.mean * env);
            tr.stderrIm.push_back(e.stderrIm * env);
        }
        res.pairs.push_back(std::move(tr));
    }

    const auto& C = res.pairs.front().combined;
    for (const auto& z : C) res.amplitude = std::max(res.amplitude, std::abs(z.imag()));
    if (nt >= 3 && std::abs(C.front()) > 0.0) {
        const FrequencyEstimate e = earlyPhaseSlope(quenchTimesUs, C, settings.earlySamples);
        res.omegaEarly = e.omega;
        res.omegaEarlyErr = e.omegaErr;
    }
    if (nt >= 5) {
        std::vector<double> re(nt), im(nt);
        for (std::size_t k = 0; k < nt; ++k) {
            re[k] = C[k].real();
            im[k] = C[k].imag();
        }
        const DampedSine f = fitDampedSine(quenchTimesUs, im, re);
        res.omega = f.omega * 1e6;
        res.omegaErr = f.omegaErr * 1e6;
        res.fitDecayUs = f.decayTime;
    }
    return res;
}

std::vector<ScanRow> anisotropyScan(const SpinEnsemble& ens, const SpiralSpec& spec,
                                    const std::vector<double>& ratioGrid,
                                    const std::vector<double>& quenchTimesUs,
                                    const QuenchSettings& settings) {
    if (ratioGrid.empty()) throw InvalidArgument("anisotropy grid is empty");
    std::vector<ScanRow> rows;
    for (double r : ratioGrid) {
        const XXZModel m = xxzFromLambda(lambdaFromRatio(r));
        const QuenchResult q = runQuench(ens, m, spec, quenchTimesUs, {spec.theta}, settings);
        rows.push_back({r, q.amplitude, q.omegaEarly, q.omegaEarlyErr, q.amplitude});
    }
    return rows;
}

std::vector<ScanRow> wavevectorScan(const SpinEnsemble& ens, const XXZModel& model, double theta,
                                    const Vec3& direction, const std::vector<double>& Qmagnitudes,
                                    const std::vector<double>& quenchTimesUs,
                                    const QuenchSettings& settings,
                                    const DecoherenceModel& decoherence, double gradMag) {
    if (Qmagnitudes.empty()) throw InvalidArgument("wavevector grid is empty");
    for (std::size_t k = 0; k < Qmagnitudes.size(); ++k)
        if (Qmagnitudes[k] < 0.0 || (k > 0 && Qmagnitudes[k] < Qmagnitudes[k - 1]))
            throw InvalidArgument("wavevector magnitudes must be nonnegative and sorted");
    const Vec3 dir = normalized(direction);
    std::vector<ScanRow> rows;
    for (double q : Qmagnitudes) {
        SpiralSpec spec;
        spec.Q = dir * q;
        spec.theta = theta;
        spec.windingTimeUs = windingTimeFor(q, gradMag);
        const QuenchResult r = runQuench(ens, model, spec, quenchTimesUs, {theta}, settings);
        const double env = decoherenceEnvelope(spec.windingTimeUs, decoherence);
        rows.push_back({q, r.amplitude * env, r.omegaEarly, r.omegaEarlyErr, r.amplitude});
    }
    return rows;
}

double scanKnee(const std::vector<ScanRow>& rows, double fraction) {
    if (rows.empty()) throw InvalidArgument("scan is empty");
    double amax = 0.0;
    for (const auto& r : rows) amax = std::max(amax, r.amplitudeIdeal);
    if (!(amax > 0.0)) throw InvalidArgument("scan amplitude is identically zero");
    const double level = fraction * amax;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k].amplitudeIdeal < level) continue;
        if (k == 0) return rows[0].param;
        const auto& a = rows[k - 1];
        const auto& b = rows[k];
        return a.param + (level - a.amplitudeIdeal) / (b.amplitudeIdeal - a.amplitudeIdeal) * (b.param - a.param);
    }
    return rows.back().param;
}

}  // namespace nvmri
