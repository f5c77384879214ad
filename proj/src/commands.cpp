#include "nvmri/commands.hpp"

#include <chrono>
#include <complex>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "nvmri/analytics.hpp"
#include "nvmri/constants.hpp"
#include "nvmri/errors.hpp"
#include "nvmri/grid.hpp"
#include "nvmri/imaging.hpp"
#include "nvmri/manifest.hpp"
#include "nvmri/polarization.hpp"
#include "nvmri/protocol.hpp"
#include "nvmri/random.hpp"

namespace fs = std::filesystem;

namespace nvmri {

namespace {

class Csv {
public:
    Csv(const std::string& path, const std::string& header) : fp_(std::fopen(path.c_str(), "w")) {
        if (!fp_) throw InvalidArgument("cannot write " + path);
        std::fprintf(fp_, "%s\n", header.c_str());
    }
    ~Csv() {
        if (fp_) std::fclose(fp_);
    }
    Csv(const Csv&) = delete;
    Csv& operator=(const Csv&) = delete;
    void row(std::initializer_list<double> v) {
        bool first = true;
        for (double x : v) {
            std::fprintf(fp_, first ? "%.17g" : ",%.17g", x);
            first = false;
        }
        std::fputc('\n', fp_);
    }

private:
    std::FILE* fp_;
};

void writeJson(const std::string& path, const Json& j) {
    std::ofstream f(path);
    if (!f) throw InvalidArgument("cannot write " + path);
    f << j.dump(2) << "\n";
}

std::string name(const RunConfig& cfg, const std::string& base) { return cfg.outputPrefix + base; }

std::string at(const std::string& dir, const std::string& rel) { return (fs::path(dir) / rel).string(); }

Json vecJson(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

const std::vector<double>& requireTimes(const ProtocolConfig& p) {
    if (p.timesUs.empty()) throw InvalidArgument("missing required key 'protocol.quench_times_us'");
    return p.timesUs;
}

QuenchSettings settingsFrom(const RunConfig& cfg, const ProtocolConfig& p) {
    if (p.trajectories < 2) throw InvalidArgument("missing required key 'protocol.trajectories'");
    QuenchSettings s;
    s.numTrajectories = p.trajectories;
    s.seed = streamSeed(cfg.seed, 1);
    s.polarization = p.polarization;
    s.blockSize = p.blockSize;
    s.workers = cfg.workers;
    s.frame = p.frame;
    s.integrator = p.integrator;
    s.earlySamples = p.earlySamples;
    return s;
}

SpiralSpec spiralFrom(const ProtocolConfig& p, std::size_t k) {
    SpiralSpec s;
    s.Q = p.wavevectors.at(k);
    s.theta = p.theta;
    s.windingTimeUs = p.windingTimeUs;
    return s;
}

Json quenchSummary(const QuenchResult& r, const Vec3& Q) {
    return {{"Q_rad_per_nm", vecJson(Q)},
            {"omega_rad_per_s", r.omega},
            {"omega_err_rad_per_s", r.omegaErr},
            {"omega_early_rad_per_s", r.omegaEarly},
            {"omega_early_err_rad_per_s", r.omegaEarlyErr},
            {"amplitude", r.amplitude},
            {"envelope", r.envelope},
            {"fit_decay_us", std::isfinite(r.fitDecayUs) ? Json(r.fitDecayUs) : Json(nullptr)}};
}

}  // namespace

OutputList cmdSimulateQuench(const RunConfig& cfg, const std::string& outDir) {
    const auto& ec = requireSection(cfg.ensemble, "ensemble");
    const auto& model = requireSection(cfg.model, "model");
    const auto& p = requireSection(cfg.protocol, "protocol");
    const auto& times = requireTimes(p);
    const QuenchSettings settings = settingsFrom(cfg, p);
    const SpinEnsemble ens = buildEnsemble(ec, cfg.seed);

    OutputList outs;
    Json summary;
    summary["spins"] = ens.size();
    summary["trajectories"] = p.trajectories;
    summary["g0"] = model.g0;
    summary["g2"] = model.g2;
    summary["theta_rad"] = p.theta;
    summary["runs"] = Json::array();
    for (std::size_t k = 0; k < p.wavevectors.size(); ++k) {
        const SpiralSpec spec = spiralFrom(p, k);
        const QuenchResult r = runQuench(ens, model, spec, times, p.pairAngles, settings, p.decoherence);
        for (std::size_t a = 0; a < r.pairs.size(); ++a) {
            const auto& tr = r.pairs[a];
            const std::string stem = "quench_q" + std::to_string(k) + "_pair" + std::to_string(a) + "_";
            const std::pair<const char*, const std::vector<std::complex<double>>*> series[] = {
                {"combined", &tr.combined}, {"plus", &tr.plus}, {"minus", &tr.minus}};
            for (const auto& [label, v] : series) {
                const std::string file = name(cfg, stem + label + ".csv");
                Csv csv(at(outDir, file), "t_us,re_SQ,im_SQ,mag_SQ");
                for (std::size_t t = 0; t < times.size(); ++t)
                    csv.row({times[t], (*v)[t].real(), (*v)[t].imag(), std::abs((*v)[t])});
                outs.push_back(file);
            }
            const std::string file = name(cfg, stem + "stderr.csv");
            Csv csv(at(outDir, file), "t_us,stderr_im_SQ");
            for (std::size_t t = 0; t < times.size(); ++t) csv.row({times[t], tr.stderrIm[t]});
            outs.push_back(file);
        }
        summary["runs"].push_back(quenchSummary(r, r.Q));
    }
    const std::string file = name(cfg, "quench.json");
    writeJson(at(outDir, file), summary);
    outs.push_back(file);
    return outs;
}

OutputList cmdScan(const RunConfig& cfg, const std::string& outDir, const std::string& typeOverride) {
    const auto& sc = requireSection(cfg.scan, "scan");
    const std::string type = typeOverride.empty() ? sc.type : typeOverride;
    if (type != sc.type)
        throw InvalidArgument("scan type '" + type + "' does not match config key 'scan.type' ('" + sc.type + "')");
    const auto& ec = requireSection(cfg.ensemble, "ensemble");
    const auto& p = requireSection(cfg.protocol, "protocol");
    const SpinEnsemble ens = buildEnsemble(ec, cfg.seed);
    OutputList outs;
    Json summary;
    summary["type"] = type;
    summary["spins"] = ens.size();

    if (type == "anisotropy") {
        const auto& times = requireTimes(p);
        const auto rows = anisotropyScan(ens, spiralFrom(p, 0), sc.ratios, times, settingsFrom(cfg, p));
        const std::string file = name(cfg, "scan_anisotropy.csv");
        Csv csv(at(outDir, file), "ratio,amplitude,omega,omega_err");
        std::size_t best = 0;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            csv.row({rows[k].param, rows[k].amplitude, rows[k].omega, rows[k].omegaErr});
            if (rows[k].amplitude > rows[best].amplitude) best = k;
        }
        outs.push_back(file);
        summary["argmax_ratio"] = rows[best].param;
        summary["max_amplitude"] = rows[best].amplitude;
    } else if (type == "wavevector") {
        const auto& model = requireSection(cfg.model, "model");
        const auto& times = requireTimes(p);
        const auto rows = wavevectorScan(ens, model, p.theta, sc.direction, sc.qMagnitudes, times,
                                         settingsFrom(cfg, p), *sc.decoherence, sc.gradientMagnitude);
        const std::string file = name(cfg, "scan_wavevector.csv");
        Csv csv(at(outDir, file), "Q,amplitude,amplitude_ideal,omega,omega_err");
        for (const auto& r : rows) csv.row({r.param, r.amplitude, r.amplitudeIdeal, r.omega, r.omegaErr});
        outs.push_back(file);
        summary["knee_rad_per_nm"] = scanKnee(rows);
    } else {
        if (p.trajectories < 2) throw InvalidArgument("missing required key 'protocol.trajectories'");
        const SpiralSpec spec = spiralFrom(p, 0);
        TrajectoryBatch batch = sampleInitial(ens, p.theta, p.polarization, streamSeed(cfg.seed, 1), p.trajectories,
                                              p.blockSize);
        wind(batch, ens, spec.Q);
        if (sc.holdUs > 0.0) {
            const XXZModel model = cfg.model ? *cfg.model : XXZModel{};
            evolve(batch, buildCouplings(ens, model), sc.holdUs, p.integrator, cfg.workers);
        }
        const auto grid = symmetricGrid(sc.qpMax, sc.qpPoints);
        CoherenceScan scan = acquireScan(batch, ens, sc.axis, grid, sc.decoherence, sc.gradientMagnitude, cfg.workers);
        scan.theta = p.theta;
        scan.windQ = dot(spec.Q, scan.axis);
        const std::string file = name(cfg, "revival.csv");
        writeScanCsv(at(outDir, file), scan);
        outs.push_back(file);
        const RevivalWidth w = revivalWidth(scan);
        summary["configured_Q_rad_per_nm"] = scan.windQ;
        summary["peak_Q_rad_per_nm"] = w.peakQ;
        summary["fwhm_rad_per_nm"] = w.fwhm;
        summary["null_half_width_rad_per_nm"] = w.nullHalfWidth;
        summary["multimodal"] = w.multimodal;
        summary["qp_spacing_rad_per_nm"] = scan.spacing();
    }
    const std::string file = name(cfg, "scan.json");
    writeJson(at(outDir, file), summary);
    outs.push_back(file);
    return outs;
}

OutputList cmdFmi(const RunConfig& cfg, const std::string& outDir) {
    const auto& ec = requireSection(cfg.ensemble, "ensemble");
    const auto& p = requireSection(cfg.protocol, "protocol");
    const auto& im = requireSection(cfg.imaging, "imaging");
    const SpinEnsemble ens = buildEnsemble(ec, cfg.seed);
    const SpiralSpec spec = spiralFrom(p, 0);
    const auto coh = spiralCoherence(ens, spec.Q, p.theta);
    CoherenceScan scan = acquireScan(ens, coh, im.axis, symmetricGrid(im.qpMax, im.qpPoints), p.decoherence,
                                     p.gradient ? norm(*p.gradient) : 1.0);
    scan.theta = p.theta;
    scan.windQ = dot(spec.Q, scan.axis);
    const SpatialProfile prof = reconstruct(scan, im.window, im.zeroPad);

    OutputList outs;
    const std::string fs1 = name(cfg, "fmi_scan.csv"), fs2 = name(cfg, "fmi_profile.csv"), fs3 = name(cfg, "fmi.json");
    writeScanCsv(at(outDir, fs1), scan);
    writeProfileCsv(at(outDir, fs2), prof);

    Json j;
    j["axis"] = vecJson(scan.axis);
    j["wound_Q_along_axis_rad_per_nm"] = scan.windQ;
    j["resolution_nm"] = prof.resolution;
    j["sample_spacing_nm"] = prof.spacing();
    double vmax = 0.0;
    for (const auto& v : prof.value) vmax = std::max(vmax, std::abs(v));
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < prof.x.size(); ++i)
        if (std::abs(prof.value[i]) >= 0.5 * vmax) {
            lo = std::min(lo, prof.x[i]);
            hi = std::max(hi, prof.x[i]);
        }
    j["support_nm"] = hi - lo;
    if (scan.windQ != 0.0) {
        const PhaseSlopeResult ps = phaseSlope(prof, im.fitThreshold);
        j["phase_slope_rad_per_nm"] = ps.slope;
        j["phase_slope_err_rad_per_nm"] = ps.slopeErr;
        j["modulation_period_nm"] = constants::twoPi / std::abs(ps.slope);
    }
    writeJson(at(outDir, fs3), j);
    outs = {fs1, fs2, fs3};
    return outs;
}

namespace {

Grid3 weightingFor(const PolarizationConfig& pc, const RunConfig& cfg, const IntensityField& I) {
    if (pc.weighting == "intensity") return defaultWeighting(I);
    if (pc.weighting == "uniform") return Grid3(I.dims, I.spacing, I.origin, 1.0);
    Grid3 w = readGrid(cfg.resolvePath(pc.weighting));
    if (!w.sameShape(I)) throw InvalidArgument("weighting grid is not commensurate with the intensity grid");
    return w;
}

IntensityField intensityFor(const PolarizationConfig& pc, const RunConfig& cfg) {
    if (pc.intensity == "toy") return toyInterferenceIntensity(pc.toy);
    return readGrid(cfg.resolvePath(pc.gridPath));
}

}  // namespace

OutputList cmdAnalytics(const RunConfig& cfg, const std::string& outDir) {
    const auto& a = requireSection(cfg.analytics, "analytics");
    const XXZModel model = cfg.model ? *cfg.model : XXZModel{};
    OutputList outs;
    Json summary;
    summary["kind"] = a.kind;
    auto qvec = [&](double q) { return normalized(a.qDirection) * q; };

    if (a.kind == "isotropic_shell") {
        summary["files"] = Json::array();
        for (std::size_t k = 0; k < a.outerExtents.size(); ++k) {
            IsotropicShellParams sp{a.innerCutoff, a.outerExtents[k], a.density};
            std::vector<ChiRow> rows;
            for (double q : a.qValues) {
                const double chi = chiIsotropicClosed(sp, qvec(q), normalized(a.eta));
                rows.push_back({q, chi, 0.0, precessionFrequency(a.theta, model, {chi, 0.0})});
            }
            const std::string file = name(cfg, "chi_shell_" + std::to_string(k) + ".csv");
            writeChiCsv(at(outDir, file), rows);
            outs.push_back(file);
            summary["files"].push_back({{"file", file}, {"outer_extent_nm", a.outerExtents[k]}});
        }
    } else if (a.kind == "gaussian") {
        GaussianProfileParams gp{a.width, a.lambda, a.totalPolarization};
        std::vector<ChiRow> rows;
        for (double q : a.qValues) {
            const double chi = chiGaussian(gp, qvec(q), normalized(a.eta));
            rows.push_back({q, chi, 0.0, precessionFrequency(a.theta, model, {chi, 0.0})});
        }
        const std::string file = name(cfg, "chi_gaussian.csv");
        writeChiCsv(at(outDir, file), rows);
        outs.push_back(file);
    } else if (a.kind == "ensemble") {
        const SpinEnsemble ens = buildEnsemble(requireSection(cfg.ensemble, "ensemble"), cfg.seed);
        const double zz = chiZZ(ens);
        std::vector<ChiRow> rows;
        for (double q : a.qValues) {
            const ExchangeFields f{chiNumeric(ens, qvec(q)), zz};
            rows.push_back({q, f.chiXY, f.chiZZ, precessionFrequency(a.theta, model, f)});
        }
        const std::string file = name(cfg, "chi_ensemble.csv");
        writeChiCsv(at(outDir, file), rows);
        outs.push_back(file);
        summary["spins"] = ens.size();
    } else if (a.kind == "grid") {
        const Grid3 rho = readGrid(cfg.resolvePath(a.densityGrid));
        std::optional<Grid3> w;
        if (!a.weightGrid.empty()) w = readGrid(cfg.resolvePath(a.weightGrid));
        KernelOptions opt{normalized(a.eta), a.Lambda, a.kernel, a.pad};
        const double zz = chiZZGrid(rho, w ? &*w : nullptr, opt);
        std::vector<ChiRow> rows;
        bool aliasing = false;
        for (double q : a.qValues) {
            const ConvolutionResult r = kernelConvolution(rho, w ? &*w : nullptr, qvec(q), opt);
            aliasing = aliasing || r.aliasing;
            rows.push_back({q, r.chi, zz, precessionFrequency(a.theta, model, {r.chi, zz})});
        }
        if (aliasing) std::cerr << "warning: Q exceeds half the grid Nyquist wavevector for some rows\n";
        summary["aliasing_warning"] = aliasing;
        const std::string file = name(cfg, "chi_grid.csv");
        writeChiCsv(at(outDir, file), rows);
        outs.push_back(file);
    } else {
        const auto& pc = requireSection(cfg.polarization, "polarization");
        if (pc.pumpTimes.empty()) throw InvalidArgument("missing required key 'polarization.pump_times_s'");
        if (!(pc.tauS > 0.0)) throw InvalidArgument("missing required key 'polarization.tau_s'");
        const IntensityField I = intensityFor(pc, cfg);
        const Grid3 w = weightingFor(pc, cfg, I);
        KernelOptions opt{normalized(a.eta), a.Lambda, a.kernel, a.pad};
        const std::string file = name(cfg, "kappa_pumping.csv");
        Csv csv(at(outDir, file), "tau_s,kappa_fd,kappa_direct");
        for (double tau : pc.pumpTimes) {
            const PolarizationProfile prof = pumpProfile(I, tau, pc.tauS, pc.rho0);
            if (!(prof.rho.max() > 0.0)) {
                csv.row({tau, 0.0, 0.0});
                continue;
            }
            const MomentResult m = exchangeMoment(prof.rho, &w, a.momentDirection, a.dQ, opt);
            csv.row({tau, m.finiteDifference, m.direct});
        }
        outs.push_back(file);
    }
    const std::string file = name(cfg, "analytics.json");
    writeJson(at(outDir, file), summary);
    outs.push_back(file);
    return outs;
}

OutputList cmdCompileSequence(const std::string& pulseFile, const std::string& outDir) {
    if (pulseFile.empty()) throw InvalidArgument("compile-sequence needs --pulses FILE");
    const PulseSequence seq = readPulseProgram(pulseFile);
    const FrameTrajectory frames = compileFrames(seq);
    const CTriple c = averageHamiltonian(frames);
    const Vec3 res = disorderResidual(frames);
    const Vec3 chir = chiralityVector(frames);
    const bool identity = netRotation(seq).isIdentity();

    OutputList outs{"frames.csv", "sequence.json"};
    {
        std::FILE* fp = std::fopen(at(outDir, "frames.csv").c_str(), "w");
        if (!fp) throw InvalidArgument("cannot write frames.csv");
        std::fprintf(fp, "index,axis,duration_ns\n");
        for (std::size_t k = 0; k < frames.frames.size(); ++k)
            std::fprintf(fp, "%zu,%s,%.17g\n", k, axisName(frames.frames[k].axis).c_str(), frames.frames[k].durationNs);
        std::fclose(fp);
    }
    Json j;
    j["pulses"] = seq.pulses.size();
    j["cycle_ns"] = seq.cycleDuration();
    j["windows"] = frames.frames.size();
    j["axis_aligned"] = true;
    j["c_triple"] = Json::array({c.cx, c.cy, c.cz});
    const double spread = std::max({std::abs(c.cx - c.cy), std::abs(c.cy - c.cz), std::abs(c.cx - c.cz)});
    j["heisenberg"] = spread <= 1e-12;
    j["disorder_residual"] = vecJson(res);
    j["disorder_residual_norm"] = norm(res);
    j["chirality"] = vecJson(chir);
    j["net_rotation_identity"] = identity;
    if (std::abs(c.cx - c.cy) <= 1e-12) {
        const XXZModel m = modelFromCTriple(c);
        j["g0"] = m.g0;
        j["g2"] = m.g2;
        if (m.g0 != 0.0) j["ratio_gz_gxx"] = anisotropyRatio(m);
    }
    writeJson(at(outDir, "sequence.json"), j);
    return outs;
}

OutputList cmdFitPumping(const RunConfig& cfg, const std::string& dataFile, const std::string& outDir) {
    const auto& pc = requireSection(cfg.polarization, "polarization");
    if (dataFile.empty()) throw InvalidArgument("fit-pumping needs --data FILE");
    std::vector<double> taus, contrast;
    readContrastCsv(dataFile, taus, contrast);
    const IntensityField I = intensityFor(pc, cfg);
    const Grid3 w = weightingFor(pc, cfg, I);
    const SaturationFit fit = fitSaturation(taus, contrast, I, &w);

    OutputList outs{name(cfg, "fit.json"), name(cfg, "fit_curve.csv")};
    Json j;
    j["tau_s"] = fit.tauS;
    j["amplitude"] = fit.amplitude;
    j["residual_norm"] = fit.residualNorm;
    j["points"] = taus.size();
    writeJson(at(outDir, outs[0]), j);
    const auto model = contrastCurve(I, taus, fit.tauS, fit.amplitude, &w);
    writeContrastCsv(at(outDir, outs[1]), taus, model);
    return outs;
}

namespace {

OutputList dispatch(const Invocation& inv, const RunConfig* cfg, const std::string& outDir) {
    const std::string& c = inv.command;
    if (c == "compile-sequence") return cmdCompileSequence(inv.pulsesPath, outDir);
    if (!cfg) throw InvalidArgument(c + " needs --config PATH");
    if (c == "simulate-quench") return cmdSimulateQuench(*cfg, outDir);
    if (c == "scan") return cmdScan(*cfg, outDir, inv.scanType);
    if (c == "fmi") return cmdFmi(*cfg, outDir);
    if (c == "analytics") return cmdAnalytics(*cfg, outDir);
    if (c == "fit-pumping") return cmdFitPumping(*cfg, inv.dataPath, outDir);
    throw InvalidArgument("unknown subcommand '" + c + "'");
}

void printDrift(const DriftReport& d, const std::string& what, std::ostream& err) {
    for (const auto& p : d.changed) err << "drift: " << what << " " << p << " checksum differs\n";
    for (const auto& p : d.missing) err << "drift: " << what << " " << p << " missing\n";
    for (const auto& p : d.extra) err << "drift: " << what << " " << p << " not in manifest\n";
}

}  // namespace

int execute(const Invocation& inv, std::ostream& out, std::ostream& err) {
    try {
        std::optional<RunConfig> cfg;
        if (!inv.configPath.empty()) {
            cfg = loadRunConfig(inv.configPath);
            if (inv.seed) {
                cfg->seed = *inv.seed;
                cfg->snapshot["seed"] = *inv.seed;
            }
            if (inv.workers) {
                if (*inv.workers < 1) throw InvalidArgument("--workers must be >= 1");
                cfg->workers = *inv.workers;
                cfg->snapshot["workers"] = *inv.workers;
            }
        } else if (inv.command != "compile-sequence") {
            throw InvalidArgument(inv.command + " needs --config PATH");
        }

        std::vector<ManifestEntry> inputs;
        if (!inv.configPath.empty()) inputs.push_back({inv.configPath, sha256File(inv.configPath), fs::file_size(inv.configPath)});
        if (!inv.pulsesPath.empty()) inputs.push_back({inv.pulsesPath, sha256File(inv.pulsesPath), fs::file_size(inv.pulsesPath)});
        if (!inv.dataPath.empty()) inputs.push_back({inv.dataPath, sha256File(inv.dataPath), fs::file_size(inv.dataPath)});
        if (cfg) {
            std::vector<std::string> extra;
            if (cfg->protocol && cfg->protocol->coil) extra.push_back(cfg->protocol->coil->file);
            if (cfg->polarization && cfg->polarization->intensity == "grid") extra.push_back(cfg->polarization->gridPath);
            if (cfg->polarization && fs::exists(cfg->resolvePath(cfg->polarization->weighting)))
                extra.push_back(cfg->polarization->weighting);
            if (cfg->analytics && !cfg->analytics->densityGrid.empty()) extra.push_back(cfg->analytics->densityGrid);
            if (cfg->analytics && !cfg->analytics->weightGrid.empty()) extra.push_back(cfg->analytics->weightGrid);
            for (const auto& e : extra) {
                const std::string p = cfg->resolvePath(e);
                inputs.push_back({p, sha256File(p), fs::file_size(p)});
            }
        }

        if (inv.verify) {
            const RunManifest stored = readManifest(inv.outDir);
            DriftReport onDisk = compareEntries(stored.outputs, inv.outDir);
            printDrift(onDisk, "stored", err);
            const fs::path scratch =
                fs::temp_directory_path() / ("nvmri-verify-" + sha256String(inv.outDir + inv.command).substr(0, 12));
            fs::remove_all(scratch);
            fs::create_directories(scratch);
            const OutputList outs = dispatch(inv, cfg ? &*cfg : nullptr, scratch.string());
            std::vector<ManifestEntry> fresh;
            for (const auto& o : outs) fresh.push_back(hashEntry(scratch.string(), o));
            fs::remove_all(scratch);
            DriftReport rerun = compareOutputs(stored.outputs, fresh);
            printDrift(rerun, "recomputed", err);
            if (!onDisk.ok() || !rerun.ok()) {
                err << "verify: drift detected\n";
                return 3;
            }
            out << "verify: " << stored.outputs.size() << " outputs match manifest\n";
            return 0;
        }

        fs::create_directories(inv.outDir);
        const auto t0 = std::chrono::steady_clock::now();
        const OutputList outs = dispatch(inv, cfg ? &*cfg : nullptr, inv.outDir);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        RunManifest m;
        m.command = inv.command;
        m.config = cfg ? cfg->snapshot : Json::object();
        m.seed = cfg ? cfg->seed : 0;
        m.workers = cfg ? cfg->workers : 1;
        m.wallSeconds = wall;
        m.inputs = inputs;
        for (const auto& o : outs) m.outputs.push_back(hashEntry(inv.outDir, o));
        writeManifest(inv.outDir, m);
        for (const auto& o : outs) out << (fs::path(inv.outDir) / o).string() << "\n";
        return 0;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace nvmri
