#include "nvmri/runconfig.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "nvmri/errors.hpp"
#include "nvmri/random.hpp"

namespace nvmri {

ConfigSection::ConfigSection(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object())
        throw InvalidArgument("config key '" + (path_.empty() ? std::string("<root>") : path_) +
                              "': expected an object");
}

std::string ConfigSection::keyPath(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
}

bool ConfigSection::has(const std::string& key) const { return j_->contains(key); }

const Json& ConfigSection::get(const std::string& key) {
    if (!j_->contains(key)) throw InvalidArgument("missing required key '" + keyPath(key) + "'");
    used_.insert(key);
    return (*j_)[key];
}

const Json& ConfigSection::raw(const std::string& key) { return get(key); }

double ConfigSection::number(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_number()) throw InvalidArgument("config key '" + keyPath(key) + "': expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw InvalidArgument("config key '" + keyPath(key) + "': must be finite");
    return d;
}

double ConfigSection::number(const std::string& key, double def) { return has(key) ? number(key) : def; }

long long ConfigSection::integer(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_number_integer()) throw InvalidArgument("config key '" + keyPath(key) + "': expected an integer");
    return v.get<long long>();
}

long long ConfigSection::integer(const std::string& key, long long def) { return has(key) ? integer(key) : def; }

std::string ConfigSection::string(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_string()) throw InvalidArgument("config key '" + keyPath(key) + "': expected a string");
    return v.get<std::string>();
}

std::string ConfigSection::string(const std::string& key, const std::string& def) {
    return has(key) ? string(key) : def;
}

bool ConfigSection::boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const Json& v = get(key);
    if (!v.is_boolean()) throw InvalidArgument("config key '" + keyPath(key) + "': expected true or false");
    return v.get<bool>();
}

namespace {

Vec3 toVec3(const Json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 3)
        throw InvalidArgument("config key '" + where + "': expected an array of 3 numbers");
    Vec3 r;
    for (int k = 0; k < 3; ++k) {
        if (!v[k].is_number()) throw InvalidArgument("config key '" + where + "': expected an array of 3 numbers");
        r[k] = v[k].get<double>();
    }
    return r;
}

}  // namespace

Vec3 ConfigSection::vec3(const std::string& key) { return toVec3(get(key), keyPath(key)); }

std::vector<double> ConfigSection::numbers(const std::string& key) {
    const Json& v = get(key);
    if (!v.is_array()) throw InvalidArgument("config key '" + keyPath(key) + "': expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw InvalidArgument("config key '" + keyPath(key) + "': expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

std::vector<double> ConfigSection::grid(const std::string& key) {
    const Json& v = get(key);
    if (v.is_array()) {
        auto out = numbers(key);
        if (out.empty()) throw InvalidArgument("config key '" + keyPath(key) + "': empty grid");
        return out;
    }
    ConfigSection g(v, keyPath(key));
    const double a = g.number("start"), b = g.number("stop");
    const long long n = g.integer("count");
    const bool lg = g.boolean("log", false);
    g.finish();
    if (n < 1) throw InvalidArgument("config key '" + keyPath(key) + ".count': must be >= 1");
    if (lg && !(a > 0.0 && b > 0.0)) throw InvalidArgument("config key '" + keyPath(key) + "': log grid needs positive bounds");
    std::vector<double> out(n);
    for (long long k = 0; k < n; ++k) {
        const double t = n == 1 ? 0.0 : static_cast<double>(k) / (n - 1);
        out[k] = lg ? std::exp(std::log(a) + t * (std::log(b) - std::log(a))) : a + t * (b - a);
    }
    out.front() = a;
    if (n > 1) out.back() = b;
    return out;
}

ConfigSection ConfigSection::child(const std::string& key) { return ConfigSection(get(key), keyPath(key)); }

void ConfigSection::finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
        if (!used_.count(it.key())) throw InvalidArgument("unknown key '" + keyPath(it.key()) + "'");
}

std::string RunConfig::resolvePath(const std::string& p) const {
    const std::filesystem::path path(p);
    if (path.is_absolute()) return p;
    return (std::filesystem::path(baseDir) / path).lexically_normal().string();
}

template <class T>
const T& requireSection(const std::optional<T>& s, const std::string& name) {
    if (!s) throw InvalidArgument("missing required key '" + name + "'");
    return *s;
}

template const EnsembleConfig& requireSection(const std::optional<EnsembleConfig>&, const std::string&);
template const XXZModel& requireSection(const std::optional<XXZModel>&, const std::string&);
template const ProtocolConfig& requireSection(const std::optional<ProtocolConfig>&, const std::string&);
template const ScanConfig& requireSection(const std::optional<ScanConfig>&, const std::string&);
template const ImagingConfig& requireSection(const std::optional<ImagingConfig>&, const std::string&);
template const PolarizationConfig& requireSection(const std::optional<PolarizationConfig>&, const std::string&);
template const AnalyticsConfig& requireSection(const std::optional<AnalyticsConfig>&, const std::string&);

namespace {

std::optional<DecoherenceModel> parseDecoherence(ConfigSection& s, const std::string& key) {
    if (!s.has(key)) return std::nullopt;
    ConfigSection d = s.child(key);
    DecoherenceModel m;
    m.T2Us = d.number("T2_us");
    m.stretch = d.number("stretch", 1.0);
    d.finish();
    try {
        m.validate();
    } catch (const InvalidArgument& e) {
        throw InvalidArgument("config key '" + s.keyPath(key) + "': " + e.what());
    }
    return m;
}

EnsembleConfig parseEnsemble(ConfigSection s) {
    EnsembleConfig c;
    const std::string b = s.string("boundary");
    if (b == "periodic") c.boundary = Boundary::PeriodicBox;
    else if (b == "nanobeam") c.boundary = Boundary::OpenNanobeam;
    else throw InvalidArgument("config key '" + s.keyPath("boundary") + "': expected 'periodic' or 'nanobeam'");
    c.extent = s.vec3("extent_nm");
    for (int k = 0; k < 3; ++k)
        if (!(c.extent[k] > 0.0)) throw InvalidArgument("config key '" + s.keyPath("extent_nm") + "': must be positive");
    if (s.has("count")) c.count = s.integer("count");
    if (s.has("density_ppm")) c.densityPpm = s.number("density_ppm");
    if (c.count && c.densityPpm)
        throw InvalidArgument("config keys '" + s.keyPath("count") + "' and '" + s.keyPath("density_ppm") +
                              "' are mutually exclusive");
    if (!c.count && !c.densityPpm) throw InvalidArgument("missing required key '" + s.keyPath("count") + "'");
    if (c.count && *c.count < 1) throw InvalidArgument("config key '" + s.keyPath("count") + "': must be >= 1");
    if (c.densityPpm && !(*c.densityPpm > 0.0))
        throw InvalidArgument("config key '" + s.keyPath("density_ppm") + "': must be positive");
    c.uvCutoff = s.number("uv_cutoff_nm");
    if (c.uvCutoff < 0.0) throw InvalidArgument("config key '" + s.keyPath("uv_cutoff_nm") + "': must be >= 0");
    c.group = static_cast<int>(s.integer("nv_group", 1));
    if (c.group < 1 || c.group > 4) throw InvalidArgument("config key '" + s.keyPath("nv_group") + "': must be 1..4");
    c.stream = static_cast<std::uint64_t>(s.integer("stream", 0));
    s.finish();
    return c;
}

XXZModel parseModel(ConfigSection s) {
    XXZModel m;
    int given = 0;
    if (s.has("lambda")) {
        m = xxzFromLambda(s.number("lambda"));
        ++given;
    }
    if (s.has("ratio_gz_gxx")) {
        m = xxzFromLambda(lambdaFromRatio(s.number("ratio_gz_gxx")));
        ++given;
    }
    if (s.has("g0") || s.has("g2")) {
        m.g0 = s.number("g0");
        m.g2 = s.number("g2");
        ++given;
    }
    if (given == 0) throw InvalidArgument("missing required key '" + s.keyPath("lambda") + "'");
    if (given > 1) throw InvalidArgument("config section 'model' sets the model more than once");
    s.finish();
    return m;
}

ProtocolConfig parseProtocol(ConfigSection s) {
    ProtocolConfig c;
    c.theta = s.number("theta_rad");
    if (s.has("Q_rad_per_nm")) {
        const Json& q = s.raw("Q_rad_per_nm");
        if (q.is_array() && !q.empty() && q[0].is_array()) {
            for (std::size_t k = 0; k < q.size(); ++k)
                c.wavevectors.push_back(toVec3(q[k], s.keyPath("Q_rad_per_nm") + "[" + std::to_string(k) + "]"));
        } else {
            c.wavevectors.push_back(toVec3(q, s.keyPath("Q_rad_per_nm")));
        }
    }
    if (s.has("gradient_mT_per_um")) {
        if (!c.wavevectors.empty())
            throw InvalidArgument("config keys '" + s.keyPath("Q_rad_per_nm") + "' and '" +
                                  s.keyPath("gradient_mT_per_um") + "' are mutually exclusive");
        c.gradient = s.vec3("gradient_mT_per_um");
        c.windingTimeUs = s.number("winding_time_us");
        GradientSpec g;
        g.gradient = *c.gradient;
        c.wavevectors.push_back(SpiralSpec::fromGradient(g, c.windingTimeUs, c.theta).Q);
    } else if (s.has("coil")) {
        if (!c.wavevectors.empty())
            throw InvalidArgument("config keys '" + s.keyPath("Q_rad_per_nm") + "' and '" + s.keyPath("coil") +
                                  "' are mutually exclusive");
        ConfigSection k = s.child("coil");
        CoilConfig cc;
        cc.file = k.string("file");
        cc.currentMilliAmp = k.number("current_mA");
        if (k.has("point_nm")) cc.pointNm = k.vec3("point_nm");
        k.finish();
        c.coil = cc;
        c.windingTimeUs = s.number("winding_time_us");
    } else {
        c.windingTimeUs = s.number("winding_time_us", 0.0);
    }
    if (c.wavevectors.empty() && !c.coil) throw InvalidArgument("missing required key '" + s.keyPath("Q_rad_per_nm") + "'");
    if (s.has("quench_times_us")) {
        c.timesUs = s.grid("quench_times_us");
        for (std::size_t k = 0; k < c.timesUs.size(); ++k)
            if (c.timesUs[k] < 0.0 || (k > 0 && c.timesUs[k] < c.timesUs[k - 1]))
                throw InvalidArgument("config key '" + s.keyPath("quench_times_us") + "': must be sorted and >= 0");
    }
    if (s.has("trajectories")) {
        c.trajectories = static_cast<int>(s.integer("trajectories"));
        if (c.trajectories < 2) throw InvalidArgument("config key '" + s.keyPath("trajectories") + "': must be >= 2");
    }
    c.polarization = s.number("polarization", 1.0);
    if (c.polarization < 0.0 || c.polarization > 1.0)
        throw InvalidArgument("config key '" + s.keyPath("polarization") + "': must lie in [0, 1]");
    const std::string frame = s.string("frame", "lab");
    if (frame == "lab") c.frame = EvolutionFrame::Lab;
    else if (frame == "rotated") c.frame = EvolutionFrame::Rotated;
    else throw InvalidArgument("config key '" + s.keyPath("frame") + "': expected 'lab' or 'rotated'");
    const std::string integ = s.string("integrator", "rk4");
    if (integ == "rk4") c.integrator.method = IntegratorSettings::Method::RK4;
    else if (integ == "dopri45") c.integrator.method = IntegratorSettings::Method::DormandPrince45;
    else throw InvalidArgument("config key '" + s.keyPath("integrator") + "': expected 'rk4' or 'dopri45'");
    c.integrator.dtFactor = s.number("dt_factor", c.integrator.dtFactor);
    if (!(c.integrator.dtFactor > 0.0)) throw InvalidArgument("config key '" + s.keyPath("dt_factor") + "': must be positive");
    c.integrator.rtol = s.number("rtol", c.integrator.rtol);
    c.integrator.atol = s.number("atol", c.integrator.atol);
    c.earlySamples = static_cast<int>(s.integer("early_samples", 0));
    if (s.has("pair_angles_rad")) c.pairAngles = s.numbers("pair_angles_rad");
    else c.pairAngles = {c.theta};
    c.decoherence = parseDecoherence(s, "decoherence");
    c.blockSize = static_cast<int>(s.integer("block_size", kDefaultBlockSize));
    if (c.blockSize < 1) throw InvalidArgument("config key '" + s.keyPath("block_size") + "': must be >= 1");
    s.finish();
    return c;
}

ScanConfig parseScan(ConfigSection s) {
    ScanConfig c;
    c.type = s.string("type");
    if (c.type == "anisotropy") {
        c.ratios = s.grid("ratios");
        if (c.ratios.empty()) throw InvalidArgument("config key '" + s.keyPath("ratios") + "': grid is empty");
    } else if (c.type == "wavevector") {
        c.qMagnitudes = s.grid("q_magnitudes_rad_per_nm");
        if (c.qMagnitudes.empty())
            throw InvalidArgument("config key '" + s.keyPath("q_magnitudes_rad_per_nm") + "': grid is empty");
        c.direction = s.vec3("direction");
        c.gradientMagnitude = s.number("gradient_magnitude_mT_per_um");
        c.decoherence = parseDecoherence(s, "decoherence");
        if (!c.decoherence) throw InvalidArgument("missing required key '" + s.keyPath("decoherence") + "'");
    } else if (c.type == "wind-unwind") {
        c.axis = s.vec3("axis");
        c.qpMax = s.number("qp_max_rad_per_nm");
        c.qpPoints = static_cast<int>(s.integer("qp_points"));
        if (c.qpPoints < 2) throw InvalidArgument("config key '" + s.keyPath("qp_points") + "': grid is empty");
        c.holdUs = s.number("hold_us", 0.0);
        c.gradientMagnitude = s.number("gradient_magnitude_mT_per_um", 1.0);
        c.decoherence = parseDecoherence(s, "decoherence");
    } else {
        throw InvalidArgument("config key '" + s.keyPath("type") + "': expected anisotropy, wavevector or wind-unwind");
    }
    s.finish();
    return c;
}

ImagingConfig parseImaging(ConfigSection s) {
    ImagingConfig c;
    c.axis = s.vec3("axis");
    c.qpMax = s.number("qp_max_rad_per_nm");
    c.qpPoints = static_cast<int>(s.integer("qp_points"));
    if (c.qpPoints < 2) throw InvalidArgument("config key '" + s.keyPath("qp_points") + "': must be >= 2");
    const std::string w = s.string("window", "none");
    if (w == "none") c.window = Window::None;
    else if (w == "hann") c.window = Window::Hann;
    else throw InvalidArgument("config key '" + s.keyPath("window") + "': expected 'none' or 'hann'");
    c.zeroPad = static_cast<int>(s.integer("zero_pad", 1));
    if (c.zeroPad < 1) throw InvalidArgument("config key '" + s.keyPath("zero_pad") + "': must be >= 1");
    c.fitThreshold = s.number("fit_threshold", 0.5);
    s.finish();
    return c;
}

PolarizationConfig parsePolarization(ConfigSection s) {
    PolarizationConfig c;
    c.intensity = s.string("intensity", "toy");
    if (c.intensity == "toy") {
        if (s.has("toy")) {
            ConfigSection t = s.child("toy");
            c.toy.beamWidth = t.number("beam_width_nm", c.toy.beamWidth);
            c.toy.refractiveIndex = t.number("refractive_index", c.toy.refractiveIndex);
            c.toy.reflection = t.number("reflection", c.toy.reflection);
            c.toy.phase = t.number("phase_rad", c.toy.phase);
            c.toy.wavelength = t.number("wavelength_nm", c.toy.wavelength);
            if (t.has("extent_nm")) c.toy.extent = t.vec3("extent_nm");
            if (t.has("dims")) {
                const auto d = t.numbers("dims");
                if (d.size() != 3) throw InvalidArgument("config key '" + t.keyPath("dims") + "': expected 3 integers");
                for (int k = 0; k < 3; ++k) {
                    if (d[k] < 1 || d[k] != std::floor(d[k]))
                        throw InvalidArgument("config key '" + t.keyPath("dims") + "': expected positive integers");
                    c.toy.dims[k] = static_cast<int>(d[k]);
                }
            }
            t.finish();
        }
    } else if (c.intensity == "grid") {
        c.gridPath = s.string("grid");
    } else {
        throw InvalidArgument("config key '" + s.keyPath("intensity") + "': expected 'toy' or 'grid'");
    }
    c.weighting = s.string("weighting", "intensity");
    c.tauS = s.number("tau_s", 0.0);
    if (c.tauS < 0.0) throw InvalidArgument("config key '" + s.keyPath("tau_s") + "': must be positive");
    if (s.has("pump_times_s")) c.pumpTimes = s.grid("pump_times_s");
    c.rho0 = s.number("rho0", 1.0);
    s.finish();
    return c;
}

AnalyticsConfig parseAnalytics(ConfigSection s) {
    AnalyticsConfig c;
    c.kind = s.string("kind");
    c.theta = s.number("theta_rad", c.theta);
    if (c.kind == "isotropic_shell") {
        c.innerCutoff = s.number("inner_cutoff_nm");
        c.outerExtents = s.grid("outer_extents_nm");
        c.density = s.number("density_nm3");
        c.eta = s.vec3("eta");
        c.qDirection = s.vec3("q_direction");
        c.qValues = s.grid("q_values_rad_per_nm");
    } else if (c.kind == "gaussian") {
        c.width = s.number("width_nm");
        c.lambda = s.number("lambda");
        c.totalPolarization = s.number("total_polarization", 1.0);
        c.eta = s.vec3("eta");
        c.qDirection = s.vec3("q_direction");
        c.qValues = s.grid("q_values_rad_per_nm");
    } else if (c.kind == "ensemble") {
        c.qDirection = s.vec3("q_direction");
        c.qValues = s.grid("q_values_rad_per_nm");
    } else if (c.kind == "grid") {
        c.densityGrid = s.string("density_grid");
        c.weightGrid = s.string("weight_grid", "");
        c.Lambda = s.number("Lambda_per_nm");
        c.eta = s.vec3("eta");
        c.qDirection = s.vec3("q_direction");
        c.qValues = s.grid("q_values_rad_per_nm");
    } else if (c.kind == "moment_pumping") {
        c.Lambda = s.number("Lambda_per_nm");
        c.eta = s.vec3("eta");
        c.momentDirection = s.vec3("direction");
        c.dQ = s.number("dq_rad_per_nm", c.dQ);
    } else {
        throw InvalidArgument("config key '" + s.keyPath("kind") +
                              "': expected isotropic_shell, gaussian, ensemble, grid or moment_pumping");
    }
    if (c.kind == "grid" || c.kind == "moment_pumping") {
        const std::string k = s.string("kernel", "spectral");
        if (k == "spectral") c.kernel = KernelMode::Spectral;
        else if (k == "lattice") c.kernel = KernelMode::LatticeSum;
        else throw InvalidArgument("config key '" + s.keyPath("kernel") + "': expected 'spectral' or 'lattice'");
        c.pad = static_cast<int>(s.integer("pad", 2));
    }
    for (double q : c.qValues)
        if (q < 0.0) throw InvalidArgument("config key '" + s.keyPath("q_values_rad_per_nm") + "': must be >= 0");
    s.finish();
    return c;
}

}  // namespace

RunConfig parseRunConfig(const Json& doc, const std::string& baseDir) {
    ConfigSection root(doc, "");
    RunConfig c;
    c.snapshot = doc;
    c.baseDir = baseDir;
    const long long seed = root.integer("seed");
    if (seed < 0) throw InvalidArgument("config key 'seed': must be >= 0");
    c.seed = static_cast<std::uint64_t>(seed);
    c.workers = static_cast<int>(root.integer("workers", 1));
    if (c.workers < 1) throw InvalidArgument("config key 'workers': must be >= 1");
    if (root.has("ensemble")) c.ensemble = parseEnsemble(root.child("ensemble"));
    if (root.has("model")) c.model = parseModel(root.child("model"));
    if (root.has("protocol")) c.protocol = parseProtocol(root.child("protocol"));
    if (root.has("scan")) c.scan = parseScan(root.child("scan"));
    if (root.has("imaging")) c.imaging = parseImaging(root.child("imaging"));
    if (root.has("polarization")) c.polarization = parsePolarization(root.child("polarization"));
    if (root.has("analytics")) c.analytics = parseAnalytics(root.child("analytics"));
    if (c.protocol && c.protocol->coil) {
        const CoilConfig& cc = *c.protocol->coil;
        const CoilPath path = readCoilCsv(c.resolvePath(cc.file), cc.currentMilliAmp);
        const NvGroup g = nvGroup(c.ensemble ? c.ensemble->group : 1);
        const GradientSpec grad = effectiveGradient(coilField(path), g.axis, cc.pointNm);
        c.protocol->gradient = grad.gradient;
        c.protocol->wavevectors = {SpiralSpec::fromGradient(grad, c.protocol->windingTimeUs, c.protocol->theta).Q};
    }
    if (root.has("output")) {
        ConfigSection o = root.child("output");
        c.outputPrefix = o.string("prefix", "");
        o.finish();
    }
    root.finish();
    return c;
}

RunConfig loadRunConfig(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot read config " + path);
    Json doc;
    try {
        doc = Json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(path + ": " + e.what());
    }
    const auto dir = std::filesystem::path(path).parent_path();
    return parseRunConfig(doc, dir.empty() ? "." : dir.string());
}

SpinEnsemble buildEnsemble(const EnsembleConfig& c, std::uint64_t seed) {
    Region region;
    region.boundary = c.boundary;
    region.extent = c.extent;
    const std::uint64_t s = streamSeed(seed, 0x656e73ULL + c.stream);
    SpinEnsemble ens = c.count ? samplePositionsCount(region, static_cast<std::size_t>(*c.count), c.uvCutoff, s)
                               : samplePositions(region, nvGroupDensity(*c.densityPpm), c.uvCutoff, s);
    ens.group = nvGroup(c.group);
    return ens;
}

}  // namespace nvmri
