#include "nvmri/polarization.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nvmri/constants.hpp"
#include "nvmri/errors.hpp"
#include "nvmri/fitting.hpp"

namespace nvmri {

double fringePeriod(const ToyIntensityParams& p) { return p.wavelength / (2.0 * p.refractiveIndex); }

IntensityField toyInterferenceIntensity(const ToyIntensityParams& p) {
    if (!(p.beamWidth > 0.0)) throw InvalidArgument("beam width must be positive");
    if (!(p.refractiveIndex > 0.0) || !(p.wavelength > 0.0))
        throw InvalidArgument("refractive index and wavelength must be positive");
    if (p.reflection < 0.0) throw InvalidArgument("reflection amplitude must be >= 0");
    const Vec3 h{p.extent.x / p.dims[0], p.extent.y / p.dims[1], p.extent.z / p.dims[2]};
    IntensityField g(p.dims, h, h * 0.5);
    const double kn = constants::twoPi / p.wavelength * p.refractiveIndex;
    const Vec3 c = p.extent * 0.5;
    std::vector<double> transverse(p.dims[1]), longitudinal(p.dims[0]);
    for (int iy = 0; iy < p.dims[1]; ++iy) {
        const double Y = g.position(0, iy, 0).y - c.y;
        const std::complex<double> e = std::polar(1.0, kn * Y) + p.reflection * std::polar(1.0, -kn * Y + p.phase);
        transverse[iy] = std::norm(e);
    }
    for (int ix = 0; ix < p.dims[0]; ++ix) {
        const double X = g.position(ix, 0, 0).x - c.x;
        longitudinal[ix] = std::exp(-2.0 * X * X / (p.beamWidth * p.beamWidth));
    }
    for (int iz = 0; iz < p.dims[2]; ++iz)
        for (int iy = 0; iy < p.dims[1]; ++iy)
            for (int ix = 0; ix < p.dims[0]; ++ix) g.at(ix, iy, iz) = transverse[iy] * longitudinal[ix];
    return g;
}

namespace {

void checkIntensity(const IntensityField& I) {
    if (I.size() == 0) throw InvalidArgument("empty intensity grid");
    for (double v : I.data)
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("intensity must be finite and nonnegative");
}

}  // namespace

PolarizationProfile pumpProfile(const IntensityField& intensity, double tauPump, double tauS, double rho0) {
    if (tauPump < 0.0) throw InvalidArgument("pumping time must be >= 0");
    if (!(tauS > 0.0)) throw InvalidArgument("saturation time must be positive");
    checkIntensity(intensity);
    PolarizationProfile p;
    p.rho = intensity;
    p.rho0 = rho0;
    p.tauPump = tauPump;
    p.tauS = tauS;
    for (auto& v : p.rho.data) v = -rho0 * std::expm1(-tauPump * v / tauS);
    return p;
}

Grid3 defaultWeighting(const IntensityField& intensity, const Grid3* collection) {
    Grid3 w = intensity;
    if (collection) {
        if (!collection->sameShape(intensity)) throw InvalidArgument("collection grid is not commensurate");
        for (std::size_t i = 0; i < w.size(); ++i) w.data[i] *= collection->data[i];
    }
    return w;
}

namespace {

// Intensity levels with their summed weights; identical intensities are merged.
struct Levels {
    std::vector<double> intensity, weight;
    double dV = 1.0;
};

Levels compress(const IntensityField& I, const Grid3& w) {
    std::vector<std::pair<double, double>> v;
    v.reserve(I.size());
    for (std::size_t i = 0; i < I.size(); ++i)
        if (w.data[i] != 0.0) v.emplace_back(I.data[i], w.data[i]);
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    Levels L;
    L.dV = I.cellVolume();
    for (const auto& [x, ww] : v) {
        if (!L.intensity.empty() && L.intensity.back() == x) L.weight.back() += ww;
        else {
            L.intensity.push_back(x);
            L.weight.push_back(ww);
        }
    }
    return L;
}

// dV sum w (1 - exp(-tau I / tau_S)) for each tau
std::vector<double> saturationShape(const Levels& L, const std::vector<double>& taus, double tauS) {
    std::vector<double> out(taus.size(), 0.0);
    for (std::size_t k = 0; k < taus.size(); ++k) {
        double s = 0.0;
        const double rate = taus[k] / tauS;
        for (std::size_t i = 0; i < L.intensity.size(); ++i) s -= L.weight[i] * std::expm1(-rate * L.intensity[i]);
        out[k] = s * L.dV;
    }
    return out;
}

const Grid3& weightsFor(const IntensityField& I, const Grid3* w, Grid3& storage) {
    if (w) {
        if (!w->sameShape(I)) throw InvalidArgument("weighting grid is not commensurate with intensity grid");
        return *w;
    }
    storage = defaultWeighting(I);
    return storage;
}

}  // namespace

std::vector<double> contrastCurve(const IntensityField& intensity, const std::vector<double>& taus,
                                  double tauS, double rho0, const Grid3* w) {
    checkIntensity(intensity);
    if (!(tauS > 0.0)) throw InvalidArgument("saturation time must be positive");
    for (double t : taus)
        if (t < 0.0) throw InvalidArgument("pumping times must be >= 0");
    Grid3 storage;
    const Grid3& ww = weightsFor(intensity, w, storage);
    auto c = saturationShape(compress(intensity, ww), taus, tauS);
    for (auto& v : c) v *= rho0;
    return c;
}

SaturationFit fitSaturation(const std::vector<double>& taus, const std::vector<double>& contrast,
                            const IntensityField& intensity, const Grid3* w) {
    if (taus.size() != contrast.size()) throw InvalidArgument("tau and contrast lengths differ");
    if (taus.size() < 4) throw InvalidArgument("saturation fit needs at least 4 data points");
    checkIntensity(intensity);
    const auto [cmin, cmax] = std::minmax_element(contrast.begin(), contrast.end());
    if (!(*cmax - *cmin > 1e-12 * std::max(std::abs(*cmax), std::abs(*cmin))))
        throw InvalidArgument("degenerate contrast data: curve is flat");
    const auto [tmin, tmax] = std::minmax_element(taus.begin(), taus.end());
    double tpos = *tmax;
    for (double t : taus)
        if (t > 0.0) tpos = std::min(tpos, t);
    if (!(*tmax > 0.0)) throw InvalidArgument("pumping times must include a positive value");
    const double imax = intensity.max();
    if (!(imax > 0.0)) throw InvalidArgument("intensity is identically zero");

    Grid3 storage;
    const Levels levels = compress(intensity, weightsFor(intensity, w, storage));

    struct Eval {
        double rss, amp;
    };
    auto evaluate = [&](double logTau) -> Eval {
        const auto g = saturationShape(levels, taus, std::exp(logTau));
        double cg = 0.0, gg = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            cg += contrast[k] * g[k];
            gg += g[k] * g[k];
        }
        const double a = gg > 0.0 ? cg / gg : 0.0;
        double rss = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double r = contrast[k] - a * g[k];
            rss += r * r;
        }
        return {rss, a};
    };

    const double lo = std::log(imax * tpos / 100.0), hi = std::log(imax * *tmax * 100.0);
    const int ngrid = 64;
    int best = 0;
    double bestRss = INFINITY;
    for (int k = 0; k <= ngrid; ++k) {
        const double rss = evaluate(lo + (hi - lo) * k / ngrid).rss;
        if (rss < bestRss) {
            bestRss = rss;
            best = k;
        }
    }
    const double a = lo + (hi - lo) * std::max(0, best - 1) / ngrid;
    const double b = lo + (hi - lo) * std::min(ngrid, best + 1) / ngrid;
    const double logTau = goldenSection([&](double x) { return evaluate(x).rss; }, a, b, 1e-12);
    const Eval e = evaluate(logTau);
    return {std::exp(logTau), e.amp, std::sqrt(e.rss)};
}

std::vector<Grid3> normalizedProfiles(const std::vector<Grid3>& profiles, std::size_t reference) {
    if (reference >= profiles.size()) throw InvalidArgument("reference profile index out of range");
    const Grid3& ref = profiles[reference];
    const double guard = 1e-6 * ref.max();
    if (!(ref.max() > 0.0)) throw InvalidArgument("reference profile must be positive on its support");
    std::vector<Grid3> out;
    for (const auto& p : profiles) {
        if (!p.sameShape(ref)) throw InvalidArgument("profiles are not commensurate");
        Grid3 r = p;
        for (std::size_t i = 0; i < r.size(); ++i) r.data[i] = ref.data[i] > guard ? p.data[i] / ref.data[i] : 0.0;
        out.push_back(std::move(r));
    }
    return out;
}

void writeContrastCsv(const std::string& path, const std::vector<double>& taus,
                      const std::vector<double>& contrast) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw InvalidArgument("cannot write " + path);
    std::fprintf(fp, "tau_s,contrast\n");
    for (std::size_t k = 0; k < taus.size(); ++k) std::fprintf(fp, "%.17g,%.17g\n", taus[k], contrast[k]);
    std::fclose(fp);
}

void readContrastCsv(const std::string& path, std::vector<double>& taus, std::vector<double>& contrast) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot read " + path);
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) out.push_back(field);
        return out;
    };
    std::string line;
    std::getline(f, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split(line);
    if (header.size() != 2)
        throw InvalidArgument(path + ":1: expected 2 columns (tau_s,contrast), found " + std::to_string(header.size()));
    if (header[0] != "tau_s") throw InvalidArgument(path + ":1: expected header tau_s,contrast");
    taus.clear();
    contrast.clear();
    int lineNo = 1;
    while (std::getline(f, line)) {
        ++lineNo;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split(line);
        const std::string where = path + ":" + std::to_string(lineNo) + ": ";
        if (fields.size() != 2)
            throw InvalidArgument(where + "expected 2 columns, found " + std::to_string(fields.size()));
        try {
            std::size_t a = 0, b = 0;
            const double t = std::stod(fields[0], &a);
            const double c = std::stod(fields[1], &b);
            if (a != fields[0].size() || b != fields[1].size()) throw std::invalid_argument("trailing text");
            taus.push_back(t);
            contrast.push_back(c);
        } catch (const std::exception&) {
            throw InvalidArgument(where + "expected two numbers");
        }
    }
}

}  // namespace nvmri
