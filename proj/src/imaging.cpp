#include "nvmri/imaging.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

#include "nvmri/constants.hpp"
#include "nvmri/errors.hpp"
#include "nvmri/fitting.hpp"

namespace nvmri {

double CoherenceScan::spacing() const { return Qp.size() > 1 ? Qp[1] - Qp[0] : 0.0; }

void CoherenceScan::checkUniform(double tol) const {
    if (Qp.size() < 2) throw InvalidArgument("scan needs at least 2 points");
    if (amplitude.size() != Qp.size()) throw InvalidArgument("scan amplitudes do not match grid");
    const double d = spacing();
    if (!(d > 0.0)) throw InvalidArgument("scan grid must be increasing");
    for (std::size_t k = 1; k < Qp.size(); ++k)
        if (std::abs((Qp[k] - Qp[k - 1]) - d) > tol * std::max(d, std::abs(Qp[k])))
            throw InvalidArgument("scan grid is not uniform");
}

std::vector<double> symmetricGrid(double qmax, int n) {
    if (n < 2 || !(qmax > 0.0)) throw InvalidArgument("symmetric grid needs qmax > 0 and n >= 2");
    std::vector<double> g(n);
    for (int k = 0; k < n; ++k) g[k] = -qmax + 2.0 * qmax * k / (n - 1);
    return g;
}

namespace {

double envelopeAt(double q, const std::optional<DecoherenceModel>& dec, double gradMag) {
    if (!dec) return 1.0;
    return decoherenceEnvelope(windingTimeFor(q, gradMag), *dec);
}

}  // namespace

CoherenceScan acquireScan(const SpinEnsemble& ens, const std::vector<std::complex<double>>& coherence,
                          const Vec3& axis, const std::vector<double>& Qp,
                          std::optional<DecoherenceModel> decoherence, double gradMag) {
    if (coherence.size() != ens.size()) throw InvalidArgument("coherence must match ensemble size");
    CoherenceScan s;
    s.axis = normalized(axis);
    s.Qp = Qp;
    s.decoherence = decoherence;
    s.amplitude.resize(Qp.size());
    std::vector<double> proj(ens.size());
    for (std::size_t j = 0; j < ens.size(); ++j) proj[j] = dot(s.axis, ens.positions[j]);
    for (std::size_t k = 0; k < Qp.size(); ++k) {
        std::complex<double> a{};
        for (std::size_t j = 0; j < ens.size(); ++j) a += coherence[j] * std::polar(1.0, -Qp[k] * proj[j]);
        s.amplitude[k] = a * envelopeAt(Qp[k], decoherence, gradMag);
    }
    s.checkUniform();
    return s;
}

CoherenceScan acquireScan(const TrajectoryBatch& batch, const SpinEnsemble& ens, const Vec3& axis,
                          const std::vector<double>& Qp, std::optional<DecoherenceModel> decoherence,
                          double gradMag, int workers) {
    CoherenceScan s;
    s.axis = normalized(axis);
    s.Qp = Qp;
    s.decoherence = decoherence;
    s.amplitude.resize(Qp.size());
    parallelFor(static_cast<int>(Qp.size()), workers, [&](int k) {
        s.amplitude[k] = measureFourierMode(batch, ens, s.axis * Qp[k]).mean *
                         envelopeAt(Qp[k], decoherence, gradMag);
    });
    s.checkUniform();
    return s;
}

std::vector<std::complex<double>> spiralCoherence(const SpinEnsemble& ens, const Vec3& Q, double theta) {
    std::vector<std::complex<double>> c(ens.size());
    for (std::size_t j = 0; j < ens.size(); ++j)
        c[j] = std::polar(0.5 * std::sin(theta) * ens.polarizations[j], dot(Q, ens.positions[j]));
    return c;
}

CoherenceScan hermitianExtend(const CoherenceScan& one) {
    one.checkUniform();
    if (std::abs(one.Qp.front()) > 1e-12 * one.spacing())
        throw InvalidArgument("one-sided scan must start at Q' = 0");
    CoherenceScan s = one;
    s.symmetric = false;
    const std::size_t n = one.Qp.size();
    s.Qp.assign(2 * n - 1, 0.0);
    s.amplitude.assign(2 * n - 1, {});
    for (std::size_t k = 0; k < n; ++k) {
        s.Qp[n - 1 + k] = one.Qp[k];
        s.amplitude[n - 1 + k] = one.amplitude[k];
        s.Qp[n - 1 - k] = -one.Qp[k];
        s.amplitude[n - 1 - k] = std::conj(one.amplitude[k]);
    }
    return s;
}

namespace {
std::mutex& planMutex1d() {
    static std::mutex m;
    return m;
}
}  // namespace

SpatialProfile reconstruct(const CoherenceScan& scan, Window window, int zeroPad) {
    scan.checkUniform();
    if (zeroPad < 1) throw InvalidArgument("zero-pad factor must be >= 1");
    const int n = static_cast<int>(scan.Qp.size());
    const int m = n * zeroPad;
    const double dQ = scan.spacing();
    const double dx = constants::twoPi / (m * dQ);

    fftw_complex* buf = fftw_alloc_complex(m);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planMutex1d());
        plan = fftw_plan_dft_1d(m, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    auto* z = reinterpret_cast<std::complex<double>*>(buf);
    std::fill(z, z + m, std::complex<double>{});
    for (int k = 0; k < n; ++k) {
        double w = 1.0;
        if (window == Window::Hann) w = 0.5 * (1.0 - std::cos(constants::twoPi * k / (n - 1)));
        z[k] = w * scan.amplitude[k];
    }
    fftw_execute(plan);

    SpatialProfile p;
    p.x.resize(m);
    p.value.resize(m);
    double qmax = 0.0;
    for (double q : scan.Qp) qmax = std::max(qmax, std::abs(q));
    p.resolution = qmax > 0.0 ? constants::twoPi / qmax : 0.0;
    const double q0 = scan.Qp.front();
    for (int i = 0; i < m; ++i) {
        const int idx = i - m / 2;
        const int src = ((idx % m) + m) % m;
        const double x = idx * dx;
        p.x[i] = x;
        p.value[i] = dQ / constants::twoPi * z[src] * std::polar(1.0, q0 * x);
    }
    {
        std::lock_guard<std::mutex> lock(planMutex1d());
        fftw_destroy_plan(plan);
    }
    fftw_free(buf);
    return p;
}

double scanEnergy(const CoherenceScan& scan) {
    double e = 0.0;
    for (const auto& a : scan.amplitude) e += std::norm(a);
    return e * scan.spacing() / constants::twoPi;
}

double profileEnergy(const SpatialProfile& p) {
    double e = 0.0;
    for (const auto& v : p.value) e += std::norm(v);
    return e * p.spacing();
}

PhaseSlopeResult phaseSlope(const SpatialProfile& p, double threshold) {
    if (p.value.size() < 3) throw InvalidArgument("profile too short for a phase fit");
    std::size_t peak = 0;
    double vmax = 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i)
        if (std::abs(p.value[i]) > vmax) {
            vmax = std::abs(p.value[i]);
            peak = i;
        }
    if (!(vmax > 0.0)) throw InvalidArgument("profile has no coherence above the noise floor");
    std::size_t lo = peak, hi = peak;
    while (lo > 0 && std::abs(p.value[lo - 1]) >= threshold * vmax) --lo;
    while (hi + 1 < p.value.size() && std::abs(p.value[hi + 1]) >= threshold * vmax) ++hi;
    const std::size_t n = hi - lo + 1;
    if (n < 3) throw InvalidArgument("fit region above threshold has fewer than 3 points");
    std::vector<double> x(n), ph(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = p.x[lo + i];
        ph[i] = std::arg(p.value[lo + i]);
        w[i] = std::norm(p.value[lo + i]);
    }
    ph = unwrapPhase(ph);
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(ph[i] - ph[i - 1]) > 0.5 * constants::pi)
            throw NumericalError("phase unwrap failed: step exceeds pi/2 between samples");
    const LineFit f = fitLine(x, ph, w);
    return {f.slope, f.slopeErr, static_cast<int>(n)};
}

RevivalWidth revivalWidth(const CoherenceScan& scan) {
    scan.checkUniform();
    const std::size_t n = scan.Qp.size();
    std::vector<double> mag(n);
    for (std::size_t k = 0; k < n; ++k) mag[k] = std::abs(scan.amplitude[k]);
    const std::size_t peak = static_cast<std::size_t>(std::max_element(mag.begin(), mag.end()) - mag.begin());
    RevivalWidth r;
    r.peakQ = scan.Qp[peak];
    r.peakValue = mag[peak];
    if (!(r.peakValue > 0.0)) throw InvalidArgument("scan is identically zero");
    const double half = 0.5 * r.peakValue;

    auto crossing = [&](int step) -> double {
        long k = static_cast<long>(peak);
        while (k + step >= 0 && k + step < static_cast<long>(n) && mag[k + step] >= half) k += step;
        const long j = k + step;
        if (j < 0 || j >= static_cast<long>(n)) throw InvalidArgument("revival extends beyond the scan range");
        const double t = (mag[k] - half) / (mag[k] - mag[j]);
        return scan.Qp[k] + t * (scan.Qp[j] - scan.Qp[k]);
    };
    const double left = crossing(-1), right = crossing(+1);
    r.fwhm = right - left;

    auto firstMin = [&](int step) -> double {
        long k = static_cast<long>(peak);
        while (k + step >= 0 && k + step < static_cast<long>(n) && mag[k + step] < mag[k]) k += step;
        return std::abs(scan.Qp[k] - r.peakQ);
    };
    r.nullHalfWidth = 0.5 * (firstMin(-1) + firstMin(+1));

    // secondary maxima above half height outside the main lobe
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (scan.Qp[k] >= left && scan.Qp[k] <= right) continue;
        if (mag[k] >= half && mag[k] >= mag[k - 1] && mag[k] >= mag[k + 1]) r.multimodal = true;
    }
    return r;
}

void writeScanCsv(const std::string& path, const CoherenceScan& scan) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw InvalidArgument("cannot write " + path);
    std::fprintf(fp, "Qp_rad_per_nm,re,im\n");
    for (std::size_t k = 0; k < scan.Qp.size(); ++k)
        std::fprintf(fp, "%.17g,%.17g,%.17g\n", scan.Qp[k], scan.amplitude[k].real(), scan.amplitude[k].imag());
    std::fclose(fp);
}

CoherenceScan readScanCsv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot read scan " + path);
    std::string line;
    std::getline(f, line);
    if (line.rfind("Qp_rad_per_nm", 0) != 0) throw InvalidArgument(path + ":1: expected header Qp_rad_per_nm,re,im");
    CoherenceScan s;
    int lineNo = 1;
    while (std::getline(f, line)) {
        ++lineNo;
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream is(line);
        double q, re, im;
        if (!(is >> q >> re >> im)) throw InvalidArgument(path + ":" + std::to_string(lineNo) + ": bad row");
        s.Qp.push_back(q);
        s.amplitude.emplace_back(re, im);
    }
    s.checkUniform();
    return s;
}

void writeProfileCsv(const std::string& path, const SpatialProfile& p) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw InvalidArgument("cannot write " + path);
    std::fprintf(fp, "x_nm,re,im,mag\n");
    for (std::size_t i = 0; i < p.x.size(); ++i)
        std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g\n", p.x[i], p.value[i].real(), p.value[i].imag(),
                     std::abs(p.value[i]));
    std::fclose(fp);
}

}  // namespace nvmri
