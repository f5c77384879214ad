#include "nvmri/analytics.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>

#include "nvmri/constants.hpp"
#include "nvmri/errors.hpp"
#include "nvmri/special.hpp"

namespace nvmri {

void IsotropicShellParams::validate() const {
    if (!(innerCutoff > 0.0 && outerExtent > innerCutoff))
        throw InvalidArgument("isotropic shell needs 0 < a < R*");
    if (!(density > 0.0)) throw InvalidArgument("isotropic shell density must be positive");
}

void GaussianProfileParams::validate() const {
    if (!(width > 0.0)) throw InvalidArgument("Gaussian width must be positive");
    if (!(lambda > 0.0 && lambda < 1.0)) throw InvalidArgument("lambda must lie in (0, 1)");
    if (!(totalPolarization > 0.0)) throw InvalidArgument("total polarization must be positive");
}

namespace {

const std::vector<double>& checkWeights(const SpinEnsemble& ens, const std::vector<double>* w,
                                        std::vector<double>& storage) {
    if (ens.size() == 0) throw InvalidArgument("empty ensemble");
    if (w) {
        if (w->size() != ens.size()) throw InvalidArgument("weights must match ensemble size");
        return *w;
    }
    storage.assign(ens.size(), 1.0);
    return storage;
}

double referencePolarization(const SpinEnsemble& ens, const std::vector<double>& w) {
    double rho0 = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i) rho0 += w[i] * ens.polarizations[i];
    if (!(rho0 > 0.0)) throw InvalidArgument("weighted polarization must be positive");
    return rho0;
}

// (1/rho0) sum_i w_i P_i sum_{j != i} P_j J(r_ij) k(r_ij)
double pairSum(const SpinEnsemble& ens, const std::vector<double>* weights,
               const std::function<double(const Vec3&)>& k) {
    std::vector<double> storage;
    const auto& w = checkWeights(ens, weights, storage);
    const double rho0 = referencePolarization(ens, w);
    const Vec3 eta = ens.group.axis;
    double total = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
        const double wi = w[i] * ens.polarizations[i];
        if (wi == 0.0) continue;
        double s = 0.0;
        for (std::size_t j = 0; j < ens.size(); ++j) {
            if (j == i) continue;
            const Vec3 d = ens.displacement(i, j);
            s += ens.polarizations[j] * dipolarCoupling(d, eta, ens.uvCutoff) * k(d);
        }
        total += wi * s;
    }
    return total / rho0;
}

double oneMinusCos(double x) {
    const double s = std::sin(0.5 * x);
    return 2.0 * s * s;
}

// V(x) for the kernel: Taylor below 1, double closed form above.
double vKernel(double x) {
    if (x < 1.0) return special::vFunctionTaylor(x);
    return 3.0 * (std::sin(x) / x - std::cos(x)) / (x * x);
}

}  // namespace

double chiNumeric(const SpinEnsemble& ens, const Vec3& Q, const std::vector<double>* weights) {
    if (ens.size() == 0) throw InvalidArgument("empty ensemble");
    if (Q == Vec3{}) return 0.0;
    return pairSum(ens, weights, [&](const Vec3& d) { return oneMinusCos(dot(Q, d)); });
}

double chiZZ(const SpinEnsemble& ens, const std::vector<double>* weights) {
    return pairSum(ens, weights, [](const Vec3&) { return 1.0; });
}

ExchangeFields exchangeFields(const SpinEnsemble& ens, const Vec3& Q, const std::vector<double>* weights) {
    return {chiNumeric(ens, Q, weights), chiZZ(ens, weights)};
}

double chiIsotropicClosed(const IsotropicShellParams& p, const Vec3& Q, const Vec3& eta) {
    p.validate();
    const double q = norm(Q);
    if (q == 0.0) return 0.0;
    const double A = dipolarAnisotropy(eta, Q / q);
    return constants::J0 * (4.0 * constants::pi / 3.0) * A * p.density *
           (special::vFunction(q * p.innerCutoff) - special::vFunction(q * p.outerExtent));
}

// ---- Gaussian profile ---------------------------------------------------------------

namespace {

struct GaussLegendre {
    std::vector<double> x, w;
    explicit GaussLegendre(int n) : x(n), w(n) {
        for (int i = 0; i < n; ++i) {
            double z = std::cos(constants::pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int k = 1; k <= n; ++k) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
                }
                dp = n * (z * p0 - p1) / (z * z - 1.0);
                const double dz = p0 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }
};

const GaussLegendre& gl20() {
    static const GaussLegendre g(20);
    return g;
}

// e^{-z} i2(z), z >= 0
double i2Scaled(double z) {
    if (z < 2.0) return special::i2(z) * std::exp(-z);
    const double e = std::exp(-2.0 * z);
    return (3.0 / (z * z) + 1.0) * (1.0 - e) / (2.0 * z) - 3.0 * (1.0 + e) / (2.0 * z * z);
}

double gaussianMomentSeries(int n, double q) {
    const double z2 = 4.0 * q * q;
    double term = z2 * std::tgamma(n + 2.5) / 30.0;
    double sum = term;
    for (int k = 0; k < 400; ++k) {
        term *= z2 * (n + k + 2.5) / (2.0 * (k + 1.0) * (2.0 * k + 7.0));
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return std::exp(-q * q) * sum;
}

double gaussianMomentHypergeometric(int n, double q) {
    const double q2 = q * q;
    const double a = n + 0.5;
    const double m1 = special::hyp1f1(a, 0.5, q2);
    const double m2 = special::hyp1f1(a, 1.5, q2);
    return std::exp(-q2) / (8.0 * q2) * std::tgamma(a) *
           ((2.0 * q2 - 3.0) * m1 + (4.0 * n * q2 + 3.0) * m2);
}

double gaussianMomentZero(double q) {
    const double sp = std::sqrt(constants::pi);
    return (2.0 * sp * q * (2.0 * q * q - 3.0) +
            3.0 * constants::pi * std::exp(-q * q) * special::erfi(q)) /
           (16.0 * q * q * q);
}

}  // namespace

double gaussianMomentQuadrature(int n, double q) {
    if (n < 0) throw InvalidArgument("moment index must be >= 0");
    if (q == 0.0) return 0.0;
    q = std::abs(q);
    // integrand x^{2n+2} e^{-(x-q)^2} [e^{-2qx} i2(2qx)]
    const double hi = q + std::sqrt(2.0 * n + 2.0) + 16.0;
    const double panel = 0.25;
    const int panels = static_cast<int>(std::ceil(hi / panel));
    const auto& g = gl20();
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double a = p * panel, b = std::min(hi, a + panel);
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        for (std::size_t k = 0; k < g.x.size(); ++k) {
            const double x = c + h * g.x[k];
            if (x <= 0.0) continue;
            const double lg = (2.0 * n + 2.0) * std::log(x) - (x - q) * (x - q);
            sum += g.w[k] * h * std::exp(lg) * i2Scaled(2.0 * q * x);
        }
    }
    return sum;
}

double gaussianMoment(int n, double q) {
    if (n < 0) throw InvalidArgument("moment index must be >= 0");
    q = std::abs(q);
    if (q == 0.0) return 0.0;
    if (q < 0.5) return gaussianMomentSeries(n, q);
    if (q > 5.0) return gaussianMomentQuadrature(n, q);
    return n == 0 ? gaussianMomentZero(q) : gaussianMomentHypergeometric(n, q);
}

SeriesResult gaussianExchangeSeries(double q, double lambda, int nMax, double tol) {
    if (!(lambda > 0.0 && lambda <= 0.5)) throw InvalidArgument("series requires lambda in (0, 0.5]");
    if (q < 0.0) throw InvalidArgument("series requires q >= 0");
    if (q == 0.0) return {0.0, 0};
    double coef = 6.0 / 6.0;  // 6(n+1)/(2n+3)! at n = 0
    double lam2n = 1.0;
    double sum = 0.0;
    for (int n = 0; n <= nMax; ++n) {
        if (n > 0) {
            coef *= -(n + 1.0) / (n * (2.0 * n + 2.0) * (2.0 * n + 3.0));
            lam2n *= lambda * lambda;
        }
        const double term = coef * lam2n * gaussianMoment(n, q);
        sum += term;
        if (n > 0 && (std::abs(term) <= tol * std::abs(sum) || term == 0.0)) return {sum, n + 1};
    }
    throw NumericalError("Gaussian exchange series did not converge within nMax terms");
}

double chiGaussian(const GaussianProfileParams& p, const Vec3& Q, const Vec3& eta) {
    p.validate();
    const double q = norm(Q);
    if (q == 0.0) return 0.0;
    const double A = dipolarAnisotropy(eta, Q / q);
    const double F = gaussianExchangeSeries(q * p.width, p.lambda).value;
    return 2.0 / (3.0 * constants::pi) * constants::J0 * p.totalPolarization /
           (p.width * p.width * p.width) * A * F;
}

// ---- grid transforms ------------------------------------------------------------------

namespace {

std::mutex& planMutex() {
    static std::mutex m;
    return m;
}

class Fft3 {
public:
    explicit Fft3(std::array<int, 3> dims) : dims_(dims) {
        n_ = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
        data_ = fftw_alloc_complex(n_);
        if (!data_) throw NumericalError("FFT buffer allocation failed");
        std::lock_guard<std::mutex> lock(planMutex());
        plan_ = fftw_plan_dft_3d(dims[2], dims[1], dims[0], data_, data_, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    ~Fft3() {
        std::lock_guard<std::mutex> lock(planMutex());
        fftw_destroy_plan(plan_);
        fftw_free(data_);
    }
    Fft3(const Fft3&) = delete;
    Fft3& operator=(const Fft3&) = delete;

    std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(data_); }
    std::size_t size() const { return n_; }
    void forward() { fftw_execute(plan_); }
    void clear() { std::fill(data(), data() + n_, std::complex<double>{}); }

private:
    std::array<int, 3> dims_;
    std::size_t n_ = 0;
    fftw_complex* data_ = nullptr;
    fftw_plan plan_{};
};

struct PaddedLayout {
    std::array<int, 3> src{}, dims{};
    Vec3 h;
    std::size_t index(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(iz) * dims[1] + iy) * dims[0] + ix;
    }
    int signedIndex(int k, int axis) const { return k < (dims[axis] + 1) / 2 ? k : k - dims[axis]; }
    Vec3 wavevector(int kx, int ky, int kz) const {
        return {constants::twoPi * signedIndex(kx, 0) / (dims[0] * h.x),
                constants::twoPi * signedIndex(ky, 1) / (dims[1] * h.y),
                constants::twoPi * signedIndex(kz, 2) / (dims[2] * h.z)};
    }
    Vec3 displacement(int kx, int ky, int kz) const {
        return {signedIndex(kx, 0) * h.x, signedIndex(ky, 1) * h.y, signedIndex(kz, 2) * h.z};
    }
};

PaddedLayout layoutFor(const Grid3& g, int pad) {
    if (pad < 1) throw InvalidArgument("zero-pad factor must be >= 1");
    PaddedLayout L;
    L.src = g.dims;
    for (int k = 0; k < 3; ++k) L.dims[k] = g.dims[k] * pad;
    L.h = g.spacing;
    return L;
}

// Load grid values times e^{i Q.(n h)} into the padded buffer.
void load(Fft3& fft, const PaddedLayout& L, const std::vector<double>& v, const Vec3& Q) {
    fft.clear();
    auto* d = fft.data();
    const bool phase = Q != Vec3{};
    for (int iz = 0; iz < L.src[2]; ++iz)
        for (int iy = 0; iy < L.src[1]; ++iy)
            for (int ix = 0; ix < L.src[0]; ++ix) {
                const double val = v[(static_cast<std::size_t>(iz) * L.src[1] + iy) * L.src[0] + ix];
                if (val == 0.0) continue;
                std::complex<double> z = val;
                if (phase) {
                    const double ph = Q.x * ix * L.h.x + Q.y * iy * L.h.y + Q.z * iz * L.h.z;
                    z = std::polar(val, ph);
                }
                d[L.index(ix, iy, iz)] = z;
            }
}

// (dV / M) sum_k conj(H_k) G_k J(q_k)
double spectralPair(Fft3& a, Fft3& b, const PaddedLayout& L, const std::vector<double>& f,
                    const std::vector<double>& rho, const Vec3& Q, const KernelOptions& opt) {
    load(a, L, f, Q);
    load(b, L, rho, Q);
    a.forward();
    b.forward();
    const auto* H = a.data();
    const auto* G = b.data();
    const double dV = L.h.x * L.h.y * L.h.z;
    const double pref = -(4.0 * constants::pi / 3.0) * constants::J0;
    double sum = 0.0;
    for (int kz = 0; kz < L.dims[2]; ++kz)
        for (int ky = 0; ky < L.dims[1]; ++ky)
            for (int kx = 0; kx < L.dims[0]; ++kx) {
                const Vec3 q = L.wavevector(kx, ky, kz);
                const double qn = norm(q);
                if (qn == 0.0) continue;
                const double c = dot(opt.eta, q) / qn;
                const double Jq = pref * 0.5 * (3.0 * c * c - 1.0) * vKernel(qn / opt.Lambda);
                const std::size_t i = L.index(kx, ky, kz);
                sum += Jq * (std::conj(H[i]) * G[i]).real();
            }
    return sum * dV / static_cast<double>(a.size());
}

// dV^2 sum_n sum_m f_n rho_m K(r_m - r_n) with K on minimum-image padded displacements.
double latticePair(Fft3& a, Fft3& b, const PaddedLayout& L, const std::vector<double>& f,
                   const std::vector<double>& rho, const std::function<double(const Vec3&)>& kernel) {
    a.clear();
    auto* K = a.data();
    for (int kz = 0; kz < L.dims[2]; ++kz)
        for (int ky = 0; ky < L.dims[1]; ++ky)
            for (int kx = 0; kx < L.dims[0]; ++kx) {
                const Vec3 d = L.displacement(kx, ky, kz);
                if (d == Vec3{}) continue;
                K[L.index(kx, ky, kz)] = kernel(d);
            }
    a.forward();
    load(b, L, f, {});
    b.forward();
    auto* F = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) K[i] *= F[i];
    load(b, L, rho, {});
    b.forward();
    const auto* P = b.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (std::conj(P[i]) * K[i]).real();
    const double dV = L.h.x * L.h.y * L.h.z;
    return sum * dV * dV / static_cast<double>(a.size());
}

struct GridInputs {
    std::vector<double> f;  // w * rho
    double rho0 = 0.0;
};

GridInputs prepare(const Grid3& rho, const Grid3* w, const KernelOptions& opt) {
    if (rho.size() == 0) throw InvalidArgument("empty density grid");
    if (!(opt.Lambda > 0.0)) throw InvalidArgument("Lambda must be positive");
    const double en = norm(opt.eta);
    if (std::abs(en - 1.0) > 1e-9) throw InvalidArgument("eta must be a unit vector");
    GridInputs in;
    in.f = rho.data;
    if (w) {
        if (!w->sameShape(rho)) throw InvalidArgument("weighting grid is not commensurate with density grid");
        for (std::size_t i = 0; i < in.f.size(); ++i) in.f[i] *= w->data[i];
    }
    double s = 0.0;
    for (double v : in.f) s += v;
    in.rho0 = s * rho.cellVolume();
    if (!(in.rho0 > 0.0)) throw InvalidArgument("weighted polarization must be positive");
    return in;
}

double dipolarKernel(const Vec3& d, const KernelOptions& opt) {
    const double r = norm(d);
    if (r < 1.0 / opt.Lambda) return 0.0;
    const double c = dot(opt.eta, d) / r;
    return constants::J0 * 0.5 * (3.0 * c * c - 1.0) / (r * r * r);
}

bool aliased(const Grid3& g, const Vec3& Q) {
    for (int k = 0; k < 3; ++k)
        if (std::abs(Q[k]) > 0.5 * constants::pi / g.spacing[k]) return true;
    return false;
}

}  // namespace

ConvolutionResult kernelConvolution(const Grid3& rho, const Grid3* w, const Vec3& Q,
                                    const KernelOptions& opt) {
    const GridInputs in = prepare(rho, w, opt);
    ConvolutionResult r;
    r.aliasing = aliased(rho, Q);
    if (Q == Vec3{}) return r;
    const PaddedLayout L = layoutFor(rho, opt.pad);
    Fft3 a(L.dims), b(L.dims);
    if (opt.mode == KernelMode::Spectral) {
        const double t1 = spectralPair(a, b, L, in.f, rho.data, {}, opt);
        const double t2 = spectralPair(a, b, L, in.f, rho.data, Q, opt);
        r.chi = (t1 - t2) / in.rho0;
    } else {
        r.chi = latticePair(a, b, L, in.f, rho.data, [&](const Vec3& d) {
                    return dipolarKernel(d, opt) * oneMinusCos(dot(Q, d));
                }) /
                in.rho0;
    }
    return r;
}

double chiZZGrid(const Grid3& rho, const Grid3* w, const KernelOptions& opt) {
    const GridInputs in = prepare(rho, w, opt);
    const PaddedLayout L = layoutFor(rho, opt.pad);
    Fft3 a(L.dims), b(L.dims);
    if (opt.mode == KernelMode::Spectral) return spectralPair(a, b, L, in.f, rho.data, {}, opt) / in.rho0;
    return latticePair(a, b, L, in.f, rho.data, [&](const Vec3& d) { return dipolarKernel(d, opt); }) /
           in.rho0;
}

MomentResult exchangeMoment(const SpinEnsemble& ens, const Vec3& direction, double dQ,
                            const std::vector<double>* weights) {
    if (!(dQ > 0.0)) throw InvalidArgument("dQ must be positive");
    const Vec3 u = normalized(direction);
    MomentResult m;
    m.finiteDifference = 2.0 * chiNumeric(ens, u * dQ, weights) / (dQ * dQ);
    m.direct = pairSum(ens, weights, [&](const Vec3& d) {
        const double p = dot(u, d);
        return p * p;
    });
    return m;
}

MomentResult exchangeMoment(const Grid3& rho, const Grid3* w, const Vec3& direction, double dQ,
                            const KernelOptions& opt) {
    if (!(dQ > 0.0)) throw InvalidArgument("dQ must be positive");
    const Vec3 u = normalized(direction);
    MomentResult m;
    m.finiteDifference = 2.0 * kernelConvolution(rho, w, u * dQ, opt).chi / (dQ * dQ);
    const GridInputs in = prepare(rho, w, opt);
    const PaddedLayout L = layoutFor(rho, opt.pad);
    Fft3 a(L.dims), b(L.dims);
    m.direct = latticePair(a, b, L, in.f, rho.data, [&](const Vec3& d) {
                   const double p = dot(u, d);
                   return dipolarKernel(d, opt) * p * p;
               }) /
               in.rho0;
    return m;
}

double precessionFrequency(double theta, double g0, double g2, const ExchangeFields& f) {
    return std::cos(theta) * (g0 * f.chiXY + g2 * f.chiZZ);
}

void writeChiCsv(const std::string& path, const std::vector<ChiRow>& rows) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw InvalidArgument("cannot write " + path);
    std::fprintf(fp, "Q,chi_xy,chi_zz,omega\n");
    for (const auto& r : rows) std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g\n", r.Q, r.chiXY, r.chiZZ, r.omega);
    std::fclose(fp);
}

}  // namespace nvmri
