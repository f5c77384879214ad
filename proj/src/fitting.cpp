#include "nvmri/fitting.hpp"

#include <cmath>
#include <complex>
#include <limits>

#include "nvmri/constants.hpp"
#include "nvmri/errors.hpp"

namespace nvmri {

LineFit fitLine(const std::vector<double>& x, const std::vector<double>& y,
                const std::vector<double>& w) {
    const std::size_t n = x.size();
    if (n != y.size() || (!w.empty() && w.size() != n)) throw InvalidArgument("fitLine: size mismatch");
    if (n < 2) throw InvalidArgument("fitLine: need at least two points");
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double wi = w.empty() ? 1.0 : w[i];
        sw += wi;
        sx += wi * x[i];
        sy += wi * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double wi = w.empty() ? 1.0 : w[i];
        sxx += wi * (x[i] - mx) * (x[i] - mx);
        sxy += wi * (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) throw InvalidArgument("fitLine: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double wi = w.empty() ? 1.0 : w[i];
        const double r = y[i] - f.intercept - f.slope * x[i];
        rss += wi * r * r;
    }
    f.residualNorm = std::sqrt(rss);
    if (n > 2) f.slopeErr = std::sqrt(rss / sxx / static_cast<double>(n - 2));
    return f;
}

std::vector<double> unwrapPhase(const std::vector<double>& phase) {
    std::vector<double> out(phase);
    double offset = 0.0;
    for (std::size_t i = 1; i < out.size(); ++i) {
        const double d = phase[i] - phase[i - 1];
        if (d > constants::pi) offset -= constants::twoPi * std::round(d / constants::twoPi);
        else if (d < -constants::pi) offset -= constants::twoPi * std::round(d / constants::twoPi);
        out[i] = phase[i] + offset;
    }
    return out;
}

NonlinearFit levenbergMarquardt(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
                                Eigen::VectorXd p, int maxIter, double tol,
                                const Eigen::VectorXd& typical) {
    NonlinearFit fit;
    const int n = static_cast<int>(p.size());
    Eigen::VectorXd r = residuals(p);
    const int m = static_cast<int>(r.size());
    double cost = r.squaredNorm();
    double mu = 1e-3;
    Eigen::MatrixXd J(m, n);
    auto jacobian = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& rat) {
        for (int k = 0; k < n; ++k) {
            Eigen::VectorXd q = at;
            const double ref = typical.size() == n ? std::abs(typical[k]) : 1e-6;
            const double h = 1e-7 * std::max(std::abs(at[k]), ref);
            q[k] += h;
            J.col(k) = (residuals(q) - rat) / h;
        }
    };
    jacobian(p, r);
    for (fit.iterations = 0; fit.iterations < maxIter; ++fit.iterations) {
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        bool improved = false;
        for (int inner = 0; inner < 30; ++inner) {
            Eigen::MatrixXd Ad = A;
            for (int k = 0; k < n; ++k) Ad(k, k) += mu * std::max(A(k, k), 1e-300);
            const Eigen::VectorXd step = Ad.ldlt().solve(-g);
            const Eigen::VectorXd q = p + step;
            const Eigen::VectorXd rq = residuals(q);
            const double cq = rq.squaredNorm();
            if (std::isfinite(cq) && cq < cost) {
                const double rel = (cost - cq) / std::max(cost, 1e-300);
                p = q;
                r = rq;
                cost = cq;
                mu = std::max(mu / 3.0, 1e-12);
                improved = true;
                if (rel < tol || step.norm() < tol * (p.norm() + tol)) fit.converged = true;
                break;
            }
            mu *= 4.0;
        }
        if (!improved) {
            fit.converged = true;  // no descent direction left
            break;
        }
        jacobian(p, r);
        if (fit.converged) break;
    }
    fit.params = p;
    fit.residualNorm = std::sqrt(cost);
    fit.stderrs = Eigen::VectorXd::Zero(n);
    if (m > n) {
        const Eigen::MatrixXd A = J.transpose() * J;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (lu.isInvertible()) {
            const Eigen::MatrixXd cov = lu.inverse() * (cost / (m - n));
            for (int k = 0; k < n; ++k) fit.stderrs[k] = std::sqrt(std::max(cov(k, k), 0.0));
        } else {
            fit.stderrs.setConstant(std::numeric_limits<double>::infinity());
        }
    }
    return fit;
}

namespace {

double dftPeak(const std::vector<double>& t, const std::vector<double>& im,
               const std::vector<double>& re) {
    const double T = t.back() - t.front();
    const std::size_t n = t.size();
    const double dtMean = T / static_cast<double>(n - 1);
    const double wmax = constants::pi / dtMean;
    const int grid = 16 * static_cast<int>(n);  // zero-padding by 16
    double best = 0.0, bestOmega = constants::pi / (2.0 * T);
    const int lo = re.empty() ? 1 : -grid;
    for (int k = lo; k <= grid; ++k) {
        if (k == 0) continue;
        const double w = wmax * k / grid;
        std::complex<double> s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::complex<double> y(re.empty() ? 0.0 : re[i], im[i]);
            s += y * std::exp(std::complex<double>(0.0, -w * (t[i] - t.front())));
        }
        if (std::abs(s) > best) {
            best = std::abs(s);
            bestOmega = w;
        }
    }
    return bestOmega;
}

}  // namespace

DampedSine fitDampedSine(const std::vector<double>& t, const std::vector<double>& im,
                         const std::vector<double>& re) {
    const std::size_t n = t.size();
    if (n < 5 || im.size() != n || (!re.empty() && re.size() != n))
        throw InvalidArgument("fitDampedSine: need >= 5 matching samples");
    const bool joint = !re.empty();
    const double T = t.back() - t.front();
    double ymax = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        ymax = std::max(ymax, std::hypot(joint ? re[i] : 0.0, im[i]));
    if (ymax == 0.0) return {};

    // params: A, Omega, phi, k (= 1/tau); residuals scaled by ymax
    auto resid = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(joint ? 2 * n : n);
        for (std::size_t i = 0; i < n; ++i) {
            const double e = p[0] * std::exp(-p[3] * t[i]);
            const double ph = p[1] * t[i] + p[2];
            r[i] = (e * std::sin(ph) - im[i]) / ymax;
            if (joint) r[n + i] = (e * std::cos(ph) - re[i]) / ymax;
        }
        return r;
    };

    std::vector<double> starts{dftPeak(t, im, re)};
    for (double f : {0.25, 0.5, 1.0, 2.0})
        for (double sgn : {1.0, -1.0})
            if (joint || sgn > 0) starts.push_back(sgn * f * constants::twoPi / T);

    NonlinearFit best;
    best.residualNorm = std::numeric_limits<double>::infinity();
    for (double w0 : starts) {
        Eigen::VectorXd p0(4);
        double phi0 = 0.0;
        if (joint) phi0 = std::atan2(im.front(), re.front());
        p0 << ymax, w0, phi0, 0.0;
        Eigen::VectorXd typ(4);
        typ << ymax, 1.0 / T, 1.0, 1.0 / T;
        NonlinearFit f = levenbergMarquardt(resid, p0, 200, 1e-12, typ);
        if (f.residualNorm < best.residualNorm) best = f;
    }
    DampedSine out;
    Eigen::VectorXd p = best.params;
    if (p[0] < 0.0) {  // A -> -A, phi -> phi + pi
        p[0] = -p[0];
        p[2] += constants::pi;
    }
    if (!joint && p[1] < 0.0) {  // sin(-x + phi) = sin(x + pi - phi)
        p[1] = -p[1];
        p[2] = constants::pi - p[2];
    }
    out.amplitude = p[0];
    out.omega = p[1];
    out.phase = std::remainder(p[2], constants::twoPi);
    out.decayTime = p[3] > 0.0 ? 1.0 / p[3] : std::numeric_limits<double>::infinity();
    out.omegaErr = best.stderrs.size() ? best.stderrs[1] : 0.0;
    out.converged = best.converged;
    return out;
}

double goldenSection(const std::function<double(double)>& f, double a, double b, double tol,
                     int maxIter) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < maxIter && std::abs(b - a) > tol * (std::abs(a) + std::abs(b)); ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace nvmri
