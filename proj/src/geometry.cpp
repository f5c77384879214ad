#include "nvmri/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "nvmri/constants.hpp"
#include "nvmri/errors.hpp"
#include "nvmri/random.hpp"

namespace nvmri {

std::array<NvGroup, 4> nvGroupAxes() {
    const double s = 1.0 / std::sqrt(3.0);
    return {{{1, Vec3{1, 1, 1} * s},
             {2, Vec3{1, -1, -1} * s},
             {3, Vec3{-1, 1, -1} * s},
             {4, Vec3{-1, -1, 1} * s}}};
}

NvGroup nvGroup(int index) {
    if (index < 1 || index > 4) throw InvalidArgument("NV group index must be 1..4");
    return nvGroupAxes()[index - 1];
}

bool Region::contains(const Vec3& p) const {
    return p.x >= 0.0 && p.x < extent.x && p.y >= 0.0 && p.y < extent.y && p.z >= 0.0 &&
           p.z < extent.z;
}

Vec3 minimumImage(Vec3 d, const Region& region) {
    if (region.boundary != Boundary::PeriodicBox) return d;
    for (int k = 0; k < 3; ++k) {
        const double L = region.extent[k];
        d[k] -= L * std::nearbyint(d[k] / L);
    }
    return d;
}

Vec3 commensurateWavevector(const Vec3& Q, const Region& region) {
    if (region.boundary != Boundary::PeriodicBox) return Q;
    Vec3 out;
    for (int k = 0; k < 3; ++k) {
        const double step = constants::twoPi / region.extent[k];
        out[k] = step * std::nearbyint(Q[k] / step);
    }
    return out;
}

Vec3 SpinEnsemble::displacement(std::size_t i, std::size_t j) const {
    return minimumImage(positions[j] - positions[i], region);
}

double SpinEnsemble::meanPolarization() const {
    if (polarizations.empty()) return 0.0;
    double s = 0.0;
    for (double p : polarizations) s += p;
    return s / static_cast<double>(polarizations.size());
}

double nvGroupDensity(double ppm) { return ppm * 1e-6 * constants::diamondAtomDensity / 4.0; }

double typicalSpacing(double density) { return std::cbrt(1.0 / density); }

namespace {

// Uniform cell list for the hard-sphere check.
class CellGrid {
public:
    CellGrid(const Region& region, double cell) : region_(region) {
        for (int k = 0; k < 3; ++k) {
            n_[k] = std::max(1, static_cast<int>(std::floor(region.extent[k] / std::max(cell, 1e-300))));
            n_[k] = std::min(n_[k], 256);
            h_[k] = region.extent[k] / n_[k];
        }
        cells_.resize(static_cast<std::size_t>(n_[0]) * n_[1] * n_[2]);
    }

    bool free(const Vec3& p, const std::vector<Vec3>& pts, double r2min) const {
        int c[3];
        for (int k = 0; k < 3; ++k) c[k] = cellOf(p, k);
        const bool periodic = region_.boundary == Boundary::PeriodicBox;
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    int q[3] = {c[0] + dx, c[1] + dy, c[2] + dz};
                    bool skip = false;
                    for (int k = 0; k < 3; ++k) {
                        if (q[k] < 0 || q[k] >= n_[k]) {
                            if (!periodic) { skip = true; break; }
                            q[k] = (q[k] + n_[k]) % n_[k];
                        }
                    }
                    if (skip) continue;
                    for (std::size_t idx : cells_[index(q)]) {
                        const Vec3 d = minimumImage(pts[idx] - p, region_);
                        if (dot(d, d) < r2min) return false;
                    }
                }
        return true;
    }

    void insert(const Vec3& p, std::size_t idx) {
        int c[3];
        for (int k = 0; k < 3; ++k) c[k] = cellOf(p, k);
        cells_[index(c)].push_back(idx);
    }

    // Small grids would visit the same cell more than once; fine for a pure check.
private:
    int cellOf(const Vec3& p, int k) const {
        return std::clamp(static_cast<int>(p[k] / h_[k]), 0, n_[k] - 1);
    }
    std::size_t index(const int* c) const {
        return (static_cast<std::size_t>(c[0]) * n_[1] + c[1]) * n_[2] + c[2];
    }

    Region region_;
    int n_[3];
    double h_[3];
    std::vector<std::vector<std::size_t>> cells_;
};

}  // namespace

SpinEnsemble samplePositionsCount(const Region& region, std::size_t count, double uvCutoff,
                                  std::uint64_t seed, int maxAttemptsPerSpin) {
    if (count == 0) throw InvalidArgument("ensemble must contain at least one spin");
    if (!(region.extent.x > 0 && region.extent.y > 0 && region.extent.z > 0))
        throw InvalidArgument("region extents must be positive");
    if (uvCutoff < 0) throw InvalidArgument("uv cutoff must be nonnegative");

    SpinEnsemble ens;
    ens.region = region;
    ens.uvCutoff = uvCutoff;
    ens.positions.reserve(count);

    Rng rng(seed);
    CellGrid grid(region, std::max(uvCutoff, std::cbrt(region.volume() / count)));
    const double r2 = uvCutoff * uvCutoff;
    for (std::size_t n = 0; n < count; ++n) {
        bool placed = false;
        for (int attempt = 0; attempt < maxAttemptsPerSpin; ++attempt) {
            Vec3 p{uniform01(rng) * region.extent.x, uniform01(rng) * region.extent.y,
                   uniform01(rng) * region.extent.z};
            if (uvCutoff == 0.0 || grid.free(p, ens.positions, r2)) {
                grid.insert(p, ens.positions.size());
                ens.positions.push_back(p);
                placed = true;
                break;
            }
        }
        if (!placed) {
            std::ostringstream os;
            os << "hard-sphere packing infeasible: spin " << n << " could not be placed after "
               << maxAttemptsPerSpin << " attempts";
            throw NumericalError(os.str());
        }
    }
    ens.polarizations.assign(count, 1.0);
    return ens;
}

SpinEnsemble samplePositions(const Region& region, double density, double uvCutoff,
                             std::uint64_t seed, int maxAttemptsPerSpin) {
    const double expected = density * region.volume();
    if (!(expected >= 1.0)) throw InvalidArgument("region volume x density must be >= 1");
    if (uvCutoff >= typicalSpacing(density))
        throw InvalidArgument("uv cutoff must be below the typical spacing");
    return samplePositionsCount(region, static_cast<std::size_t>(std::llround(expected)),
                                uvCutoff, seed, maxAttemptsPerSpin);
}

double minPairDistance(const SpinEnsemble& ens) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ens.size(); ++i)
        for (std::size_t j = i + 1; j < ens.size(); ++j)
            best = std::min(best, norm(ens.displacement(i, j)));
    return best;
}

double dipolarAnisotropy(const Vec3& eta, const Vec3& rhat) {
    if (std::abs(norm(eta) - 1.0) > 1e-9 || std::abs(norm(rhat) - 1.0) > 1e-9)
        throw InvalidArgument("dipolarAnisotropy expects unit vectors");
    const double c = dot(eta, rhat);
    return 0.5 * (3.0 * c * c - 1.0);
}

double dipolarCoupling(const Vec3& r, const Vec3& eta, double uvCutoff) {
    const double d = norm(r);
    if (d < uvCutoff || d == 0.0) throw InvalidArgument("pair separation below uv cutoff");
    return constants::J0 * dipolarAnisotropy(eta, r / d) / (d * d * d);
}

void CoilPath::validate() const {
    if (vertices.size() < 2) throw InvalidArgument("coil path needs at least 2 vertices");
    for (std::size_t k = 1; k < vertices.size(); ++k)
        if (vertices[k] == vertices[k - 1])
            throw InvalidArgument("coil path has repeated consecutive vertices");
}

Vec3 biotSavartField(const CoilPath& path, const Vec3& point) {
    path.validate();
    // mu0/4pi * 1 mA / 1 um in mT
    const double pref = constants::mu0 / (4.0 * constants::pi) * 1e6 * path.current;
    Vec3 B;
    for (std::size_t k = 1; k < path.vertices.size(); ++k) {
        const Vec3 r1 = point - path.vertices[k - 1];
        const Vec3 r2 = point - path.vertices[k];
        const double a = norm(r1), b = norm(r2);
        const double denom = a * b * (a * b + dot(r1, r2));
        const double seg = norm(path.vertices[k] - path.vertices[k - 1]);
        if (a < 1e-12 * seg || b < 1e-12 * seg || denom <= 1e-24 * a * a * b * b)
            throw InvalidArgument("field point lies on the coil path");
        B += cross(r1, r2) * ((a + b) / denom);
    }
    return B * pref;
}

FieldFn coilField(CoilPath path, Vec3 offsetUm, double scale) {
    path.validate();
    return [path = std::move(path), offsetUm, scale](const Vec3& pNm) {
        return biotSavartField(path, pNm * 1e-3 + offsetUm) * scale;
    };
}

GradientSpec effectiveGradient(const FieldFn& field, const Vec3& eta, const Vec3& point,
                               double step) {
    if (!(step > 0)) throw InvalidArgument("gradient step must be positive");
    GradientSpec g;
    for (int k = 0; k < 3; ++k) {
        Vec3 e;
        e[k] = step;
        const double fp = dot(field(point + e), eta);
        const double fm = dot(field(point - e), eta);
        g.gradient[k] = (fp - fm) / (2.0 * step) * 1e3;  // per nm -> per um
    }
    return g;
}

std::vector<double> esrDetuningProfile(const FieldFn& field, const NvGroup& group,
                                       const std::vector<Vec3>& points) {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(constants::gammaMHzPerMT * dot(field(p), group.axis));
    return out;
}

std::array<std::vector<double>, 4> esrDetuningProfiles(const FieldFn& field,
                                                       const std::vector<Vec3>& points) {
    std::array<std::vector<double>, 4> out;
    const auto axes = nvGroupAxes();
    for (int g = 0; g < 4; ++g) out[g] = esrDetuningProfile(field, axes[g], points);
    return out;
}

void writeEnsembleCsv(const std::string& path, const SpinEnsemble& ens) {
    std::ofstream f(path);
    if (!f) throw InvalidArgument("cannot write " + path);
    f.precision(17);
    f << "x_nm,y_nm,z_nm,polarization\n";
    for (std::size_t i = 0; i < ens.size(); ++i)
        f << ens.positions[i].x << ',' << ens.positions[i].y << ',' << ens.positions[i].z << ','
          << ens.polarizations[i] << '\n';
}

CoilPath readCoilCsv(const std::string& path, double currentMilliAmp) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot read coil file " + path);
    CoilPath c;
    c.current = currentMilliAmp;
    std::string line;
    int lineNo = 0;
    while (std::getline(f, line)) {
        ++lineNo;
        if (line.empty() || line[0] == '#') continue;
        if (lineNo == 1 && line.find("x_um") != std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream is(line);
        Vec3 v;
        if (!(is >> v.x >> v.y >> v.z))
            throw InvalidArgument(path + ":" + std::to_string(lineNo) + ": expected x_um,y_um,z_um");
        c.vertices.push_back(v);
    }
    c.validate();
    return c;
}

}  // namespace nvmri
