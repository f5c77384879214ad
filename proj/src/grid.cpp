#include "nvmri/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nvmri/errors.hpp"

namespace nvmri {

Grid3::Grid3(std::array<int, 3> d, Vec3 h, Vec3 o, double fill) : dims(d), spacing(h), origin(o) {
    for (int k = 0; k < 3; ++k)
        if (d[k] < 1) throw InvalidArgument("grid dimensions must be positive");
    data.assign(static_cast<std::size_t>(d[0]) * d[1] * d[2], fill);
}

double Grid3::sum() const {
    double s = 0.0;
    for (double v : data) s += v;
    return s;
}

double Grid3::max() const { return data.empty() ? 0.0 : *std::max_element(data.begin(), data.end()); }

bool Grid3::sameShape(const Grid3& o, double tol) const {
    return dims == o.dims && norm(spacing - o.spacing) <= tol * norm(spacing) &&
           norm(origin - o.origin) <= tol * (norm(spacing) + norm(origin));
}

void writeGridBinary(const std::string& path, const Grid3& g) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("cannot write " + path);
    char header[64] = {};
    std::memcpy(header, "NVG1", 4);
    for (int k = 0; k < 3; ++k) {
        const std::uint32_t d = static_cast<std::uint32_t>(g.dims[k]);
        std::memcpy(header + 4 + 4 * k, &d, 4);
        const double h = g.spacing[k], o = g.origin[k];
        std::memcpy(header + 16 + 8 * k, &h, 8);
        std::memcpy(header + 40 + 8 * k, &o, 8);
    }
    f.write(header, 64);
    f.write(reinterpret_cast<const char*>(g.data.data()),
            static_cast<std::streamsize>(g.data.size() * sizeof(double)));
}

Grid3 readGridBinary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("cannot read grid " + path);
    char header[64];
    if (!f.read(header, 64) || std::memcmp(header, "NVG1", 4) != 0)
        throw InvalidArgument(path + ": not an NVG1 grid file");
    std::array<int, 3> dims{};
    Vec3 h, o;
    for (int k = 0; k < 3; ++k) {
        std::uint32_t d;
        std::memcpy(&d, header + 4 + 4 * k, 4);
        dims[k] = static_cast<int>(d);
        std::memcpy(&h[k], header + 16 + 8 * k, 8);
        std::memcpy(&o[k], header + 40 + 8 * k, 8);
    }
    Grid3 g(dims, h, o);
    if (!f.read(reinterpret_cast<char*>(g.data.data()),
                static_cast<std::streamsize>(g.data.size() * sizeof(double))))
        throw InvalidArgument(path + ": truncated grid data");
    return g;
}

void writeGridCsv(const std::string& path, const Grid3& g) {
    std::ofstream f(path);
    if (!f) throw InvalidArgument("cannot write " + path);
    f.precision(17);
    f << "# dims " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << " spacing "
      << g.spacing.x << ' ' << g.spacing.y << ' ' << g.spacing.z << " origin " << g.origin.x << ' '
      << g.origin.y << ' ' << g.origin.z << "\n";
    f << "x_nm,y_nm,z_nm,value\n";
    for (int iz = 0; iz < g.dims[2]; ++iz)
        for (int iy = 0; iy < g.dims[1]; ++iy)
            for (int ix = 0; ix < g.dims[0]; ++ix) {
                const Vec3 p = g.position(ix, iy, iz);
                f << p.x << ',' << p.y << ',' << p.z << ',' << g.at(ix, iy, iz) << '\n';
            }
}

Grid3 readGridCsv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot read grid " + path);
    std::string line;
    std::getline(f, line);
    std::istringstream hs(line);
    std::string hash, kd, ks, ko;
    std::array<int, 3> dims{};
    Vec3 h, o;
    if (!(hs >> hash >> kd >> dims[0] >> dims[1] >> dims[2] >> ks >> h.x >> h.y >> h.z >> ko >> o.x >>
          o.y >> o.z) ||
        hash != "#" || kd != "dims" || ks != "spacing" || ko != "origin")
        throw InvalidArgument(path + ":1: expected '# dims nx ny nz spacing hx hy hz origin ox oy oz'");
    Grid3 g(dims, h, o);
    std::getline(f, line);  // column header
    std::size_t n = 0;
    int lineNo = 2;
    while (std::getline(f, line)) {
        ++lineNo;
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream is(line);
        double x, y, z, v;
        if (!(is >> x >> y >> z >> v)) throw InvalidArgument(path + ":" + std::to_string(lineNo) + ": bad row");
        if (n >= g.data.size()) throw InvalidArgument(path + ": too many rows");
        g.data[n++] = v;
    }
    if (n != g.data.size()) throw InvalidArgument(path + ": row count does not match dims");
    return g;
}

Grid3 readGrid(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return readGridCsv(path);
    return readGridBinary(path);
}

}  // namespace nvmri
