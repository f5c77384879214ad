#pragma once

#include <array>
#include <string>
#include <vector>

#include "nvmri/vec3.hpp"

namespace nvmri {

/// Regular scalar field, x index fastest: data[(iz * ny + iy) * nx + ix].
struct Grid3 {
    std::array<int, 3> dims{0, 0, 0};
    Vec3 spacing{1, 1, 1};  // nm
    Vec3 origin;            // nm, position of sample (0,0,0)
    std::vector<double> data;

    Grid3() = default;
    Grid3(std::array<int, 3> d, Vec3 h, Vec3 o, double fill = 0.0);

    std::size_t size() const { return data.size(); }
    std::size_t index(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(iz) * dims[1] + iy) * dims[0] + ix;
    }
    double& at(int ix, int iy, int iz) { return data[index(ix, iy, iz)]; }
    double at(int ix, int iy, int iz) const { return data[index(ix, iy, iz)]; }
    Vec3 position(int ix, int iy, int iz) const {
        return origin + Vec3{ix * spacing.x, iy * spacing.y, iz * spacing.z};
    }
    double cellVolume() const { return spacing.x * spacing.y * spacing.z; }
    double sum() const;
    double max() const;
    bool sameShape(const Grid3& o, double tol = 1e-9) const;
};

/// Binary: 64-byte header ("NVG1", 3 x uint32 dims, 3 x float64 spacing, 3 x float64 origin),
/// then float64 samples in index order, little-endian.
void writeGridBinary(const std::string& path, const Grid3& g);
Grid3 readGridBinary(const std::string& path);

/// CSV: first line `# dims nx ny nz spacing hx hy hz origin ox oy oz`, then `x_nm,y_nm,z_nm,value`.
void writeGridCsv(const std::string& path, const Grid3& g);
Grid3 readGridCsv(const std::string& path);

/// Dispatch on extension (.csv or anything else as binary).
Grid3 readGrid(const std::string& path);

}  // namespace nvmri
