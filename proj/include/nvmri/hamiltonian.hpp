#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nvmri/vec3.hpp"

namespace nvmri {

/// H = sum_ij J(r_ij) (g0 S_i.S_j + g2 S_i^z S_j^z)
struct XXZModel {
    double g0 = 2.0 / 3.0;
    double g2 = 0.0;
    double transverse() const { return g0; }
    double longitudinal() const { return g0 + g2; }
};

/// g0 = 2(1+lambda)/3, g2 = -2 lambda, for -1 < lambda <= 2.
XXZModel xxzFromLambda(double lambda);
/// Inverse of ratio(lambda) = (1 - 2 lambda) / (1 + lambda).
double lambdaFromRatio(double ratio);
/// g_Z / g_XX = (g0 + g2) / g0.
double anisotropyRatio(const XXZModel& model);

enum class PulseAxis { PlusX, MinusX, PlusY, MinusY };

struct Pulse {
    PulseAxis axis = PulseAxis::PlusX;
    double angleDeg = 180.0;  // 90 or 180
    double spacingNs = 0.0;   // free evolution before this pulse
};

struct PulseSequence {
    std::vector<Pulse> pulses;
    double trailingNs = 0.0;  // free evolution after the last pulse
    double cycleDuration() const;
};

/// Line format: `AXIS ANGLE SPACING_NS` (AXIS in +X -X +Y -Y, ANGLE 90 or 180),
/// optional `END SPACING_NS` for a trailing window. `#` starts a comment.
PulseSequence parsePulseProgram(std::istream& in, const std::string& source = "<input>");
PulseSequence readPulseProgram(const std::string& path);
void writePulseProgram(std::ostream& out, const PulseSequence& seq, const std::string& title = "");

enum class SignedAxis { PlusX, MinusX, PlusY, MinusY, PlusZ, MinusZ };
Vec3 axisVector(SignedAxis a);
std::string axisName(SignedAxis a);

struct Frame {
    SignedAxis axis = SignedAxis::PlusZ;
    double durationNs = 0.0;
};

struct FrameTrajectory {
    std::vector<Frame> frames;
    double duration() const;
};

struct RotationMatrix {
    double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    Vec3 apply(const Vec3& v) const;
    Vec3 applyTranspose(const Vec3& v) const;
    RotationMatrix operator*(const RotationMatrix& o) const;
    bool isIdentity(double tol = 1e-9) const;
};

RotationMatrix pulseRotation(const Pulse& p);
/// P_n ... P_1
RotationMatrix netRotation(const PulseSequence& seq);

/// Toggling-frame image of S^z in each free-evolution window. Zero-length windows are dropped.
/// Throws InvalidArgument when a window frame is not axis-aligned.
FrameTrajectory compileFrames(const PulseSequence& seq);

struct CTriple {
    double cx = 0.0, cy = 0.0, cz = 0.0;
};

/// c_mu = 1 - 2 f_mu, zeroth order.
CTriple averageHamiltonian(const FrameTrajectory& frames);
/// Fractions the frame spends on +-x, +-y, +-z.
Vec3 axisFractions(const FrameTrajectory& frames);
/// g0 = 2 c_x, g2 = 2 (c_z - c_x); requires c_x = c_y.
XXZModel modelFromCTriple(const CTriple& c, double tol = 1e-12);

/// sum_k sign_k e_k duration_k / T
Vec3 disorderResidual(const FrameTrajectory& frames);
/// sum_k e_k x e_{k+1} over consecutive distinct windows, cyclically closed.
Vec3 chiralityVector(const FrameTrajectory& frames);

/// Reference programs, spacing tau in ns.
PulseSequence xy4Sequence(double tauNs);
PulseSequence droidLayer(double tauNs);
PulseSequence cxy4DroidVxy4Symm(double tauNs);

}  // namespace nvmri
