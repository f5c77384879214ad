#include "nvmri/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nvmri/constants.hpp"
#include "nvmri/errors.hpp"

namespace nvmri {

XXZModel xxzFromLambda(double lambda) {
    if (!(lambda > -1.0 && lambda <= 2.0)) throw InvalidArgument("lambda must lie in (-1, 2]");
    return {2.0 * (1.0 + lambda) / 3.0, -2.0 * lambda};
}

double lambdaFromRatio(double ratio) {
    if (ratio == -2.0) throw InvalidArgument("ratio -2 has no lambda");
    return (1.0 - ratio) / (ratio + 2.0);
}

double anisotropyRatio(const XXZModel& model) {
    if (model.g0 == 0.0) throw InvalidArgument("g0 = 0 has no anisotropy ratio");
    return (model.g0 + model.g2) / model.g0;
}

double PulseSequence::cycleDuration() const {
    double t = trailingNs;
    for (const auto& p : pulses) t += p.spacingNs;
    return t;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

const char* axisToken(PulseAxis a) {
    switch (a) {
        case PulseAxis::PlusX: return "+X";
        case PulseAxis::MinusX: return "-X";
        case PulseAxis::PlusY: return "+Y";
        case PulseAxis::MinusY: return "-Y";
    }
    return "?";
}

PulseAxis flipped(PulseAxis a) {
    switch (a) {
        case PulseAxis::PlusX: return PulseAxis::MinusX;
        case PulseAxis::MinusX: return PulseAxis::PlusX;
        case PulseAxis::PlusY: return PulseAxis::MinusY;
        case PulseAxis::MinusY: return PulseAxis::PlusY;
    }
    return a;
}

bool isX(PulseAxis a) { return a == PulseAxis::PlusX || a == PulseAxis::MinusX; }

}  // namespace

PulseSequence parsePulseProgram(std::istream& in, const std::string& source) {
    PulseSequence seq;
    std::string raw;
    int lineNo = 0;
    bool ended = false;
    auto fail = [&](const std::string& why) {
        throw InvalidArgument(source + ":" + std::to_string(lineNo) + ": " + why);
    };
    while (std::getline(in, raw)) {
        ++lineNo;
        std::string line = raw.substr(0, raw.find('#'));
        line = trim(line);
        if (line.empty()) continue;
        if (ended) fail("pulse after END");
        std::istringstream is(line);
        std::string axis;
        is >> axis;
        if (axis == "END") {
            double s;
            if (!(is >> s) || s < 0) fail("END needs a nonnegative spacing");
            std::string extra;
            if (is >> extra) fail("trailing tokens");
            seq.trailingNs = s;
            ended = true;
            continue;
        }
        Pulse p;
        if (axis == "+X" || axis == "X") p.axis = PulseAxis::PlusX;
        else if (axis == "-X") p.axis = PulseAxis::MinusX;
        else if (axis == "+Y" || axis == "Y") p.axis = PulseAxis::PlusY;
        else if (axis == "-Y") p.axis = PulseAxis::MinusY;
        else fail("unknown axis '" + axis + "'");
        if (!(is >> p.angleDeg >> p.spacingNs)) fail("expected AXIS ANGLE SPACING_NS");
        std::string extra;
        if (is >> extra) fail("trailing tokens");
        if (p.angleDeg != 90.0 && p.angleDeg != 180.0) fail("angle must be 90 or 180");
        if (p.spacingNs < 0.0 || !std::isfinite(p.spacingNs)) fail("spacing must be >= 0");
        seq.pulses.push_back(p);
    }
    if (!(seq.cycleDuration() > 0.0)) throw InvalidArgument(source + ": cycle duration must be > 0");
    return seq;
}

PulseSequence readPulseProgram(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot read pulse program " + path);
    return parsePulseProgram(f, path);
}

void writePulseProgram(std::ostream& out, const PulseSequence& seq, const std::string& title) {
    if (!title.empty()) out << "# " << title << "\n";
    out << "# AXIS ANGLE_DEG SPACING_NS\n";
    for (const auto& p : seq.pulses)
        out << axisToken(p.axis) << ' ' << p.angleDeg << ' ' << p.spacingNs << '\n';
    if (seq.trailingNs > 0.0) out << "END " << seq.trailingNs << '\n';
}

Vec3 axisVector(SignedAxis a) {
    switch (a) {
        case SignedAxis::PlusX: return {1, 0, 0};
        case SignedAxis::MinusX: return {-1, 0, 0};
        case SignedAxis::PlusY: return {0, 1, 0};
        case SignedAxis::MinusY: return {0, -1, 0};
        case SignedAxis::PlusZ: return {0, 0, 1};
        case SignedAxis::MinusZ: return {0, 0, -1};
    }
    return {};
}

std::string axisName(SignedAxis a) {
    static const char* names[] = {"+x", "-x", "+y", "-y", "+z", "-z"};
    return names[static_cast<int>(a)];
}

double FrameTrajectory::duration() const {
    double t = 0.0;
    for (const auto& f : frames) t += f.durationNs;
    return t;
}

Vec3 RotationMatrix::apply(const Vec3& v) const {
    Vec3 r;
    for (int i = 0; i < 3; ++i) r[i] = m[i][0] * v.x + m[i][1] * v.y + m[i][2] * v.z;
    return r;
}

Vec3 RotationMatrix::applyTranspose(const Vec3& v) const {
    Vec3 r;
    for (int i = 0; i < 3; ++i) r[i] = m[0][i] * v.x + m[1][i] * v.y + m[2][i] * v.z;
    return r;
}

RotationMatrix RotationMatrix::operator*(const RotationMatrix& o) const {
    RotationMatrix r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += m[i][k] * o.m[k][j];
            r.m[i][j] = s;
        }
    return r;
}

bool RotationMatrix::isIdentity(double tol) const {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (std::abs(m[i][j] - (i == j ? 1.0 : 0.0)) > tol) return false;
    return true;
}

RotationMatrix pulseRotation(const Pulse& p) {
    Vec3 n;
    switch (p.axis) {
        case PulseAxis::PlusX: n = {1, 0, 0}; break;
        case PulseAxis::MinusX: n = {-1, 0, 0}; break;
        case PulseAxis::PlusY: n = {0, 1, 0}; break;
        case PulseAxis::MinusY: n = {0, -1, 0}; break;
    }
    const double phi = p.angleDeg * constants::pi / 180.0;
    // exact values for the quarter turns keep snapping trivial
    double c = std::cos(phi), s = std::sin(phi);
    if (p.angleDeg == 90.0) { c = 0.0; s = 1.0; }
    if (p.angleDeg == 180.0) { c = -1.0; s = 0.0; }
    RotationMatrix R;
    const double K[3][3] = {{0, -n.z, n.y}, {n.z, 0, -n.x}, {-n.y, n.x, 0}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            R.m[i][j] = (i == j ? c : 0.0) + (1.0 - c) * n[i] * n[j] + s * K[i][j];
    return R;
}

RotationMatrix netRotation(const PulseSequence& seq) {
    RotationMatrix R;
    for (const auto& p : seq.pulses) R = pulseRotation(p) * R;
    return R;
}

namespace {

SignedAxis snapAxis(const Vec3& v, int window) {
    static const SignedAxis all[] = {SignedAxis::PlusX, SignedAxis::MinusX, SignedAxis::PlusY,
                                     SignedAxis::MinusY, SignedAxis::PlusZ, SignedAxis::MinusZ};
    for (SignedAxis a : all)
        if (norm(v - axisVector(a)) <= 1e-9) return a;
    std::ostringstream os;
    os << "window " << window << " frame " << v
       << " is not axis-aligned; sequence is invalid for average Hamiltonian analysis";
    throw InvalidArgument(os.str());
}

}  // namespace

FrameTrajectory compileFrames(const PulseSequence& seq) {
    FrameTrajectory out;
    RotationMatrix R;
    const Vec3 z{0, 0, 1};
    for (std::size_t k = 0; k <= seq.pulses.size(); ++k) {
        const double d = k < seq.pulses.size() ? seq.pulses[k].spacingNs : seq.trailingNs;
        if (d > 0.0) out.frames.push_back({snapAxis(R.applyTranspose(z), static_cast<int>(k)), d});
        if (k < seq.pulses.size()) R = pulseRotation(seq.pulses[k]) * R;
    }
    if (out.frames.empty()) throw InvalidArgument("sequence has zero total free evolution");
    return out;
}

Vec3 axisFractions(const FrameTrajectory& frames) {
    Vec3 f;
    const double T = frames.duration();
    for (const auto& fr : frames.frames) {
        const Vec3 e = axisVector(fr.axis);
        for (int k = 0; k < 3; ++k) f[k] += std::abs(e[k]) * fr.durationNs / T;
    }
    return f;
}

CTriple averageHamiltonian(const FrameTrajectory& frames) {
    const Vec3 f = axisFractions(frames);
    return {1.0 - 2.0 * f.x, 1.0 - 2.0 * f.y, 1.0 - 2.0 * f.z};
}

XXZModel modelFromCTriple(const CTriple& c, double tol) {
    if (std::abs(c.cx - c.cy) > tol)
        throw InvalidArgument("c-triple is not XXZ symmetric (c_x != c_y)");
    return {2.0 * c.cx, 2.0 * (c.cz - c.cx)};
}

Vec3 disorderResidual(const FrameTrajectory& frames) {
    Vec3 r;
    const double T = frames.duration();
    for (const auto& fr : frames.frames) r += axisVector(fr.axis) * (fr.durationNs / T);
    return r;
}

Vec3 chiralityVector(const FrameTrajectory& frames) {
    std::vector<Vec3> axes;
    for (const auto& fr : frames.frames) {
        const Vec3 e = axisVector(fr.axis);
        if (axes.empty() || !(axes.back() == e)) axes.push_back(e);
    }
    if (axes.size() > 1 && axes.front() == axes.back()) axes.pop_back();
    Vec3 c;
    for (std::size_t k = 0; k < axes.size() && axes.size() > 1; ++k)
        c += cross(axes[k], axes[(k + 1) % axes.size()]);
    return c;
}

namespace {

void appendXY4(PulseSequence& s, double tau, double lead) {
    s.pulses.push_back({PulseAxis::PlusX, 180, lead});
    s.pulses.push_back({PulseAxis::PlusY, 180, tau});
    s.pulses.push_back({PulseAxis::PlusX, 180, tau});
    s.pulses.push_back({PulseAxis::PlusY, 180, tau});
}

// Conjugate every pulse axis by a virtual pi rotation about x and/or y.
PulseSequence conjugated(PulseSequence s, bool flipX, bool flipY) {
    for (auto& p : s.pulses) {
        if (isX(p.axis) ? flipX : flipY) p.axis = flipped(p.axis);
    }
    return s;
}

void append(PulseSequence& dst, const PulseSequence& src) {
    double carry = dst.trailingNs;
    for (std::size_t k = 0; k < src.pulses.size(); ++k) {
        Pulse p = src.pulses[k];
        if (k == 0) p.spacingNs += carry;
        dst.pulses.push_back(p);
    }
    dst.trailingNs = src.pulses.empty() ? carry + src.trailingNs : src.trailingNs;
}

PulseSequence mirrored(const PulseSequence& s) {
    PulseSequence m;
    const std::size_t n = s.pulses.size();
    if (n == 0) {
        m.trailingNs = s.trailingNs;
        return m;
    }
    // window order reversed; each pulse replaced by its inverse
    m.pulses.resize(n);
    m.pulses[0] = {flipped(s.pulses[n - 1].axis), s.pulses[n - 1].angleDeg, s.trailingNs};
    for (std::size_t k = 1; k < n; ++k) {
        const Pulse& src = s.pulses[n - 1 - k];
        m.pulses[k] = {flipped(src.axis), src.angleDeg, s.pulses[n - k].spacingNs};
    }
    m.trailingNs = s.pulses[0].spacingNs;
    return m;
}

}  // namespace

PulseSequence xy4Sequence(double tauNs) {
    PulseSequence s;
    appendXY4(s, tauNs, tauNs / 2);
    s.trailingNs = tauNs / 2;
    return s;
}

PulseSequence droidLayer(double tauNs) {
    // XY4 in the z, y and x toggling frames, joined by pi/2 pulses, then returned to identity.
    PulseSequence s;
    appendXY4(s, tauNs, tauNs / 2);
    s.pulses.push_back({PulseAxis::PlusX, 90, tauNs / 2});
    appendXY4(s, tauNs, tauNs / 2);
    s.pulses.push_back({PulseAxis::PlusY, 90, tauNs / 2});
    appendXY4(s, tauNs, tauNs / 2);
    s.pulses.push_back({PulseAxis::MinusY, 90, tauNs / 2});
    s.pulses.push_back({PulseAxis::MinusX, 90, 0.0});
    return s;
}

PulseSequence cxy4DroidVxy4Symm(double tauNs) {
    const PulseSequence block = droidLayer(tauNs);
    PulseSequence half;
    // virtual XY4: frames I, X, YX, XYX
    append(half, conjugated(block, false, false));
    append(half, conjugated(block, false, true));
    append(half, conjugated(block, true, true));
    append(half, conjugated(block, true, false));
    PulseSequence full = half;
    append(full, mirrored(half));
    return full;
}

}  // namespace nvmri
