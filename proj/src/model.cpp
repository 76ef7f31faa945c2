#include "platecal/model.hpp"

#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "platecal/errors.hpp"

namespace platecal {

Matrix3d rot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Matrix3d r;
    r << 1, 0, 0,
         0, c, -s,
         0, s, c;
    return r;
}

Matrix3d rot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Matrix3d r;
    r << c, 0, s,
         0, 1, 0,
         -s, 0, c;
    return r;
}

Matrix3d rot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Matrix3d r;
    r << c, -s, 0,
         s, c, 0,
         0, 0, 1;
    return r;
}

const std::array<const char*, ErrorParams::kCount>& ErrorParams::names() {
    static const std::array<const char*, kCount> n = {
        "alpha_xy", "alpha_xz", "alpha_yz", "s_x", "s_y", "s_z", "tau_x", "tau_y"};
    return n;
}

Eigen::Matrix<double, ErrorParams::kCount, 1> ErrorParams::to_vector() const {
    Eigen::Matrix<double, kCount, 1> v;
    v << alpha_xy, alpha_xz, alpha_yz, s_x, s_y, s_z, tau_x, tau_y;
    return v;
}

ErrorParams ErrorParams::from_vector(const Eigen::Matrix<double, kCount, 1>& v) {
    ErrorParams p;
    p.alpha_xy = v[0];
    p.alpha_xz = v[1];
    p.alpha_yz = v[2];
    p.s_x = v[3];
    p.s_y = v[4];
    p.s_z = v[5];
    p.tau_x = v[6];
    p.tau_y = v[7];
    return p;
}

std::string ErrorParams::check_sane() const {
    std::ostringstream oss;
    const auto angle = [&](double v, const char* name) {
        if (!(std::abs(v) < 0.1)) oss << name << " out of sanity range (-0.1, 0.1) rad; ";
    };
    const auto scale = [&](double v, const char* name) {
        if (!(std::abs(v) < 0.01)) oss << name << " out of sanity range (-0.01, 0.01); ";
    };
    angle(alpha_xy, "alpha_xy");
    angle(alpha_xz, "alpha_xz");
    angle(alpha_yz, "alpha_yz");
    angle(tau_x, "tau_x");
    angle(tau_y, "tau_y");
    scale(s_x, "s_x");
    scale(s_y, "s_y");
    scale(s_z, "s_z");
    const double sxz = std::sin(alpha_xz), syz = std::sin(alpha_yz);
    if (!(sxz * sxz + syz * syz < 1.0)) oss << "z axis direction undefined (sin^2 sum >= 1); ";
    return oss.str();
}

bool WorkVolume::contains(const Vector3d& q, double slack) const {
    for (int i = 0; i < 3; ++i) {
        if (q[i] < min[i] - slack || q[i] > max[i] + slack) return false;
    }
    return true;
}

Vector3d PlateGeometry::reference_distance(int i, int k) const {
    return sensors.at(static_cast<size_t>(k)) - sensors.at(static_cast<size_t>(i));
}

std::string PlateGeometry::check_valid() const {
    if (sensors.size() < 3) return "plate needs at least 3 sensors";
    for (size_t i = 0; i < sensors.size(); ++i) {
        for (size_t k = i + 1; k < sensors.size(); ++k) {
            if ((sensors[k] - sensors[i]).norm() <= 1.0) {
                std::ostringstream oss;
                oss << "sensors " << i + 1 << " and " << k + 1 << " closer than 1 mm";
                return oss.str();
            }
        }
    }
    return {};
}

AxisFrame axis_frame(const ErrorParams& p) {
    const double sxz = std::sin(p.alpha_xz);
    const double syz = std::sin(p.alpha_yz);
    const double arg = 1.0 - sxz * sxz - syz * syz;
    if (arg <= 0.0) {
        throw std::domain_error("axis_frame: z axis direction undefined, sin^2(alpha_xz) + sin^2(alpha_yz) >= 1");
    }
    AxisFrame f;
    f.u_x = Vector3d(1, 0, 0);
    f.u_y = Vector3d(std::sin(p.alpha_xy), std::cos(p.alpha_xy), 0);
    f.u_z = Vector3d(sxz, syz, std::sqrt(arg));
    return f;
}

Matrix3d ee_rotation(const ErrorParams& p, double q_z, const GantryConfig& cfg) {
    const double tx = p.tau_x + cfg.ram_droop.x() * q_z * q_z;
    const double ty = p.tau_y + cfg.ram_droop.y() * q_z * q_z;
    return rot_x(tx) * rot_y(ty);
}

EePose fk_end_effector(const Vector3d& q, const ErrorParams& p, const GantryConfig& cfg) {
    const bool volume_defined = (cfg.work_volume.max - cfg.work_volume.min).norm() > 0.0;
    if (volume_defined && !cfg.work_volume.contains(q)) {
        std::cerr << "[platecal] warning: encoder position (" << q.transpose()
                  << ") outside work volume\n";
    }
    const AxisFrame f = axis_frame(p);
    EePose pose;
    pose.position = (1.0 + p.s_x) * q.x() * f.u_x + (1.0 + p.s_y) * q.y() * f.u_y +
                    (1.0 + p.s_z) * q.z() * f.u_z + cfg.tool_offset;
    pose.rotation = ee_rotation(p, q.z(), cfg);
    return pose;
}

Vector3d impact_point(const Vector3d& q, const ErrorParams& p, double L,
                      const GantryConfig& cfg) {
    if (L <= 0.0) throw std::invalid_argument("impact_point: beam length must be positive");
    const EePose ee = fk_end_effector(q, p, cfg);
    return ee.position + ee.rotation * Vector3d(0, 0, L);
}

Vector3d plate_to_inertial(const PlatePose& pose, const Vector3d& v_M) {
    return pose.position + rot_z(pose.gamma) * v_M;
}

Vector3d inertial_to_plate(const PlatePose& pose, const Vector3d& v_I) {
    return rot_z(-pose.gamma) * (v_I - pose.position);
}

}  // namespace platecal
