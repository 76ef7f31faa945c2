#ifndef PLATECAL_MODEL_HPP
#define PLATECAL_MODEL_HPP

#include <Eigen/Core>
#include <array>
#include <optional>
#include <string>
#include <vector>

namespace platecal {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

// Elementary rotations, right-handed, angles in rad.
Matrix3d rot_x(double a);
Matrix3d rot_y(double a);
Matrix3d rot_z(double a);

// Intrinsic geometric error parameters of the gantry.
// Angles in rad, scale errors dimensionless. Flat order:
// [alpha_xy, alpha_xz, alpha_yz, s_x, s_y, s_z, tau_x, tau_y]
struct ErrorParams {
    double alpha_xy = 0.0;  // squareness between x and y axes
    double alpha_xz = 0.0;  // z-axis tilt toward x
    double alpha_yz = 0.0;  // z-axis tilt toward y
    double s_x = 0.0;       // axis scale errors
    double s_y = 0.0;
    double s_z = 0.0;
    double tau_x = 0.0;     // laser beam tilt about EE x/y
    double tau_y = 0.0;

    static constexpr int kCount = 8;
    static const std::array<const char*, kCount>& names();

    Eigen::Matrix<double, kCount, 1> to_vector() const;
    static ErrorParams from_vector(const Eigen::Matrix<double, kCount, 1>& v);

    // Sanity ranges (|angles| < 0.1 rad, |scales| < 0.01, z direction well
    // defined). Returns an error message, or empty if valid.
    std::string check_sane() const;
};

struct WorkVolume {
    Vector3d min{0, 0, 0};
    Vector3d max{0, 0, 0};
    bool contains(const Vector3d& q, double slack = 0.0) const;
};

// Machine description. `ram_droop` models the z-ram sagging as it extends:
// the beam tilt about x/y grows quadratically with q_z,
//   tilt_x(q) = tau_x + ram_droop.x() * q_z^2    [rad, coeff in rad/mm^2]
// A zero droop gives a pose-independent end-effector rotation.
struct GantryConfig {
    Vector3d tool_offset{0, 0, 0};  // beam exit point relative to carriage, mm
    WorkVolume work_volume;
    Vector2d ram_droop{0, 0};  // rad/mm^2, about x and y
    std::optional<ErrorParams> true_errors;  // simulation ground truth only
};

// Calibration plate: n >= 3 sensor centers in the plate frame M, z = height.
struct PlateGeometry {
    std::vector<Vector3d> sensors;
    double distance_tolerance = 0.0;  // certified uncertainty, mm

    int sensor_count() const { return static_cast<int>(sensors.size()); }
    // Certified reference vector from sensor i to sensor k.
    Vector3d reference_distance(int i, int k) const;
    std::string check_valid() const;
};

// Plate placement: yaw-only rotation about inertial z plus a translation.
// The translation is simulation-only; it cancels out of all residuals.
struct PlatePose {
    Vector3d position{0, 0, 0};  // plate origin in frame I, mm
    double gamma = 0.0;          // yaw, rad, in (-pi, pi]
};

// Unit axis directions derived from the squareness angles.
// u_x = (1,0,0), u_y = (sin a_xy, cos a_xy, 0),
// u_z = (sin a_xz, sin a_yz, sqrt(1 - sin^2 a_xz - sin^2 a_yz)).
// Throws std::domain_error when the square root argument is not positive.
struct AxisFrame {
    Vector3d u_x, u_y, u_z;
};
AxisFrame axis_frame(const ErrorParams& p);

// End-effector rotation R_IE at carriage height q_z (see GantryConfig).
Matrix3d ee_rotation(const ErrorParams& p, double q_z, const GantryConfig& cfg);

struct EePose {
    Vector3d position;
    Matrix3d rotation;  // R_IE
};

// Forward kinematics of the carriage/end effector:
//   r = (1+s_x) q_x u_x + (1+s_y) q_y u_y + (1+s_z) q_z u_z + tool_offset.
// Warns on stderr (does not fail) when q is outside the work volume.
EePose fk_end_effector(const Vector3d& q, const ErrorParams& p, const GantryConfig& cfg);

// Point where the beam of length L > 0 meets the target surface:
// fk position + R_IE * (0,0,L)^T. Rejects L <= 0.
Vector3d impact_point(const Vector3d& q, const ErrorParams& p, double L,
                      const GantryConfig& cfg);

// Frame M <-> frame I transforms for a yaw-only pose.
Vector3d plate_to_inertial(const PlatePose& pose, const Vector3d& v_M);
Vector3d inertial_to_plate(const PlatePose& pose, const Vector3d& v_I);

}  // namespace platecal

#endif
