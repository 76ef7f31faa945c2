#ifndef PLATECAL_RESIDUAL_HPP
#define PLATECAL_RESIDUAL_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

#include "platecal/model.hpp"

namespace platecal {

using Eigen::VectorXd;

// One calibration pose: encoder snapshots saved at each centered sensor,
// plus the operator's rough plate-yaw estimate and the beam-length guesses
// from the uncalibrated kinematics.
struct PoseMeasurement {
    std::vector<Vector3d> encoder_snapshots;  // n entries, mm
    double gamma_guess = 0.0;                 // rad
    std::vector<double> laser_length_guess;   // n entries, mm, all > 0

    int sensor_count() const { return static_cast<int>(encoder_snapshots.size()); }
    std::string check_valid(int n_expected) const;
};

// Index bookkeeping for the packed identification vector
//   [ p_e (8) | L_1 (n), gamma_1 | ... | L_m (n), gamma_m ].
struct ParamLayout {
    int n_sensors = 0;
    int n_poses = 0;

    int size() const { return ErrorParams::kCount + n_poses * (n_sensors + 1); }
    int pose_offset(int j) const { return ErrorParams::kCount + j * (n_sensors + 1); }
    int laser_index(int j, int i) const { return pose_offset(j) + i; }
    int gamma_index(int j) const { return pose_offset(j) + n_sensors; }
    int residual_rows() const { return 3 * n_poses * (n_sensors - 1); }

    // Human-readable parameter name for flat index (e.g. "alpha_xy", "L_2_3",
    // "gamma_2"; pose/sensor numbers are 1-based).
    std::string name(int flat_index) const;
};

// Structured identification parameters: intrinsics plus per-pose extrinsics.
struct IdentVector {
    ErrorParams p_e;
    struct PoseBlock {
        std::vector<double> laser_lengths;  // n entries, mm
        double gamma = 0.0;                 // rad
    };
    std::vector<PoseBlock> per_pose;
    ParamLayout layout;
};

// pack/unpack are exact mutual inverses. Both throw std::invalid_argument
// on dimension mismatch.
VectorXd pack(const IdentVector& v);
IdentVector unpack(const ParamLayout& layout, const VectorXd& flat);

// Difference of the two beam impact points in the inertial frame (Eq.-style
// building block; laser lengths do not cancel here).
Vector3d pair_difference_inertial(const Vector3d& q_i, const Vector3d& q_k,
                                  const ErrorParams& p_e, double L_i, double L_k,
                                  const GantryConfig& cfg);

// Length-free planar difference: the end-effector position difference rotated
// into frame E, with the z row (the only one containing L_k - L_i) discarded.
// Uses the frame-E orientation of the first point; exact for zero ram droop,
// where R_IE is independent of q.
Vector2d pair_difference_ee_selected(const Vector3d& q_i, const Vector3d& q_k,
                                     const ErrorParams& p_e, const GantryConfig& cfg);

// Plate-frame position error for sensor pair (i,k) of one pose:
//   Rz(-gamma) * pair_difference_inertial(...) - (sensors[k] - sensors[i]).
// Zero iff the model, the lengths and the yaw are consistent with the
// certified reference distance.
Vector3d residual_plate_frame(const PoseMeasurement& meas, int i, int k,
                              const ErrorParams& p_e, const std::vector<double>& lasers,
                              double gamma, const PlateGeometry& plate,
                              const GantryConfig& cfg);

// Residual block of a single pose: pairs (1,k), k = 2..n, stacked; 3(n-1) rows.
VectorXd pose_residual_block(const PoseMeasurement& meas, const ErrorParams& p_e,
                             const std::vector<double>& lasers, double gamma,
                             const PlateGeometry& plate, const GantryConfig& cfg);

// Full stacked residual over all m poses, pose-major; 3 m (n-1) rows.
VectorXd stack_residuals(const std::vector<PoseMeasurement>& measurements,
                         const IdentVector& p_id, const PlateGeometry& plate,
                         const GantryConfig& cfg);

}  // namespace platecal

#endif
