#include "platecal/residual.hpp"

#include <sstream>
#include <stdexcept>

namespace platecal {

std::string PoseMeasurement::check_valid(int n_expected) const {
    std::ostringstream oss;
    if (sensor_count() != n_expected)
        oss << "pose has " << sensor_count() << " snapshots, plate has " << n_expected
            << " sensors; ";
    if (static_cast<int>(laser_length_guess.size()) != sensor_count())
        oss << "laser_length_guess size mismatch; ";
    for (double L : laser_length_guess)
        if (!(L > 0.0)) oss << "laser_length_guess must be positive; ";
    return oss.str();
}

std::string ParamLayout::name(int flat_index) const {
    if (flat_index < ErrorParams::kCount) return ErrorParams::names()[static_cast<size_t>(flat_index)];
    const int rel = flat_index - ErrorParams::kCount;
    const int j = rel / (n_sensors + 1);
    const int c = rel % (n_sensors + 1);
    std::ostringstream oss;
    if (c < n_sensors)
        oss << "L_" << j + 1 << "_" << c + 1;
    else
        oss << "gamma_" << j + 1;
    return oss.str();
}

VectorXd pack(const IdentVector& v) {
    const ParamLayout& lay = v.layout;
    if (static_cast<int>(v.per_pose.size()) != lay.n_poses)
        throw std::invalid_argument("pack: pose count does not match layout");
    VectorXd flat(lay.size());
    flat.head<ErrorParams::kCount>() = v.p_e.to_vector();
    for (int j = 0; j < lay.n_poses; ++j) {
        const auto& blk = v.per_pose[static_cast<size_t>(j)];
        if (static_cast<int>(blk.laser_lengths.size()) != lay.n_sensors)
            throw std::invalid_argument("pack: laser length count does not match layout");
        for (int i = 0; i < lay.n_sensors; ++i)
            flat[lay.laser_index(j, i)] = blk.laser_lengths[static_cast<size_t>(i)];
        flat[lay.gamma_index(j)] = blk.gamma;
    }
    return flat;
}

IdentVector unpack(const ParamLayout& layout, const VectorXd& flat) {
    if (flat.size() != layout.size()) {
        std::ostringstream oss;
        oss << "unpack: flat vector has " << flat.size() << " entries, layout expects "
            << layout.size();
        throw std::invalid_argument(oss.str());
    }
    IdentVector v;
    v.layout = layout;
    v.p_e = ErrorParams::from_vector(flat.head<ErrorParams::kCount>());
    v.per_pose.resize(static_cast<size_t>(layout.n_poses));
    for (int j = 0; j < layout.n_poses; ++j) {
        auto& blk = v.per_pose[static_cast<size_t>(j)];
        blk.laser_lengths.resize(static_cast<size_t>(layout.n_sensors));
        for (int i = 0; i < layout.n_sensors; ++i)
            blk.laser_lengths[static_cast<size_t>(i)] = flat[layout.laser_index(j, i)];
        blk.gamma = flat[layout.gamma_index(j)];
    }
    return v;
}

Vector3d pair_difference_inertial(const Vector3d& q_i, const Vector3d& q_k,
                                  const ErrorParams& p_e, double L_i, double L_k,
                                  const GantryConfig& cfg) {
    return impact_point(q_k, p_e, L_k, cfg) - impact_point(q_i, p_e, L_i, cfg);
}

Vector2d pair_difference_ee_selected(const Vector3d& q_i, const Vector3d& q_k,
                                     const ErrorParams& p_e, const GantryConfig& cfg) {
    const EePose ee_i = fk_end_effector(q_i, p_e, cfg);
    const EePose ee_k = fk_end_effector(q_k, p_e, cfg);
    const Vector3d in_e = ee_i.rotation.transpose() * (ee_k.position - ee_i.position);
    return in_e.head<2>();
}

Vector3d residual_plate_frame(const PoseMeasurement& meas, int i, int k,
                              const ErrorParams& p_e, const std::vector<double>& lasers,
                              double gamma, const PlateGeometry& plate,
                              const GantryConfig& cfg) {
    if (i == k) throw std::invalid_argument("residual_plate_frame: sensor pair needs i != k");
    const int n = plate.sensor_count();
    if (i < 0 || k < 0 || i >= n || k >= n)
        throw std::invalid_argument("residual_plate_frame: sensor index out of range");
    if (meas.sensor_count() != n || static_cast<int>(lasers.size()) != n)
        throw std::invalid_argument("residual_plate_frame: dimension mismatch between plate and measurement");
    const Vector3d diff_I = pair_difference_inertial(
        meas.encoder_snapshots[static_cast<size_t>(i)], meas.encoder_snapshots[static_cast<size_t>(k)],
        p_e, lasers[static_cast<size_t>(i)], lasers[static_cast<size_t>(k)], cfg);
    return rot_z(-gamma) * diff_I - plate.reference_distance(i, k);
}

VectorXd pose_residual_block(const PoseMeasurement& meas, const ErrorParams& p_e,
                             const std::vector<double>& lasers, double gamma,
                             const PlateGeometry& plate, const GantryConfig& cfg) {
    const int n = plate.sensor_count();
    VectorXd block(3 * (n - 1));
    for (int k = 1; k < n; ++k)
        block.segment<3>(3 * (k - 1)) = residual_plate_frame(meas, 0, k, p_e, lasers, gamma, plate, cfg);
    return block;
}

VectorXd stack_residuals(const std::vector<PoseMeasurement>& measurements,
                         const IdentVector& p_id, const PlateGeometry& plate,
                         const GantryConfig& cfg) {
    const int m = static_cast<int>(measurements.size());
    const int n = plate.sensor_count();
    if (m < 1) throw std::invalid_argument("stack_residuals: need at least one pose");
    if (p_id.layout.n_poses != m || p_id.layout.n_sensors != n)
        throw std::invalid_argument("stack_residuals: dimension mismatch between plate and measurements");
    VectorXd out(p_id.layout.residual_rows());
    const int rows_per_pose = 3 * (n - 1);
    for (int j = 0; j < m; ++j) {
        const auto& meas = measurements[static_cast<size_t>(j)];
        const std::string err = meas.check_valid(n);
        if (!err.empty()) throw std::invalid_argument("stack_residuals: " + err);
        const auto& blk = p_id.per_pose[static_cast<size_t>(j)];
        out.segment(j * rows_per_pose, rows_per_pose) =
            pose_residual_block(meas, p_id.p_e, blk.laser_lengths, blk.gamma, plate, cfg);
    }
    return out;
}

}  // namespace platecal
