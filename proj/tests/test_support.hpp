#ifndef PLATECAL_TEST_SUPPORT_HPP
#define PLATECAL_TEST_SUPPORT_HPP

// Shared fixtures: a desk-scale gantry, the two-height demo plate and the
// 8-pose campaign used across the unit and acceptance suites. Kept in sync
// with configs/demo/*.json.

#include "platecal/identify.hpp"
#include "platecal/model.hpp"
#include "platecal/residual.hpp"
#include "platecal/simulate.hpp"

namespace platecal::testing {

inline GantryConfig demo_machine() {
    GantryConfig cfg;
    cfg.tool_offset = Vector3d(0, 0, 25);
    cfg.work_volume.min = Vector3d(0, 0, 0);
    cfg.work_volume.max = Vector3d(1000, 600, 130);
    cfg.ram_droop = Vector2d(1.2e-7, -9e-8);
    return cfg;
}

// True error set scaled so the uncalibrated raster mean lands near 1.9 mm.
inline ErrorParams demo_true_errors() {
    ErrorParams p;
    p.alpha_xy = 2.6e-3;
    p.alpha_xz = 9e-4;
    p.alpha_yz = -7e-4;
    p.s_x = 2.0e-3;
    p.s_y = -1.6e-3;
    p.s_z = 6e-4;
    p.tau_x = 1.1e-3;
    p.tau_y = -8e-4;
    return p;
}

// Small error set used by the recovery examples.
inline ErrorParams small_true_errors() {
    ErrorParams p;
    p.alpha_xy = 5e-4;
    p.alpha_xz = -3e-4;
    p.alpha_yz = 2e-4;
    p.s_x = 1e-4;
    p.s_y = -2e-4;
    p.s_z = 5e-5;
    p.tau_x = 4e-4;
    p.tau_y = -6e-4;
    return p;
}

inline PlateGeometry demo_plate() {
    PlateGeometry plate;
    plate.sensors = {Vector3d(0, 0, 0), Vector3d(280, 0, 40), Vector3d(280, 180, 0),
                     Vector3d(0, 180, 40)};
    plate.distance_tolerance = 0.002;
    return plate;
}

inline PlateGeometry flat_plate() {
    PlateGeometry plate = demo_plate();
    for (auto& s : plate.sensors) s.z() = 0.0;
    return plate;
}

// z-offset schedule: cyclic shifts of (0, 18, 36, 52) so every pose samples
// several carriage heights.
inline std::vector<std::vector<double>> demo_z_offsets(int m = 8, int n = 4) {
    const std::array<double, 4> pattern = {0.0, 18.0, 36.0, 52.0};
    std::vector<std::vector<double>> offsets;
    for (int j = 0; j < m; ++j) {
        std::vector<double> row;
        for (int i = 0; i < n; ++i) row.push_back(pattern[static_cast<size_t>((i + j) % 4)]);
        offsets.push_back(std::move(row));
    }
    return offsets;
}

inline CampaignSpec demo_campaign(std::uint64_t seed = 1, NoiseSpec noise = {}) {
    const double z = 160.0;
    CampaignSpec spec;
    spec.plate_poses = {
        {Vector3d(150, 150, z), 0.15}, {Vector3d(600, 140, z), -0.40},
        {Vector3d(420, 220, z), 0.45}, {Vector3d(180, 340, z), -0.20},
        {Vector3d(520, 200, z), 0.35}, {Vector3d(300, 180, z), -0.35},
        {Vector3d(650, 300, z), 0.05}, {Vector3d(120, 220, z), 0.50},
    };
    spec.carriage_heights = {35, 55, 30, 70, 45, 60, 40, 65};
    spec.carriage_z_offsets = demo_z_offsets();
    spec.noise = noise;
    spec.rng_seed = seed;
    return spec;
}

inline NoiseSpec demo_noise() {
    NoiseSpec n;
    n.centering_sigma = 0.05;
    n.encoder_sigma = 0.002;
    n.gamma_guess_sigma = 0.01;
    return n;
}

inline ParamBounds demo_bounds() {
    ParamBounds b;
    for (const char* name : {"alpha_xy", "alpha_xz", "alpha_yz", "tau_x", "tau_y"})
        b.intrinsic[name] = {-0.01, 0.01};
    for (const char* name : {"s_x", "s_y", "s_z"}) b.intrinsic[name] = {-0.005, 0.005};
    b.laser_length_delta = 50.0;
    b.gamma_delta = 0.2;
    return b;
}

// Exact identification vector for a noiseless campaign (true lengths from
// re-centering, true yaw from the pose list).
inline IdentVector truth_ident(const CampaignSpec& spec, const PlateGeometry& plate,
                               const GantryConfig& cfg) {
    IdentVector v;
    v.layout.n_sensors = plate.sensor_count();
    v.layout.n_poses = spec.pose_count();
    v.p_e = *cfg.true_errors;
    v.per_pose.resize(static_cast<size_t>(spec.pose_count()));
    for (int j = 0; j < spec.pose_count(); ++j) {
        auto& blk = v.per_pose[static_cast<size_t>(j)];
        blk.gamma = spec.plate_poses[static_cast<size_t>(j)].gamma;
        for (int i = 0; i < plate.sensor_count(); ++i) {
            const Vector3d target = plate_to_inertial(spec.plate_poses[static_cast<size_t>(j)],
                                                      plate.sensors[static_cast<size_t>(i)]);
            blk.laser_lengths.push_back(
                center_beam_on_sensor(target, spec.carriage_z(j, i), *cfg.true_errors, cfg)
                    .laser_length);
        }
    }
    return v;
}

}  // namespace platecal::testing

#endif
