#include "platecal/simulate.hpp"

#include <cmath>
#include <sstream>

#include "platecal/errors.hpp"

namespace platecal {

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

Prng Prng::pose_stream(std::uint64_t seed, int pose_index) {
    return Prng(mix64(seed ^ mix64(0x706F7365ULL + static_cast<std::uint64_t>(pose_index))));
}

std::uint64_t Prng::next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Prng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Prng::gauss() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

double CampaignSpec::carriage_z(int pose, int sensor) const {
    double z = carriage_heights.at(static_cast<size_t>(pose));
    if (!carriage_z_offsets.empty())
        z += carriage_z_offsets.at(static_cast<size_t>(pose)).at(static_cast<size_t>(sensor));
    return z;
}

std::string CampaignSpec::check_valid(int n_sensors) const {
    std::ostringstream oss;
    if (plate_poses.empty()) oss << "campaign needs at least one pose; ";
    if (carriage_heights.size() != plate_poses.size())
        oss << "carriage_heights must have one entry per pose; ";
    if (!carriage_z_offsets.empty()) {
        if (carriage_z_offsets.size() != plate_poses.size())
            oss << "carriage_z_offsets must have one row per pose; ";
        for (const auto& row : carriage_z_offsets)
            if (static_cast<int>(row.size()) != n_sensors)
                oss << "carriage_z_offsets rows must have one entry per sensor; ";
    }
    if (noise.centering_sigma < 0 || noise.encoder_sigma < 0 || noise.gamma_guess_sigma < 0)
        oss << "noise sigmas must be >= 0; ";
    for (const auto& pose : plate_poses)
        if (!(pose.gamma > -M_PI && pose.gamma <= M_PI)) oss << "pose gamma must be in (-pi, pi]; ";
    return oss.str();
}

CenteringResult center_beam_on_sensor(const Vector3d& sensor_I, double q_z,
                                      const ErrorParams& p_e_true, const GantryConfig& cfg) {
    constexpr int kMaxIter = 20;
    constexpr double kTol = 1e-12;  // mm, planar incidence residual

    // Beam length from the z equation, then planar incidence residual.
    const auto eval = [&](const Vector3d& q, double& L_out) -> Vector2d {
        const EePose ee = fk_end_effector(q, p_e_true, cfg);
        const Vector3d b = ee.rotation * Vector3d(0, 0, 1);
        L_out = (sensor_I.z() - ee.position.z()) / b.z();
        return (ee.position + L_out * b - sensor_I).head<2>();
    };

    Vector3d q(sensor_I.x(), sensor_I.y(), q_z);
    double L = 0.0;
    Vector2d f = eval(q, L);
    bool converged = f.cwiseAbs().maxCoeff() < kTol;
    for (int it = 0; it < kMaxIter && !converged; ++it) {
        // 2x2 forward-difference Jacobian of the planar residual in (q_x, q_y).
        Eigen::Matrix2d J;
        const double h = 1e-6;
        for (int c = 0; c < 2; ++c) {
            Vector3d qp = q;
            qp[c] += h;
            double Lp;
            J.col(c) = (eval(qp, Lp) - f) / h;
        }
        Vector2d step = J.fullPivLu().solve(-f);
        double scale = 1.0;
        for (int attempt = 0; attempt < 8; ++attempt) {
            Vector3d q_try = q;
            q_try.head<2>() += scale * step;
            double L_try;
            const Vector2d f_try = eval(q_try, L_try);
            if (f_try.norm() < f.norm() || attempt == 7) {
                q = q_try;
                f = f_try;
                L = L_try;
                break;
            }
            scale *= 0.5;  // damp when the residual grows
        }
        converged = f.cwiseAbs().maxCoeff() < kTol;
    }
    if (!converged)
        throw SimulationError("beam centering did not converge within 20 iterations");
    if (!(L > 1.0 && L < 10000.0)) {
        std::ostringstream oss;
        oss << "unreachable: beam length " << L << " mm outside (1, 10000)";
        throw SimulationError(oss.str());
    }
    if (!cfg.work_volume.contains(q, 1e-9)) {
        std::ostringstream oss;
        oss << "unreachable: carriage position (" << q.transpose() << ") outside work volume";
        throw SimulationError(oss.str());
    }
    return {q, L};
}

std::vector<PoseMeasurement> generate_campaign(const CampaignSpec& spec,
                                               const PlateGeometry& plate,
                                               const GantryConfig& cfg) {
    if (!cfg.true_errors)
        throw SimulationError("simulation requires ground truth: machine config has no true_errors");
    const std::string plate_err = plate.check_valid();
    if (!plate_err.empty()) throw SimulationError("invalid plate: " + plate_err);
    const std::string spec_err = spec.check_valid(plate.sensor_count());
    if (!spec_err.empty()) throw SimulationError("invalid campaign: " + spec_err);

    const ErrorParams& truth = *cfg.true_errors;
    const int n = plate.sensor_count();
    std::vector<PoseMeasurement> out;
    out.reserve(spec.plate_poses.size());

    for (int j = 0; j < spec.pose_count(); ++j) {
        Prng rng = Prng::pose_stream(spec.rng_seed, j);
        const PlatePose& pose = spec.plate_poses[static_cast<size_t>(j)];
        PoseMeasurement meas;
        meas.encoder_snapshots.reserve(static_cast<size_t>(n));
        meas.laser_length_guess.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            Vector3d target = plate_to_inertial(pose, plate.sensors[static_cast<size_t>(i)]);
            // Centering noise: the residual spot offset on the sensor plane,
            // expressed in the plate frame and mapped through the geometry by
            // re-centering on the shifted target.
            const double dx = rng.gauss() * spec.noise.centering_sigma;
            const double dy = rng.gauss() * spec.noise.centering_sigma;
            if (spec.noise.centering_sigma > 0)
                target += rot_z(pose.gamma) * Vector3d(dx, dy, 0);
            CenteringResult c = center_beam_on_sensor(target, spec.carriage_z(j, i), truth, cfg);
            const Vector3d enc_noise(rng.gauss(), rng.gauss(), rng.gauss());
            if (spec.noise.encoder_sigma > 0) c.q += spec.noise.encoder_sigma * enc_noise;
            meas.encoder_snapshots.push_back(c.q);
            // Length guess as the uncalibrated estimate: quantized to 5 mm.
            meas.laser_length_guess.push_back(std::round(c.laser_length / 5.0) * 5.0);
        }
        const double dg = rng.gauss() * spec.noise.gamma_guess_sigma;
        meas.gamma_guess = pose.gamma + (spec.noise.gamma_guess_sigma > 0 ? dg : 0.0);
        out.push_back(std::move(meas));
    }
    return out;
}

RasterReference generate_raster(const GantryConfig& cfg, double spacing) {
    if (!(spacing > 0)) throw SimulationError("raster spacing must be positive");
    if (!cfg.true_errors)
        throw SimulationError("simulation requires ground truth: machine config has no true_errors");
    const Vector3d extent = cfg.work_volume.max - cfg.work_volume.min;
    std::array<int, 3> counts;
    for (int a = 0; a < 3; ++a) {
        if (extent[a] < 0) throw SimulationError("work volume has negative extent");
        counts[static_cast<size_t>(a)] = static_cast<int>(std::floor(extent[a] / spacing + 1e-9)) + 1;
    }
    RasterReference raster;
    if (counts[0] * counts[1] * counts[2] < 2)
        throw SimulationError("raster grid is empty: spacing exceeds the work volume extent");
    for (int ix = 0; ix < counts[0]; ++ix)
        for (int iy = 0; iy < counts[1]; ++iy)
            for (int iz = 0; iz < counts[2]; ++iz) {
                const Vector3d q = cfg.work_volume.min +
                                   Vector3d(ix * spacing, iy * spacing, iz * spacing);
                raster.grid_points.push_back(q);
                raster.true_positions.push_back(fk_end_effector(q, *cfg.true_errors, cfg).position);
            }
    return raster;
}

}  // namespace platecal
