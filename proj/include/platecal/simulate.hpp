#ifndef PLATECAL_SIMULATE_HPP
#define PLATECAL_SIMULATE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "platecal/model.hpp"
#include "platecal/residual.hpp"

namespace platecal {

// Deterministic stream generator (splitmix64 core, Box-Muller normals).
// Used instead of <random> distributions so campaign files are bit-identical
// for a given seed on any platform.
class Prng {
public:
    explicit Prng(std::uint64_t seed) : state_(seed) {}
    static Prng pose_stream(std::uint64_t seed, int pose_index);

    std::uint64_t next_u64();
    double uniform();  // [0, 1)
    double gauss();    // standard normal

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

struct NoiseSpec {
    double centering_sigma = 0.0;    // mm, beam spot offset on the sensor plane
    double encoder_sigma = 0.0;      // mm, additive per encoder axis
    double gamma_guess_sigma = 0.0;  // rad, operator's yaw estimate
};

// A measurement campaign: m plate placements with per-pose carriage base
// heights. carriage_z_offsets[j][i] is added to the base height when
// centering on sensor i, so the z axis is exercised within a pose; an empty
// table means the carriage height is held fixed per pose.
struct CampaignSpec {
    std::vector<PlatePose> plate_poses;
    std::vector<double> carriage_heights;               // m entries, mm
    std::vector<std::vector<double>> carriage_z_offsets;  // m x n, mm, optional
    NoiseSpec noise;
    std::uint64_t rng_seed = 0;

    int pose_count() const { return static_cast<int>(plate_poses.size()); }
    double carriage_z(int pose, int sensor) const;
    std::string check_valid(int n_sensors) const;
};

// Ground-truth raster standing in for a tracker survey of the work volume.
struct RasterReference {
    std::vector<Vector3d> grid_points;     // encoder triples q
    std::vector<Vector3d> true_positions;  // end-effector positions at q

    int size() const { return static_cast<int>(grid_points.size()); }
};

struct CenteringResult {
    Vector3d q;
    double laser_length = 0.0;
};

// Solves the beam-centering problem: find (q_x, q_y) at fixed q_z and the
// beam length L such that the impact point equals sensor_I. Newton iteration
// on the planar incidence with L recovered from the z equation; half-step
// damping when the residual grows; at most 20 iterations.
// Throws SimulationError on no convergence, when the solution leaves the
// work volume, or when L falls outside (1, 10000) mm ("unreachable").
CenteringResult center_beam_on_sensor(const Vector3d& sensor_I, double q_z,
                                      const ErrorParams& p_e_true, const GantryConfig& cfg);

// Synthesizes the measurement set for a campaign. Requires cfg.true_errors.
// Deterministic for a given spec (per-pose streams derived from rng_seed).
std::vector<PoseMeasurement> generate_campaign(const CampaignSpec& spec,
                                               const PlateGeometry& plate,
                                               const GantryConfig& cfg);

// Regular grid over the work volume at the given spacing, with ground-truth
// end-effector positions from cfg.true_errors.
RasterReference generate_raster(const GantryConfig& cfg, double spacing);

}  // namespace platecal

#endif
