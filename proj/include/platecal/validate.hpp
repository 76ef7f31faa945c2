#ifndef PLATECAL_VALIDATE_HPP
#define PLATECAL_VALIDATE_HPP

#include <string>
#include <vector>

#include "platecal/model.hpp"
#include "platecal/simulate.hpp"

namespace platecal {

// Per-point planar deviation between a reference raster and the forward
// kinematics under a given parameter set, plus summary statistics.
struct ErrorField {
    std::vector<Vector3d> points;   // encoder triples
    std::vector<double> delta_xy;   // planar error per point, mm
    std::vector<double> delta_xyz;  // full 3D error, diagnostics only
    double delta_max = 0.0;
    double delta_mean = 0.0;

    void recompute_stats();
};

// Evaluates |reference - fk(q, p_e_hat)| over the raster, x/y components
// only for the headline statistics.
ErrorField raster_compare(const RasterReference& raster, const ErrorParams& p_e_hat,
                          const GantryConfig& cfg);

// 100 * (1 - cal.delta_mean / uncal.delta_mean). Throws std::domain_error
// ("already exact") when the uncalibrated mean is zero.
double reduction_statistic(const ErrorField& uncal, const ErrorField& cal);

// CSV with header `qx,qy,qz,delta_xy_mm`, 6 significant digit values,
// one row per raster point in raster order.
void export_error_field(const ErrorField& field, const std::string& path);

// Reads the CSV written by export_error_field (statistics are recomputed).
ErrorField import_error_field(const std::string& path);

}  // namespace platecal

#endif
