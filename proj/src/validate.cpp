#include "platecal/validate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "platecal/errors.hpp"

namespace platecal {

void ErrorField::recompute_stats() {
    delta_max = 0.0;
    delta_mean = 0.0;
    if (delta_xy.empty()) return;
    double sum = 0.0;
    for (double d : delta_xy) {
        delta_max = std::max(delta_max, d);
        sum += d;
    }
    delta_mean = sum / static_cast<double>(delta_xy.size());
}

ErrorField raster_compare(const RasterReference& raster, const ErrorParams& p_e_hat,
                          const GantryConfig& cfg) {
    if (raster.size() == 0) throw std::invalid_argument("raster_compare: empty raster");
    ErrorField field;
    field.points = raster.grid_points;
    field.delta_xy.reserve(raster.grid_points.size());
    field.delta_xyz.reserve(raster.grid_points.size());
    for (int i = 0; i < raster.size(); ++i) {
        const Vector3d modeled =
            fk_end_effector(raster.grid_points[static_cast<size_t>(i)], p_e_hat, cfg).position;
        const Vector3d delta = raster.true_positions[static_cast<size_t>(i)] - modeled;
        field.delta_xy.push_back(delta.head<2>().norm());
        field.delta_xyz.push_back(delta.norm());
    }
    field.recompute_stats();
    return field;
}

double reduction_statistic(const ErrorField& uncal, const ErrorField& cal) {
    if (uncal.delta_mean == 0.0)
        throw std::domain_error("uncalibrated mean error is zero: already exact");
    return 100.0 * (1.0 - cal.delta_mean / uncal.delta_mean);
}

void export_error_field(const ErrorField& field, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "qx,qy,qz,delta_xy_mm\n";
    char buf[160];
    for (size_t i = 0; i < field.points.size(); ++i) {
        const Vector3d& q = field.points[i];
        std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g,%.6g\n", q.x(), q.y(), q.z(),
                      field.delta_xy[i]);
        out << buf;
    }
    if (!out) throw IoError("write failed: " + path);
}

ErrorField import_error_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "qx,qy,qz,delta_xy_mm")
        throw IoError("bad error-field header in " + path);
    ErrorField field;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        double v[4];
        char comma;
        if (!(ss >> v[0] >> comma >> v[1] >> comma >> v[2] >> comma >> v[3])) {
            std::ostringstream oss;
            oss << "bad error-field row at line " << lineno << " in " << path;
            throw IoError(oss.str());
        }
        field.points.emplace_back(v[0], v[1], v[2]);
        field.delta_xy.push_back(v[3]);
        field.delta_xyz.push_back(v[3]);
    }
    field.recompute_stats();
    return field;
}

}  // namespace platecal
