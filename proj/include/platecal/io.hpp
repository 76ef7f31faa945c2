#ifndef PLATECAL_IO_HPP
#define PLATECAL_IO_HPP

#include <string>
#include <vector>

#include "platecal/identify.hpp"
#include "platecal/model.hpp"
#include "platecal/simulate.hpp"
#include "platecal/validate.hpp"

namespace platecal {

// Batch-run configuration referencing the individual input files. Paths are
// resolved relative to the directory containing the project file.
struct ProjectConfig {
    std::string machine_file;
    std::string plate_file;
    std::string campaign_file;
    std::string bounds_file;
    std::string output_dir;
    std::string method = "both";  // "ls" | "constrained" | "both"
    SolverOptions tolerances;
};

struct ValidationSummary {
    double uncalibrated_max = 0.0;
    double uncalibrated_mean = 0.0;
    double calibrated_max = 0.0;
    double calibrated_mean = 0.0;
    double reduction_percent = 0.0;
    std::string method;
};

// All files are versioned JSON with a `schema_version` header and explicit
// units (mm / rad). Unknown fields are rejected; parse errors carry the file
// name and the offending field. Loaders throw ConfigError, file-system
// problems throw IoError.
namespace io {

GantryConfig load_machine(const std::string& path);
void save_machine(const std::string& path, const GantryConfig& cfg);

PlateGeometry load_plate(const std::string& path);
void save_plate(const std::string& path, const PlateGeometry& plate);

CampaignSpec load_campaign(const std::string& path);
void save_campaign(const std::string& path, const CampaignSpec& spec);

ParamBounds load_bounds(const std::string& path);
void save_bounds(const std::string& path, const ParamBounds& bounds);

std::vector<PoseMeasurement> load_measurements(const std::string& path);
void save_measurements(const std::string& path, const std::vector<PoseMeasurement>& meas);

RasterReference load_raster(const std::string& path);
void save_raster(const std::string& path, const RasterReference& raster);

SolveReport load_report(const std::string& path);
void save_report(const std::string& path, const SolveReport& report);

ValidationSummary load_summary(const std::string& path);
void save_summary(const std::string& path, const ValidationSummary& summary);

ProjectConfig load_project(const std::string& path);

}  // namespace io
}  // namespace platecal

#endif
