#include "platecal/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "platecal/errors.hpp"

namespace platecal::io {

namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kSchemaVersion = 1;

[[noreturn]] void fail(const std::string& ctx, const std::string& what) {
    throw ConfigError(ctx + ": " + what);
}

ojson read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    try {
        return ojson::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(path, std::string("not valid JSON (") + e.what() + ")");
    }
}

void write_json(const std::string& path, const ojson& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

// Strict key sets: anything unknown is rejected with a diagnostic.
void check_keys(const ojson& j, const std::string& ctx, const std::set<std::string>& required,
                const std::set<std::string>& optional = {}) {
    if (!j.is_object()) fail(ctx, "expected an object");
    for (const auto& item : j.items()) {
        if (!required.count(item.key()) && !optional.count(item.key()))
            fail(ctx, "unexpected field '" + item.key() + "'");
    }
    for (const auto& key : required)
        if (!j.contains(key)) fail(ctx, "missing field '" + key + "'");
}

double num(const ojson& j, const std::string& ctx) {
    if (!j.is_number()) fail(ctx, "expected a number");
    return j.get<double>();
}

Vector3d vec3(const ojson& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 3) fail(ctx, "expected an array of 3 numbers");
    return {num(j[0], ctx + "[0]"), num(j[1], ctx + "[1]"), num(j[2], ctx + "[2]")};
}

ojson vec3_json(const Vector3d& v) { return ojson::array({v.x(), v.y(), v.z()}); }

void check_header(const ojson& j, const std::string& ctx) {
    if (!j.contains("schema_version")) fail(ctx, "missing field 'schema_version'");
    if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSchemaVersion)
        fail(ctx, "unsupported schema_version (expected 1)");
    if (!j.contains("units")) fail(ctx, "missing field 'units'");
    check_keys(j["units"], ctx + ".units", {"length", "angle"});
    if (j["units"]["length"] != "mm" || j["units"]["angle"] != "rad")
        fail(ctx, "units must be {\"length\":\"mm\",\"angle\":\"rad\"}");
}

ojson header() {
    ojson j;
    j["schema_version"] = kSchemaVersion;
    j["units"] = {{"length", "mm"}, {"angle", "rad"}};
    return j;
}

ErrorParams error_params_from(const ojson& j, const std::string& ctx) {
    std::set<std::string> names(ErrorParams::names().begin(), ErrorParams::names().end());
    check_keys(j, ctx, names);
    ErrorParams p;
    Eigen::Matrix<double, ErrorParams::kCount, 1> v;
    for (int i = 0; i < ErrorParams::kCount; ++i) {
        const char* name = ErrorParams::names()[static_cast<size_t>(i)];
        v[i] = num(j[name], ctx + "." + name);
    }
    p = ErrorParams::from_vector(v);
    const std::string err = p.check_sane();
    if (!err.empty()) fail(ctx, err);
    return p;
}

ojson error_params_json(const ErrorParams& p) {
    ojson j;
    const auto v = p.to_vector();
    for (int i = 0; i < ErrorParams::kCount; ++i)
        j[ErrorParams::names()[static_cast<size_t>(i)]] = v[i];
    return j;
}

// JSON has no inf; non-finite condition numbers round-trip as null.
ojson finite_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

double null_or_num(const ojson& j, const std::string& ctx) {
    if (j.is_null()) return std::numeric_limits<double>::infinity();
    return num(j, ctx);
}

}  // namespace

GantryConfig load_machine(const std::string& path) {
    const ojson j = read_json(path);
    check_keys(j, path, {"schema_version", "units", "tool_offset", "work_volume"},
               {"ram_droop", "true_errors"});
    check_header(j, path);
    GantryConfig cfg;
    cfg.tool_offset = vec3(j["tool_offset"], path + ".tool_offset");
    check_keys(j["work_volume"], path + ".work_volume", {"min", "max"});
    cfg.work_volume.min = vec3(j["work_volume"]["min"], path + ".work_volume.min");
    cfg.work_volume.max = vec3(j["work_volume"]["max"], path + ".work_volume.max");
    for (int a = 0; a < 3; ++a)
        if (cfg.work_volume.min[a] > cfg.work_volume.max[a])
            fail(path + ".work_volume", "min exceeds max");
    if (j.contains("ram_droop")) {
        check_keys(j["ram_droop"], path + ".ram_droop", {"about_x", "about_y"});
        cfg.ram_droop.x() = num(j["ram_droop"]["about_x"], path + ".ram_droop.about_x");
        cfg.ram_droop.y() = num(j["ram_droop"]["about_y"], path + ".ram_droop.about_y");
        if (cfg.ram_droop.cwiseAbs().maxCoeff() > 1e-3)
            fail(path + ".ram_droop", "implausibly large droop coefficient (limit 1e-3 rad/mm^2)");
    }
    if (j.contains("true_errors") && !j["true_errors"].is_null())
        cfg.true_errors = error_params_from(j["true_errors"], path + ".true_errors");
    return cfg;
}

void save_machine(const std::string& path, const GantryConfig& cfg) {
    ojson j = header();
    j["tool_offset"] = vec3_json(cfg.tool_offset);
    j["work_volume"] = {{"min", vec3_json(cfg.work_volume.min)},
                        {"max", vec3_json(cfg.work_volume.max)}};
    j["ram_droop"] = {{"about_x", cfg.ram_droop.x()}, {"about_y", cfg.ram_droop.y()}};
    if (cfg.true_errors) j["true_errors"] = error_params_json(*cfg.true_errors);
    write_json(path, j);
}

PlateGeometry load_plate(const std::string& path) {
    const ojson j = read_json(path);
    check_keys(j, path, {"schema_version", "units", "sensors", "distance_tolerance"});
    check_header(j, path);
    PlateGeometry plate;
    if (!j["sensors"].is_array()) fail(path + ".sensors", "expected an array");
    for (size_t i = 0; i < j["sensors"].size(); ++i) {
        std::ostringstream ctx;
        ctx << path << ".sensors[" << i << "]";
        plate.sensors.push_back(vec3(j["sensors"][i], ctx.str()));
    }
    plate.distance_tolerance = num(j["distance_tolerance"], path + ".distance_tolerance");
    if (plate.distance_tolerance < 0) fail(path + ".distance_tolerance", "must be >= 0");
    const std::string err = plate.check_valid();
    if (!err.empty()) fail(path, err);
    return plate;
}

void save_plate(const std::string& path, const PlateGeometry& plate) {
    ojson j = header();
    j["sensors"] = ojson::array();
    for (const auto& s : plate.sensors) j["sensors"].push_back(vec3_json(s));
    j["distance_tolerance"] = plate.distance_tolerance;
    write_json(path, j);
}

CampaignSpec load_campaign(const std::string& path) {
    const ojson j = read_json(path);
    check_keys(j, path,
               {"schema_version", "units", "rng_seed", "noise", "plate_poses", "carriage_heights"},
               {"carriage_z_offsets"});
    check_header(j, path);
    CampaignSpec spec;
    if (!j["rng_seed"].is_number_unsigned()) fail(path + ".rng_seed", "expected a non-negative integer");
    spec.rng_seed = j["rng_seed"].get<std::uint64_t>();
    check_keys(j["noise"], path + ".noise", {"centering_sigma", "encoder_sigma", "gamma_guess_sigma"});
    spec.noise.centering_sigma = num(j["noise"]["centering_sigma"], path + ".noise.centering_sigma");
    spec.noise.encoder_sigma = num(j["noise"]["encoder_sigma"], path + ".noise.encoder_sigma");
    spec.noise.gamma_guess_sigma =
        num(j["noise"]["gamma_guess_sigma"], path + ".noise.gamma_guess_sigma");
    if (!j["plate_poses"].is_array() || j["plate_poses"].empty())
        fail(path + ".plate_poses", "expected a non-empty array");
    for (size_t i = 0; i < j["plate_poses"].size(); ++i) {
        std::ostringstream ctx;
        ctx << path << ".plate_poses[" << i << "]";
        check_keys(j["plate_poses"][i], ctx.str(), {"position", "gamma"});
        PlatePose pose;
        pose.position = vec3(j["plate_poses"][i]["position"], ctx.str() + ".position");
        pose.gamma = num(j["plate_poses"][i]["gamma"], ctx.str() + ".gamma");
        if (!(pose.gamma > -M_PI && pose.gamma <= M_PI)) fail(ctx.str() + ".gamma", "must be in (-pi, pi]");
        spec.plate_poses.push_back(pose);
    }
    if (!j["carriage_heights"].is_array()) fail(path + ".carriage_heights", "expected an array");
    for (size_t i = 0; i < j["carriage_heights"].size(); ++i) {
        std::ostringstream ctx;
        ctx << path << ".carriage_heights[" << i << "]";
        spec.carriage_heights.push_back(num(j["carriage_heights"][i], ctx.str()));
    }
    if (j.contains("carriage_z_offsets")) {
        if (!j["carriage_z_offsets"].is_array()) fail(path + ".carriage_z_offsets", "expected an array");
        for (size_t r = 0; r < j["carriage_z_offsets"].size(); ++r) {
            std::vector<double> row;
            const auto& jr = j["carriage_z_offsets"][r];
            std::ostringstream ctx;
            ctx << path << ".carriage_z_offsets[" << r << "]";
            if (!jr.is_array()) fail(ctx.str(), "expected an array");
            for (size_t c = 0; c < jr.size(); ++c) row.push_back(num(jr[c], ctx.str()));
            spec.carriage_z_offsets.push_back(std::move(row));
        }
    }
    const std::string err = spec.check_valid(
        spec.carriage_z_offsets.empty() ? 0 : static_cast<int>(spec.carriage_z_offsets[0].size()));
    if (!err.empty()) fail(path, err);
    return spec;
}

void save_campaign(const std::string& path, const CampaignSpec& spec) {
    ojson j = header();
    j["rng_seed"] = spec.rng_seed;
    j["noise"] = {{"centering_sigma", spec.noise.centering_sigma},
                  {"encoder_sigma", spec.noise.encoder_sigma},
                  {"gamma_guess_sigma", spec.noise.gamma_guess_sigma}};
    j["plate_poses"] = ojson::array();
    for (const auto& pose : spec.plate_poses)
        j["plate_poses"].push_back({{"position", vec3_json(pose.position)}, {"gamma", pose.gamma}});
    j["carriage_heights"] = spec.carriage_heights;
    if (!spec.carriage_z_offsets.empty()) j["carriage_z_offsets"] = spec.carriage_z_offsets;
    write_json(path, j);
}

ParamBounds load_bounds(const std::string& path) {
    const ojson j = read_json(path);
    check_keys(j, path, {"schema_version", "units"},
               {"intrinsic", "laser_length_delta", "gamma_delta"});
    check_header(j, path);
    ParamBounds b;
    if (j.contains("intrinsic")) {
        const std::set<std::string> names(ErrorParams::names().begin(), ErrorParams::names().end());
        check_keys(j["intrinsic"], path + ".intrinsic", {}, names);
        for (const auto& item : j["intrinsic"].items()) {
            const std::string ctx = path + ".intrinsic." + item.key();
            check_keys(item.value(), ctx, {"min", "max"});
            const double lo = num(item.value()["min"], ctx + ".min");
            const double hi = num(item.value()["max"], ctx + ".max");
            if (!(lo < hi)) fail(ctx, "min must be below max");
            b.intrinsic[item.key()] = {lo, hi};
        }
    }
    if (j.contains("laser_length_delta")) {
        b.laser_length_delta = num(j["laser_length_delta"], path + ".laser_length_delta");
        if (!(b.laser_length_delta > 0)) fail(path + ".laser_length_delta", "must be positive");
    }
    if (j.contains("gamma_delta")) {
        b.gamma_delta = num(j["gamma_delta"], path + ".gamma_delta");
        if (!(b.gamma_delta > 0)) fail(path + ".gamma_delta", "must be positive");
    }
    return b;
}

void save_bounds(const std::string& path, const ParamBounds& bounds) {
    ojson j = header();
    if (!bounds.intrinsic.empty()) {
        ojson ji;
        for (const auto& [name, mm] : bounds.intrinsic)
            ji[name] = {{"min", mm.first}, {"max", mm.second}};
        j["intrinsic"] = ji;
    }
    if (std::isfinite(bounds.laser_length_delta)) j["laser_length_delta"] = bounds.laser_length_delta;
    if (std::isfinite(bounds.gamma_delta)) j["gamma_delta"] = bounds.gamma_delta;
    write_json(path, j);
}

std::vector<PoseMeasurement> load_measurements(const std::string& path) {
    const ojson j = read_json(path);
    check_keys(j, path, {"schema_version", "units", "sensor_count", "poses"});
    check_header(j, path);
    if (!j["sensor_count"].is_number_integer()) fail(path + ".sensor_count", "expected an integer");
    const int n = j["sensor_count"].get<int>();
    if (n < 3) fail(path + ".sensor_count", "must be >= 3");
    if (!j["poses"].is_array() || j["poses"].empty()) fail(path + ".poses", "expected a non-empty array");
    std::vector<PoseMeasurement> out;
    for (size_t jp = 0; jp < j["poses"].size(); ++jp) {
        std::ostringstream ctxs;
        ctxs << path << ".poses[" << jp << "]";
        const std::string ctx = ctxs.str();
        check_keys(j["poses"][jp], ctx, {"gamma_guess", "laser_length_guess", "encoder_snapshots"});
        PoseMeasurement meas;
        meas.gamma_guess = num(j["poses"][jp]["gamma_guess"], ctx + ".gamma_guess");
        const auto& jl = j["poses"][jp]["laser_length_guess"];
        if (!jl.is_array() || static_cast<int>(jl.size()) != n)
            fail(ctx + ".laser_length_guess", "expected an array with one entry per sensor");
        for (size_t i = 0; i < jl.size(); ++i) {
            std::ostringstream c;
            c << ctx << ".laser_length_guess[" << i << "]";
            const double L = num(jl[i], c.str());
            if (!(L > 0)) fail(c.str(), "must be positive");
            meas.laser_length_guess.push_back(L);
        }
        const auto& js = j["poses"][jp]["encoder_snapshots"];
        if (!js.is_array() || static_cast<int>(js.size()) != n)
            fail(ctx + ".encoder_snapshots", "expected an array with one entry per sensor");
        for (size_t i = 0; i < js.size(); ++i) {
            std::ostringstream c;
            c << ctx << ".encoder_snapshots[" << i << "]";
            meas.encoder_snapshots.push_back(vec3(js[i], c.str()));
        }
        out.push_back(std::move(meas));
    }
    return out;
}

void save_measurements(const std::string& path, const std::vector<PoseMeasurement>& meas) {
    ojson j = header();
    j["sensor_count"] = meas.empty() ? 0 : meas.front().sensor_count();
    j["poses"] = ojson::array();
    for (const auto& m : meas) {
        ojson jp;
        jp["gamma_guess"] = m.gamma_guess;
        jp["laser_length_guess"] = m.laser_length_guess;
        jp["encoder_snapshots"] = ojson::array();
        for (const auto& q : m.encoder_snapshots) jp["encoder_snapshots"].push_back(vec3_json(q));
        j["poses"].push_back(std::move(jp));
    }
    write_json(path, j);
}

RasterReference load_raster(const std::string& path) {
    const ojson j = read_json(path);
    check_keys(j, path, {"schema_version", "units", "grid_points", "true_positions"});
    check_header(j, path);
    RasterReference raster;
    if (!j["grid_points"].is_array()) fail(path + ".grid_points", "expected an array");
    if (!j["true_positions"].is_array()) fail(path + ".true_positions", "expected an array");
    if (j["grid_points"].size() != j["true_positions"].size())
        fail(path, "grid_points and true_positions must have equal length");
    for (size_t i = 0; i < j["grid_points"].size(); ++i) {
        std::ostringstream c;
        c << path << ".grid_points[" << i << "]";
        raster.grid_points.push_back(vec3(j["grid_points"][i], c.str()));
    }
    for (size_t i = 0; i < j["true_positions"].size(); ++i) {
        std::ostringstream c;
        c << path << ".true_positions[" << i << "]";
        raster.true_positions.push_back(vec3(j["true_positions"][i], c.str()));
    }
    return raster;
}

void save_raster(const std::string& path, const RasterReference& raster) {
    ojson j = header();
    j["grid_points"] = ojson::array();
    j["true_positions"] = ojson::array();
    for (const auto& q : raster.grid_points) j["grid_points"].push_back(vec3_json(q));
    for (const auto& r : raster.true_positions) j["true_positions"].push_back(vec3_json(r));
    write_json(path, j);
}

SolveReport load_report(const std::string& path) {
    const ojson j = read_json(path);
    check_keys(j, path,
               {"schema_version", "units", "method", "converged", "iterations", "final_cost",
                "condition_number", "step_norms", "active_bounds", "p_e", "poses"});
    check_header(j, path);
    SolveReport rep;
    rep.method = j["method"].get<std::string>();
    if (rep.method != "ls" && rep.method != "constrained")
        fail(path + ".method", "expected 'ls' or 'constrained'");
    if (!j["converged"].is_boolean()) fail(path + ".converged", "expected a boolean");
    rep.converged = j["converged"].get<bool>();
    rep.iterations = j["iterations"].get<int>();
    rep.final_cost = num(j["final_cost"], path + ".final_cost");
    rep.condition_number = null_or_num(j["condition_number"], path + ".condition_number");
    for (const auto& s : j["step_norms"]) rep.step_norms.push_back(num(s, path + ".step_norms"));
    for (const auto& s : j["active_bounds"]) rep.active_bounds.push_back(s.get<std::string>());
    // Intrinsics are loaded without sanity clamping: an estimate pinned at a
    // user bound may sit outside the nominal range.
    {
        std::set<std::string> names(ErrorParams::names().begin(), ErrorParams::names().end());
        check_keys(j["p_e"], path + ".p_e", names);
        Eigen::Matrix<double, ErrorParams::kCount, 1> v;
        for (int i = 0; i < ErrorParams::kCount; ++i)
            v[i] = num(j["p_e"][ErrorParams::names()[static_cast<size_t>(i)]], path + ".p_e");
        rep.p_id_hat.p_e = ErrorParams::from_vector(v);
    }
    if (!j["poses"].is_array() || j["poses"].empty()) fail(path + ".poses", "expected a non-empty array");
    int n = -1;
    for (size_t jp = 0; jp < j["poses"].size(); ++jp) {
        std::ostringstream c;
        c << path << ".poses[" << jp << "]";
        check_keys(j["poses"][jp], c.str(), {"laser_lengths", "gamma"});
        IdentVector::PoseBlock blk;
        for (const auto& L : j["poses"][jp]["laser_lengths"])
            blk.laser_lengths.push_back(num(L, c.str() + ".laser_lengths"));
        blk.gamma = num(j["poses"][jp]["gamma"], c.str() + ".gamma");
        if (n < 0) n = static_cast<int>(blk.laser_lengths.size());
        if (static_cast<int>(blk.laser_lengths.size()) != n)
            fail(c.str(), "inconsistent laser length count");
        rep.p_id_hat.per_pose.push_back(std::move(blk));
    }
    rep.p_id_hat.layout.n_sensors = n;
    rep.p_id_hat.layout.n_poses = static_cast<int>(rep.p_id_hat.per_pose.size());
    return rep;
}

void save_report(const std::string& path, const SolveReport& report) {
    ojson j = header();
    j["method"] = report.method;
    j["converged"] = report.converged;
    j["iterations"] = report.iterations;
    j["final_cost"] = report.final_cost;
    j["condition_number"] = finite_or_null(report.condition_number);
    j["step_norms"] = report.step_norms;
    j["active_bounds"] = report.active_bounds;
    j["p_e"] = error_params_json(report.p_id_hat.p_e);
    j["poses"] = ojson::array();
    for (const auto& blk : report.p_id_hat.per_pose)
        j["poses"].push_back({{"laser_lengths", blk.laser_lengths}, {"gamma", blk.gamma}});
    write_json(path, j);
}

ValidationSummary load_summary(const std::string& path) {
    const ojson j = read_json(path);
    check_keys(j, path, {"schema_version", "units", "method", "uncalibrated", "calibrated",
                         "reduction_percent"});
    check_header(j, path);
    ValidationSummary s;
    s.method = j["method"].get<std::string>();
    check_keys(j["uncalibrated"], path + ".uncalibrated", {"delta_max_xy", "delta_mean_xy"});
    check_keys(j["calibrated"], path + ".calibrated", {"delta_max_xy", "delta_mean_xy"});
    s.uncalibrated_max = num(j["uncalibrated"]["delta_max_xy"], path);
    s.uncalibrated_mean = num(j["uncalibrated"]["delta_mean_xy"], path);
    s.calibrated_max = num(j["calibrated"]["delta_max_xy"], path);
    s.calibrated_mean = num(j["calibrated"]["delta_mean_xy"], path);
    s.reduction_percent = num(j["reduction_percent"], path + ".reduction_percent");
    return s;
}

void save_summary(const std::string& path, const ValidationSummary& summary) {
    ojson j = header();
    j["method"] = summary.method;
    j["uncalibrated"] = {{"delta_max_xy", summary.uncalibrated_max},
                         {"delta_mean_xy", summary.uncalibrated_mean}};
    j["calibrated"] = {{"delta_max_xy", summary.calibrated_max},
                       {"delta_mean_xy", summary.calibrated_mean}};
    j["reduction_percent"] = summary.reduction_percent;
    write_json(path, j);
}

ProjectConfig load_project(const std::string& path) {
    const ojson j = read_json(path);
    check_keys(j, path,
               {"schema_version", "machine_file", "plate_file", "campaign_file", "output_dir"},
               {"units", "bounds_file", "method", "tolerances"});
    if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSchemaVersion)
        fail(path, "unsupported schema_version (expected 1)");
    ProjectConfig cfg;
    const fs::path base = fs::path(path).parent_path();
    const auto resolve = [&](const std::string& p) {
        return fs::path(p).is_absolute() ? p : (base / p).string();
    };
    cfg.machine_file = resolve(j["machine_file"].get<std::string>());
    cfg.plate_file = resolve(j["plate_file"].get<std::string>());
    cfg.campaign_file = resolve(j["campaign_file"].get<std::string>());
    if (j.contains("bounds_file")) cfg.bounds_file = resolve(j["bounds_file"].get<std::string>());
    cfg.output_dir = resolve(j["output_dir"].get<std::string>());
    if (j.contains("method")) {
        cfg.method = j["method"].get<std::string>();
        if (cfg.method != "ls" && cfg.method != "constrained" && cfg.method != "both")
            fail(path + ".method", "expected 'ls', 'constrained' or 'both'");
    }
    if (j.contains("tolerances")) {
        check_keys(j["tolerances"], path + ".tolerances", {}, {"step_tol", "max_iter"});
        if (j["tolerances"].contains("step_tol"))
            cfg.tolerances.step_tol = num(j["tolerances"]["step_tol"], path + ".tolerances.step_tol");
        if (j["tolerances"].contains("max_iter"))
            cfg.tolerances.max_iter = j["tolerances"]["max_iter"].get<int>();
    }
    return cfg;
}

}  // namespace platecal::io
