// platecal: simulate -> identify -> validate batch pipeline for gantry
// calibration with a reference plate.

#include <CLI11.hpp>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>

#include "platecal/errors.hpp"
#include "platecal/identify.hpp"
#include "platecal/io.hpp"
#include "platecal/simulate.hpp"
#include "platecal/validate.hpp"

namespace fs = std::filesystem;
using namespace platecal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;

struct CliArgs {
    std::string config;
    std::string method;
    std::string out;
    std::string report_path;
    std::optional<std::uint64_t> seed;
    double raster_spacing = 50.0;
};

ProjectConfig load_project_with_overrides(const CliArgs& args) {
    ProjectConfig project = io::load_project(args.config);
    if (!args.method.empty()) project.method = args.method;
    if (!args.out.empty()) project.output_dir = args.out;
    return project;
}

void print_pe(const ErrorParams& p) {
    const auto v = p.to_vector();
    std::cout << std::scientific << std::setprecision(4);
    for (int i = 0; i < ErrorParams::kCount; ++i)
        std::cout << "    " << std::setw(9) << std::left << ErrorParams::names()[static_cast<size_t>(i)]
                  << " " << std::setw(12) << v[i] << "\n";
    std::cout.unsetf(std::ios::floatfield);
    std::cout << std::setprecision(6);
}

int cmd_simulate(const CliArgs& args) {
    const ProjectConfig project = load_project_with_overrides(args);
    const GantryConfig machine = io::load_machine(project.machine_file);
    const PlateGeometry plate = io::load_plate(project.plate_file);
    CampaignSpec campaign = io::load_campaign(project.campaign_file);
    if (args.seed) campaign.rng_seed = *args.seed;

    const auto measurements = generate_campaign(campaign, plate, machine);
    const RasterReference raster = generate_raster(machine, args.raster_spacing);

    fs::create_directories(project.output_dir);
    io::save_measurements((fs::path(project.output_dir) / "measurements.json").string(), measurements);
    io::save_raster((fs::path(project.output_dir) / "raster.json").string(), raster);

    std::cout << "campaign: " << campaign.pose_count() << " poses x " << plate.sensor_count()
              << " sensors, seed " << campaign.rng_seed << "\n"
              << "noise: centering " << campaign.noise.centering_sigma << " mm, encoder "
              << campaign.noise.encoder_sigma << " mm, gamma " << campaign.noise.gamma_guess_sigma
              << " rad\n"
              << "raster: " << raster.size() << " points at " << args.raster_spacing
              << " mm spacing\n"
              << "wrote " << project.output_dir << "/measurements.json, raster.json\n";
    return kExitOk;
}

int cmd_identify(const CliArgs& args) {
    const ProjectConfig project = load_project_with_overrides(args);
    const GantryConfig machine = io::load_machine(project.machine_file);
    const PlateGeometry plate = io::load_plate(project.plate_file);
    const auto measurements =
        io::load_measurements((fs::path(project.output_dir) / "measurements.json").string());

    const bool run_ls = project.method == "ls" || project.method == "both";
    const bool run_constrained = project.method == "constrained" || project.method == "both";
    bool all_converged = true;

    const auto show = [](const SolveReport& rep) {
        std::cout << "  converged: " << (rep.converged ? "yes" : "no")
                  << ", iterations: " << rep.iterations << ", final cost: " << std::scientific
                  << std::setprecision(3) << rep.final_cost << " mm^2, condition: " << rep.condition_number
                  << "\n";
        std::cout.unsetf(std::ios::floatfield);
        if (!rep.active_bounds.empty()) {
            std::cout << "  active bounds:";
            for (const auto& name : rep.active_bounds) std::cout << " " << name;
            std::cout << "\n";
        }
        print_pe(rep.p_id_hat.p_e);
    };

    fs::create_directories(project.output_dir);
    if (run_ls) {
        std::cout << "[ls] iterated linearized least squares\n";
        const SolveReport rep = solve_ls(measurements, plate, machine, project.tolerances);
        io::save_report((fs::path(project.output_dir) / "report_ls.json").string(), rep);
        show(rep);
        all_converged = all_converged && rep.converged;
    }
    if (run_constrained) {
        std::cout << "[constrained] bound-constrained damped Gauss-Newton\n";
        const ParamBounds bounds =
            project.bounds_file.empty() ? ParamBounds::unbounded() : io::load_bounds(project.bounds_file);
        const SolveReport rep =
            solve_constrained(measurements, plate, machine, bounds, project.tolerances);
        io::save_report((fs::path(project.output_dir) / "report_constrained.json").string(), rep);
        show(rep);
        all_converged = all_converged && rep.converged;
    }
    return all_converged ? kExitOk : kExitSolver;
}

int cmd_validate(const CliArgs& args) {
    const ProjectConfig project = load_project_with_overrides(args);
    const GantryConfig machine = io::load_machine(project.machine_file);
    const fs::path out(project.output_dir);
    const RasterReference raster = io::load_raster((out / "raster.json").string());

    std::string report_path = args.report_path;
    if (report_path.empty()) {
        // Prefer the constrained estimate when both are present.
        const fs::path constrained = out / "report_constrained.json";
        const fs::path ls = out / "report_ls.json";
        if (fs::exists(constrained))
            report_path = constrained.string();
        else if (fs::exists(ls))
            report_path = ls.string();
        else
            throw IoError("no solve report in " + project.output_dir + "; run identify first");
    }
    const SolveReport report = io::load_report(report_path);

    const ErrorField uncal = raster_compare(raster, ErrorParams{}, machine);
    const ErrorField cal = raster_compare(raster, report.p_id_hat.p_e, machine);
    export_error_field(uncal, (out / "uncalibrated.csv").string());
    export_error_field(cal, (out / "calibrated.csv").string());

    ValidationSummary summary;
    summary.method = report.method;
    summary.uncalibrated_max = uncal.delta_max;
    summary.uncalibrated_mean = uncal.delta_mean;
    summary.calibrated_max = cal.delta_max;
    summary.calibrated_mean = cal.delta_mean;
    std::string reduction_note;
    try {
        summary.reduction_percent = reduction_statistic(uncal, cal);
    } catch (const std::domain_error&) {
        summary.reduction_percent = 0.0;
        reduction_note = " (already exact)";
    }
    io::save_summary((out / "summary.json").string(), summary);

    std::cout << std::fixed << std::setprecision(3);
    std::cout << "                      max_xy [mm]  mean_xy [mm]\n";
    std::cout << "uncalibrated machine  " << std::setw(11) << uncal.delta_max << "  " << std::setw(12)
              << uncal.delta_mean << "\n";
    std::cout << "calibration plate     " << std::setw(11) << cal.delta_max << "  " << std::setw(12)
              << cal.delta_mean << "\n";
    std::cout << std::setprecision(1) << "mean error reduction: " << summary.reduction_percent << "%"
              << reduction_note << "\n";
    std::cout.unsetf(std::ios::floatfield);
    return kExitOk;
}

int cmd_report(const CliArgs& args) {
    const ProjectConfig project = load_project_with_overrides(args);
    const fs::path out(project.output_dir);
    for (const char* name : {"report_ls.json", "report_constrained.json"}) {
        const fs::path path = out / name;
        if (!fs::exists(path)) continue;
        const SolveReport rep = io::load_report(path.string());
        std::cout << "method " << rep.method << ": " << (rep.converged ? "converged" : "not converged")
                  << " in " << rep.iterations << " iterations, cost " << std::scientific
                  << std::setprecision(3) << rep.final_cost << " mm^2\n";
        std::cout.unsetf(std::ios::floatfield);
        print_pe(rep.p_id_hat.p_e);
    }
    const fs::path summary_path = out / "summary.json";
    if (fs::exists(summary_path)) {
        const ValidationSummary s = io::load_summary(summary_path.string());
        std::cout << std::fixed << std::setprecision(3);
        std::cout << "validation (" << s.method << "): uncalibrated " << s.uncalibrated_max << " / "
                  << s.uncalibrated_mean << " mm, calibrated " << s.calibrated_max << " / "
                  << s.calibrated_mean << " mm (max/mean xy), reduction " << std::setprecision(1)
                  << s.reduction_percent << "%\n";
        std::cout.unsetf(std::ios::floatfield);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gantry geometric calibration with a reference plate"};
    app.require_subcommand(1);

    CliArgs args;
    std::string command;
    for (const auto& [name, desc] :
         std::initializer_list<std::pair<const char*, const char*>>{
             {"simulate", "generate synthetic measurements and a reference raster"},
             {"identify", "estimate error parameters from measurements"},
             {"validate", "compare corrected kinematics against the raster"},
             {"report", "print stored identification and validation results"}}) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", args.config, "project config file")->required();
        sub->add_option("--method", args.method, "ls|constrained|both");
        sub->add_option("--out", args.out, "output directory override");
        if (std::string(name) == "simulate") {
            sub->add_option("--seed", args.seed, "campaign seed override");
            sub->add_option("--spacing", args.raster_spacing, "raster spacing, mm");
        }
        if (std::string(name) == "validate")
            sub->add_option("--report", args.report_path, "solve report to validate");
        sub->callback([&command, name] { command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (command == "simulate") return cmd_simulate(args);
        if (command == "identify") return cmd_identify(args);
        if (command == "validate") return cmd_validate(args);
        if (command == "report") return cmd_report(args);
        std::cerr << "error: no command\n";
        return kExitConfig;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SimulationError& e) {
        std::cerr << "simulation error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
