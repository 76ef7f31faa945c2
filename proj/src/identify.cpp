#include "platecal/identify.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <sstream>

#include "platecal/errors.hpp"
#include "platecal/simulate.hpp"

namespace platecal {

namespace {

constexpr double kSingularCondLimit = 1e10;
constexpr double kNullSpaceRatio = 1e-6;
constexpr int kDivergenceStreak = 5;

double fd_step(double x) { return std::max(1e-7, 1e-7 * std::abs(x)); }

double scaled_condition(const MatrixXd& J, const VectorXd& col_norms) {
    const MatrixXd Js = J * col_norms.cwiseInverse().asDiagonal();
    const auto sv = Js.jacobiSvd().singularValues();
    const double smin = sv[sv.size() - 1];
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return sv[0] / smin;
}

void check_determined(const ParamLayout& layout) {
    if (layout.size() > layout.residual_rows()) {
        std::ostringstream oss;
        oss << layout.residual_rows() << " equations cannot determine " << layout.size()
            << " unknowns (" << layout.n_poses << " poses, " << layout.n_sensors
            << " sensors); add poses";
        throw SolverError("underdetermined", oss.str());
    }
}

void check_conditioning(double cond) {
    if (cond > kSingularCondLimit) {
        std::ostringstream oss;
        oss << "scaled Jacobian condition number " << cond << " exceeds " << kSingularCondLimit
            << "; see the identifiability report for the degenerate parameter directions";
        throw SolverError("singular-system", oss.str());
    }
}

std::vector<std::string> bound_names(const VectorXd& p, const VectorXd& lo, const VectorXd& hi,
                                     const ParamLayout& layout) {
    std::vector<std::string> names;
    for (int i = 0; i < p.size(); ++i)
        if (p[i] <= lo[i] || p[i] >= hi[i]) names.push_back(layout.name(i));
    return names;
}

}  // namespace

namespace detail {

VectorXd column_norms(const MatrixXd& J) {
    VectorXd norms(J.cols());
    for (int c = 0; c < J.cols(); ++c) norms[c] = std::max(J.col(c).norm(), 1e-12);
    return norms;
}

GnResult gauss_newton(const std::function<VectorXd(const VectorXd&)>& residual,
                      const std::function<MatrixXd(const VectorXd&)>& jacobian,
                      VectorXd p0, double step_tol, int max_iter) {
    GnResult res;
    res.p = std::move(p0);
    VectorXd r = residual(res.p);
    double cost = 0.5 * r.squaredNorm();
    int grow_streak = 0;
    for (int it = 0; it < max_iter; ++it) {
        const MatrixXd J = jacobian(res.p);
        const VectorXd norms = column_norms(J);
        const MatrixXd Js = J * norms.cwiseInverse().asDiagonal();
        res.condition_number = scaled_condition(J, norms);
        check_conditioning(res.condition_number);
        const VectorXd y = Js.colPivHouseholderQr().solve(-r);
        res.p += y.cwiseQuotient(norms);
        res.iterations = it + 1;
        res.step_norms.push_back(y.norm());
        r = residual(res.p);
        const double new_cost = 0.5 * r.squaredNorm();
        grow_streak = (new_cost > cost) ? grow_streak + 1 : 0;
        cost = new_cost;
        if (grow_streak >= kDivergenceStreak) {
            std::ostringstream oss;
            oss << "cost grew for " << kDivergenceStreak << " consecutive iterations (now " << cost << ")";
            throw SolverError("diverged", oss.str());
        }
        if (y.norm() < step_tol) {
            res.converged = true;
            break;
        }
    }
    res.cost = cost;
    return res;
}

}  // namespace detail

MatrixXd StackedSystem::assemble() const {
    const int rows = layout.residual_rows();
    MatrixXd full = MatrixXd::Zero(rows, layout.size());
    full.leftCols<ErrorParams::kCount>() = theta_int;
    const int rows_per_pose = 3 * (layout.n_sensors - 1);
    for (int j = 0; j < layout.n_poses; ++j)
        full.block(j * rows_per_pose, layout.pose_offset(j), rows_per_pose, layout.n_sensors + 1) =
            theta_ext[static_cast<size_t>(j)];
    return full;
}

void ParamBounds::to_flat(const IdentVector& guess, VectorXd& lower, VectorXd& upper) const {
    const ParamLayout& lay = guess.layout;
    const double inf = std::numeric_limits<double>::infinity();
    lower = VectorXd::Constant(lay.size(), -inf);
    upper = VectorXd::Constant(lay.size(), inf);
    for (int i = 0; i < ErrorParams::kCount; ++i) {
        const auto it = intrinsic.find(ErrorParams::names()[static_cast<size_t>(i)]);
        if (it != intrinsic.end()) {
            lower[i] = it->second.first;
            upper[i] = it->second.second;
        }
    }
    for (int j = 0; j < lay.n_poses; ++j) {
        const auto& blk = guess.per_pose[static_cast<size_t>(j)];
        for (int i = 0; i < lay.n_sensors; ++i) {
            const double L0 = blk.laser_lengths[static_cast<size_t>(i)];
            lower[lay.laser_index(j, i)] = L0 - laser_length_delta;
            upper[lay.laser_index(j, i)] = L0 + laser_length_delta;
        }
        lower[lay.gamma_index(j)] = blk.gamma - gamma_delta;
        upper[lay.gamma_index(j)] = blk.gamma + gamma_delta;
    }
}

StackedSystem jacobian_fd(const IdentVector& p, const std::vector<PoseMeasurement>& measurements,
                          const PlateGeometry& plate, const GantryConfig& cfg) {
    StackedSystem sys;
    sys.layout = p.layout;
    sys.Q = stack_residuals(measurements, p, plate, cfg);

    const int rows = sys.layout.residual_rows();
    const int rows_per_pose = 3 * (sys.layout.n_sensors - 1);
    VectorXd flat = pack(p);

    // Intrinsic columns probe the full stack.
    sys.theta_int.resize(rows, ErrorParams::kCount);
    for (int c = 0; c < ErrorParams::kCount; ++c) {
        const double h = fd_step(flat[c]);
        VectorXd fp = flat, fm = flat;
        fp[c] += h;
        fm[c] -= h;
        const VectorXd rp = stack_residuals(measurements, unpack(sys.layout, fp), plate, cfg);
        const VectorXd rm = stack_residuals(measurements, unpack(sys.layout, fm), plate, cfg);
        sys.theta_int.col(c) = (rp - rm) / (2.0 * h);
        if (!sys.theta_int.col(c).allFinite())
            throw SolverError("diverged", "non-finite residual while probing " + sys.layout.name(c));
    }

    // Extrinsic columns act on their own pose block only.
    sys.theta_ext.resize(static_cast<size_t>(sys.layout.n_poses));
    for (int j = 0; j < sys.layout.n_poses; ++j) {
        MatrixXd& blk = sys.theta_ext[static_cast<size_t>(j)];
        blk.resize(rows_per_pose, sys.layout.n_sensors + 1);
        const auto& meas = measurements[static_cast<size_t>(j)];
        std::vector<double> lasers = p.per_pose[static_cast<size_t>(j)].laser_lengths;
        double gamma = p.per_pose[static_cast<size_t>(j)].gamma;
        for (int c = 0; c <= sys.layout.n_sensors; ++c) {
            const bool is_gamma = (c == sys.layout.n_sensors);
            double& x = is_gamma ? gamma : lasers[static_cast<size_t>(c)];
            const double x0 = x;
            const double h = fd_step(x0);
            x = x0 + h;
            const VectorXd rp = pose_residual_block(meas, p.p_e, lasers, gamma, plate, cfg);
            x = x0 - h;
            const VectorXd rm = pose_residual_block(meas, p.p_e, lasers, gamma, plate, cfg);
            x = x0;
            blk.col(c) = (rp - rm) / (2.0 * h);
            if (!blk.col(c).allFinite())
                throw SolverError("diverged", "non-finite residual while probing " +
                                                  sys.layout.name(sys.layout.pose_offset(j) + c));
        }
    }
    return sys;
}

IdentVector initial_guess(const std::vector<PoseMeasurement>& measurements,
                          const PlateGeometry& plate, const GantryConfig& cfg) {
    (void)cfg;
    IdentVector v;
    v.layout.n_sensors = plate.sensor_count();
    v.layout.n_poses = static_cast<int>(measurements.size());
    // Beam tilts start at a small nonzero value so their columns are not
    // exactly symmetric at the origin. Fixed seed, magnitude <= 1e-6 rad.
    Prng rng(0x74617530u);  // documented constant
    v.p_e.tau_x = 1e-6 * (0.25 + 0.75 * rng.uniform());
    v.p_e.tau_y = -1e-6 * (0.25 + 0.75 * rng.uniform());
    v.per_pose.resize(measurements.size());
    for (size_t j = 0; j < measurements.size(); ++j) {
        v.per_pose[j].laser_lengths = measurements[j].laser_length_guess;
        v.per_pose[j].gamma = measurements[j].gamma_guess;
    }
    return v;
}

SolveReport solve_ls(const std::vector<PoseMeasurement>& measurements, const PlateGeometry& plate,
                     const GantryConfig& cfg, const SolverOptions& opts) {
    IdentVector guess = initial_guess(measurements, plate, cfg);
    check_determined(guess.layout);
    const ParamLayout layout = guess.layout;

    const auto residual = [&](const VectorXd& flat) {
        return stack_residuals(measurements, unpack(layout, flat), plate, cfg);
    };
    const auto jacobian = [&](const VectorXd& flat) {
        return jacobian_fd(unpack(layout, flat), measurements, plate, cfg).assemble();
    };

    detail::GnResult gn =
        detail::gauss_newton(residual, jacobian, pack(guess), opts.step_tol, opts.max_iter);

    SolveReport report;
    report.method = "ls";
    report.p_id_hat = unpack(layout, gn.p);
    report.iterations = gn.iterations;
    report.converged = gn.converged;
    report.final_cost = gn.cost;
    report.step_norms = std::move(gn.step_norms);
    const MatrixXd J = jacobian(gn.p);
    report.condition_number = scaled_condition(J, detail::column_norms(J));
    return report;
}

SolveReport solve_constrained(const std::vector<PoseMeasurement>& measurements,
                              const PlateGeometry& plate, const GantryConfig& cfg,
                              const ParamBounds& bounds, const SolverOptions& opts) {
    IdentVector guess = initial_guess(measurements, plate, cfg);
    check_determined(guess.layout);
    const ParamLayout layout = guess.layout;

    VectorXd lo, hi;
    bounds.to_flat(guess, lo, hi);
    for (int i = 0; i < lo.size(); ++i)
        if (!(lo[i] < hi[i]))
            throw SolverError("bound-infeasible", "empty bound interval for " + layout.name(i));

    const auto residual = [&](const VectorXd& flat) {
        return stack_residuals(measurements, unpack(layout, flat), plate, cfg);
    };
    const auto jacobian = [&](const VectorXd& flat) {
        return jacobian_fd(unpack(layout, flat), measurements, plate, cfg).assemble();
    };

    // Initial guess clamped into the box.
    VectorXd p = pack(guess).cwiseMax(lo).cwiseMin(hi);
    VectorXd r = residual(p);
    double f = 0.5 * r.squaredNorm();
    MatrixXd J = jacobian(p);
    VectorXd norms = detail::column_norms(J);

    SolveReport report;
    report.method = "constrained";

    double lambda = 1e-6;
    double cond = scaled_condition(J, norms);
    check_conditioning(cond);
    double last_step = std::numeric_limits<double>::infinity();
    int it = 0;
    while (it < opts.max_iter) {
        ++it;
        const MatrixXd Js = J * norms.cwiseInverse().asDiagonal();
        const VectorXd g_scaled = Js.transpose() * r;
        const MatrixXd A =
            Js.transpose() * Js + lambda * MatrixXd::Identity(layout.size(), layout.size());
        const VectorXd y = A.ldlt().solve(-g_scaled);
        const VectorXd p_trial = (p + y.cwiseQuotient(norms)).cwiseMax(lo).cwiseMin(hi);
        const VectorXd r_trial = residual(p_trial);
        const double f_trial = 0.5 * r_trial.squaredNorm();
        if (f_trial < f) {
            last_step = ((p_trial - p).cwiseProduct(norms)).norm();
            report.step_norms.push_back(last_step);
            p = p_trial;
            r = r_trial;
            f = f_trial;
            lambda = std::max(lambda * 0.3, 1e-14);
            J = jacobian(p);
            norms = detail::column_norms(J);
            cond = scaled_condition(J, norms);
            check_conditioning(cond);
            // Projected gradient: bound-blocked components removed.
            VectorXd pg = J.transpose() * r;
            for (int i = 0; i < p.size(); ++i) {
                if (p[i] <= lo[i]) pg[i] = std::min(pg[i], 0.0);
                if (p[i] >= hi[i]) pg[i] = std::max(pg[i], 0.0);
            }
            const double pg_scaled = pg.cwiseQuotient(norms).norm();
            if (pg_scaled < opts.gradient_tol * (1.0 + f) && last_step < opts.step_tol) {
                report.converged = true;
                break;
            }
        } else {
            lambda *= 3.0;
            if (lambda > 1e12) break;  // no acceptable step at maximum damping
        }
    }

    report.p_id_hat = unpack(layout, p);
    report.iterations = it;
    report.final_cost = f;
    report.condition_number = cond;
    report.active_bounds = bound_names(p, lo, hi, layout);
    return report;
}

IdentifiabilityReport identifiability_report(const std::vector<PoseMeasurement>& measurements,
                                             const PlateGeometry& plate, const GantryConfig& cfg,
                                             const IdentVector& p_id) {
    const MatrixXd J = jacobian_fd(p_id, measurements, plate, cfg).assemble();
    const VectorXd norms = detail::column_norms(J);
    const MatrixXd Js = J * norms.cwiseInverse().asDiagonal();
    const Eigen::JacobiSVD<MatrixXd> svd(Js, Eigen::ComputeFullV);

    IdentifiabilityReport rep;
    rep.singular_values = svd.singularValues();
    const double smax = rep.singular_values[0];
    const double smin = rep.singular_values[rep.singular_values.size() - 1];
    rep.underdetermined = J.rows() < J.cols();
    rep.condition_number = (smin > 0 && !rep.underdetermined)
                               ? smax / smin
                               : std::numeric_limits<double>::infinity();

    // With fewer rows than parameters the SVD reports only rows singular
    // values; the remaining right-singular directions are exact nulls.
    for (int i = 0; i < static_cast<int>(J.cols()); ++i) {
        const double sv = i < rep.singular_values.size() ? rep.singular_values[i] : 0.0;
        if (sv < kNullSpaceRatio * smax) {
            IdentifiabilityReport::NullDirection dir;
            dir.singular_value = sv;
            dir.direction = svd.matrixV().col(i);
            const double vmax = dir.direction.cwiseAbs().maxCoeff();
            for (int k = 0; k < dir.direction.size(); ++k)
                if (std::abs(dir.direction[k]) >= 0.2 * vmax)
                    dir.dominant.push_back(p_id.layout.name(k));
            rep.near_null.push_back(std::move(dir));
        }
    }
    return rep;
}

}  // namespace platecal
