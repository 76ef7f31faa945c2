#ifndef PLATECAL_IDENTIFY_HPP
#define PLATECAL_IDENTIFY_HPP

#include <Eigen/Core>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "platecal/residual.hpp"

namespace platecal {

using Eigen::MatrixXd;

// Residual vector with the block-sparse Jacobian split into the dense
// intrinsic block and per-pose extrinsic blocks.
struct StackedSystem {
    VectorXd Q;                        // 3 m (n-1) rows
    MatrixXd theta_int;                // rows x 8, d r / d p_e
    std::vector<MatrixXd> theta_ext;   // m blocks, 3(n-1) x (n+1)
    ParamLayout layout;

    // Full dense Jacobian with the structural zeros filled in.
    MatrixXd assemble() const;
};

struct SolverOptions {
    double step_tol = 1e-7;      // scaled step norm; see ledger note on 1e-10
    double gradient_tol = 1e-9;  // projected-gradient threshold (constrained)
    int max_iter = 50;
};

struct SolveReport {
    IdentVector p_id_hat;
    int iterations = 0;
    bool converged = false;
    double final_cost = 0.0;  // f = r^T r / 2, mm^2
    std::vector<double> step_norms;
    double condition_number = 0.0;  // of the column-scaled Jacobian at the solution
    std::vector<std::string> active_bounds;  // constrained solver only
    std::string method;  // "ls" or "constrained"
};

// Box bounds. Intrinsics are bounded by name (absolute min/max); laser
// lengths and plate yaws are bounded relative to their initial guesses.
// Missing entries mean unbounded.
struct ParamBounds {
    std::map<std::string, std::pair<double, double>> intrinsic;
    double laser_length_delta = std::numeric_limits<double>::infinity();
    double gamma_delta = std::numeric_limits<double>::infinity();

    static ParamBounds unbounded() { return {}; }
    void to_flat(const IdentVector& guess, VectorXd& lower, VectorXd& upper) const;
};

// Central finite-difference Jacobian of the stacked residual, step
// h = max(1e-7, 1e-7 |x|) per parameter. Extrinsic columns are evaluated on
// their own pose block only; everything else is a structural zero.
StackedSystem jacobian_fd(const IdentVector& p, const std::vector<PoseMeasurement>& measurements,
                          const PlateGeometry& plate, const GantryConfig& cfg);

// Starting point: p_e = 0 with a seeded 1e-6 perturbation on the beam tilts,
// laser lengths and yaw taken from the measurement guesses.
IdentVector initial_guess(const std::vector<PoseMeasurement>& measurements,
                          const PlateGeometry& plate, const GantryConfig& cfg);

// Iterated linearized least squares: p <- p - (Th^T Th)^-1 Th^T Q, realized
// as QR on the column-scaled Jacobian. Throws SolverError:
//   "underdetermined"  rows < parameter count
//   "singular-system"  scaled condition number > 1e10
//   "diverged"         cost grows for 5 consecutive iterations
SolveReport solve_ls(const std::vector<PoseMeasurement>& measurements,
                     const PlateGeometry& plate, const GantryConfig& cfg,
                     const SolverOptions& opts = {});

// Bound-constrained damped Gauss-Newton on f = r^T r / 2: trial steps from
// (Th^T Th + lambda D) dp = -Th^T Q with D the Marquardt column scaling,
// projected onto the box, accepted only when f decreases; lambda adapted
// x0.3 / x3. Converged when the scaled projected gradient drops below
// gradient_tol * (1 + f) and the last accepted scaled step is below step_tol.
// Adds "bound-infeasible" to the solve_ls error set.
SolveReport solve_constrained(const std::vector<PoseMeasurement>& measurements,
                              const PlateGeometry& plate, const GantryConfig& cfg,
                              const ParamBounds& bounds, const SolverOptions& opts = {});

struct IdentifiabilityReport {
    VectorXd singular_values;  // of the column-scaled Jacobian, descending
    double condition_number = 0.0;
    bool underdetermined = false;
    struct NullDirection {
        double singular_value = 0.0;
        VectorXd direction;                 // unit right-singular vector
        std::vector<std::string> dominant;  // parameter names with large weight
    };
    std::vector<NullDirection> near_null;  // singular values < 1e-6 * sigma_max
};

IdentifiabilityReport identifiability_report(const std::vector<PoseMeasurement>& measurements,
                                             const PlateGeometry& plate, const GantryConfig& cfg,
                                             const IdentVector& p_id);

namespace detail {

// Generic Gauss-Newton core used by solve_ls; exposed for direct testing on
// small problems (a linear residual converges in exactly one iteration).
struct GnResult {
    VectorXd p;
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> step_norms;
    double condition_number = 0.0;
};

GnResult gauss_newton(const std::function<VectorXd(const VectorXd&)>& residual,
                      const std::function<MatrixXd(const VectorXd&)>& jacobian,
                      VectorXd p0, double step_tol, int max_iter);

// Column norms floored at 1e-12, used for all scaling in this module.
VectorXd column_norms(const MatrixXd& J);

}  // namespace detail

}  // namespace platecal

#endif
