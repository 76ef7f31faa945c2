#include <doctest.h>

#include <cmath>

#include "platecal/errors.hpp"
#include "platecal/identify.hpp"
#include "platecal/simulate.hpp"
#include "test_support.hpp"

using namespace platecal;
namespace tsup = platecal::testing;

namespace {

// Unstructured dense finite-difference Jacobian: every parameter probes the
// full stack. Oracle for the block-structured version.
MatrixXd dense_fd_jacobian(const IdentVector& p, const std::vector<PoseMeasurement>& meas,
                           const PlateGeometry& plate, const GantryConfig& cfg) {
    const VectorXd flat = pack(p);
    MatrixXd J(p.layout.residual_rows(), p.layout.size());
    for (int c = 0; c < flat.size(); ++c) {
        const double h = std::max(1e-7, 1e-7 * std::abs(flat[c]));
        VectorXd fp = flat, fm = flat;
        fp[c] += h;
        fm[c] -= h;
        J.col(c) = (stack_residuals(meas, unpack(p.layout, fp), plate, cfg) -
                    stack_residuals(meas, unpack(p.layout, fm), plate, cfg)) /
                   (2.0 * h);
    }
    return J;
}

void check_close(double a, double b, double rel, double atol) {
    CHECK(std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + atol);
}

}  // namespace

TEST_CASE("gauss_newton solves a linear problem in one iteration") {
    SUBCASE("scalar toy") {
        const auto res = [](const VectorXd& p) { return VectorXd::Constant(1, p[0] - 1.0); };
        const auto jac = [](const VectorXd&) { return MatrixXd::Constant(1, 1, 1.0); };
        const auto out = detail::gauss_newton(res, jac, VectorXd::Zero(1), 1e-12, 10);
        CHECK(out.p[0] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(out.iterations <= 2);  // second pass only confirms the zero step
        CHECK(out.converged);
    }
    SUBCASE("random affine residual") {
        Prng rng(29);
        const int rows = 12, cols = 5;
        MatrixXd A(rows, cols);
        VectorXd b(rows), p0(cols);
        for (int r = 0; r < rows; ++r) {
            b[r] = rng.gauss();
            for (int c = 0; c < cols; ++c) A(r, c) = rng.gauss();
        }
        for (int c = 0; c < cols; ++c) p0[c] = rng.gauss();
        const auto res = [&](const VectorXd& p) -> VectorXd { return A * p - b; };
        const auto jac = [&](const VectorXd&) { return A; };
        const auto out = detail::gauss_newton(res, jac, p0, 1e-10, 10);
        // one productive step; the follow-up step is zero and stops the loop
        CHECK(out.step_norms.size() <= 2);
        if (out.step_norms.size() == 2) CHECK(out.step_norms[1] < 1e-10);
        const VectorXd direct = A.colPivHouseholderQr().solve(b);
        CHECK((out.p - direct).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("jacobian_fd structure and oracle columns") {
    GantryConfig cfg;  // no droop, zero tool: columns have closed forms
    cfg.true_errors = ErrorParams{};
    PlateGeometry plate;
    plate.sensors = {Vector3d(0, 0, 0), Vector3d(200, 0, 0), Vector3d(0, 150, 0)};
    CampaignSpec spec;
    spec.plate_poses = {{Vector3d(250, 200, 120), 0.0}, {Vector3d(400, 300, 120), 0.0}};
    spec.carriage_heights = {20, 30};
    const auto meas = generate_campaign(spec, plate, cfg);
    const IdentVector truth = tsup::truth_ident(spec, plate, cfg);
    const StackedSystem sys = jacobian_fd(truth, meas, plate, cfg);

    SUBCASE("laser length column is the beam direction in its own rows") {
        // pair (1,2) rows are 0..2 of pose 1; d r / d L_2 = (0,0,1) at zero tilt
        const MatrixXd full = sys.assemble();
        const int col = truth.layout.laser_index(0, 1);
        CHECK(full(0, col) == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(full(1, col) == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(full(2, col) == doctest::Approx(1.0).epsilon(1e-9));
        // structural zeros outside pose 1
        for (int r = 6; r < full.rows(); ++r) CHECK(full(r, col) == 0.0);
    }
    SUBCASE("gamma column reflects the rotated reference distance") {
        // d/dgamma of Rz(-gamma) * (200,0,0) at gamma=0 has y-entry -200
        const MatrixXd full = sys.assemble();
        const int col = truth.layout.gamma_index(0);
        CHECK(full(1, col) == doctest::Approx(-200.0).epsilon(1e-6));
    }
}

TEST_CASE("block jacobian equals the dense unstructured jacobian") {
    GantryConfig cfg = tsup::demo_machine();
    cfg.true_errors = tsup::small_true_errors();
    const PlateGeometry plate = tsup::demo_plate();
    const CampaignSpec spec = tsup::demo_campaign();
    const auto meas = generate_campaign(spec, plate, cfg);
    const IdentVector truth = tsup::truth_ident(spec, plate, cfg);

    Prng rng(31);
    for (int t = 0; t < 3; ++t) {
        VectorXd flat = pack(truth);
        for (int i = 0; i < flat.size(); ++i)
            flat[i] += (i < 8 ? 2e-4 : 0.5) * (rng.uniform() - 0.5);
        const IdentVector p = unpack(truth.layout, flat);
        const MatrixXd blocked = jacobian_fd(p, meas, plate, cfg).assemble();
        const MatrixXd dense = dense_fd_jacobian(p, meas, plate, cfg);
        const double scale = dense.cwiseAbs().maxCoeff();
        CHECK((blocked - dense).cwiseAbs().maxCoeff() < 1e-6 * scale);
    }
}

TEST_CASE("initial_guess follows the measurement guesses") {
    GantryConfig cfg = tsup::demo_machine();
    cfg.true_errors = tsup::small_true_errors();
    const PlateGeometry plate = tsup::demo_plate();
    const auto meas = generate_campaign(tsup::demo_campaign(), plate, cfg);

    const IdentVector g1 = initial_guess(meas, plate, cfg);
    const IdentVector g2 = initial_guess(meas, plate, cfg);
    CHECK((pack(g1) - pack(g2)).cwiseAbs().maxCoeff() == 0.0);  // deterministic

    const auto pe = g1.p_e.to_vector();
    for (int i = 0; i < ErrorParams::kCount; ++i) CHECK(std::abs(pe[i]) <= 1e-6);
    CHECK(g1.p_e.tau_x != 0.0);
    CHECK(g1.p_e.tau_y != 0.0);
    for (size_t j = 0; j < meas.size(); ++j) {
        CHECK(g1.per_pose[j].gamma == meas[j].gamma_guess);
        for (size_t i = 0; i < meas[j].laser_length_guess.size(); ++i)
            CHECK(g1.per_pose[j].laser_lengths[i] == meas[j].laser_length_guess[i]);
    }
}

TEST_CASE("solve_ls recovers a noiseless campaign") {
    GantryConfig cfg = tsup::demo_machine();
    cfg.true_errors = tsup::small_true_errors();
    const PlateGeometry plate = tsup::demo_plate();
    const auto meas = generate_campaign(tsup::demo_campaign(), plate, cfg);

    const SolveReport rep = solve_ls(meas, plate, cfg);
    CHECK(rep.converged);
    CHECK(rep.final_cost < 1e-16);
    CHECK(rep.condition_number < 1e6);
    const auto err = (rep.p_id_hat.p_e.to_vector() - cfg.true_errors->to_vector()).cwiseAbs();
    CHECK(err.maxCoeff() < 1e-8);
    CHECK(!rep.step_norms.empty());
    CHECK(rep.step_norms.back() < 1e-7);
}

TEST_CASE("solve_ls rejects an underdetermined campaign") {
    GantryConfig cfg = tsup::demo_machine();
    cfg.true_errors = tsup::small_true_errors();
    const PlateGeometry plate = tsup::demo_plate();
    CampaignSpec spec = tsup::demo_campaign();
    spec.plate_poses.resize(1);
    spec.carriage_heights.resize(1);
    spec.carriage_z_offsets.resize(1);
    const auto meas = generate_campaign(spec, plate, cfg);
    try {
        solve_ls(meas, plate, cfg);
        FAIL("expected underdetermined");
    } catch (const SolverError& e) {
        CHECK(e.code() == "underdetermined");
    }
}

TEST_CASE("flat plate is singular and flags tau and laser directions") {
    GantryConfig cfg = tsup::demo_machine();
    cfg.true_errors = tsup::small_true_errors();
    const PlateGeometry plate = tsup::flat_plate();
    CampaignSpec spec = tsup::demo_campaign();
    spec.carriage_z_offsets.clear();  // fixed carriage height per pose
    const auto meas = generate_campaign(spec, plate, cfg);

    try {
        solve_ls(meas, plate, cfg);
        FAIL("expected singular-system");
    } catch (const SolverError& e) {
        CHECK(e.code() == "singular-system");
    }

    const IdentifiabilityReport rep =
        identifiability_report(meas, plate, cfg, initial_guess(meas, plate, cfg));
    CHECK(!rep.near_null.empty());
    bool has_tau = false, has_laser = false;
    for (const auto& dir : rep.near_null)
        for (const auto& name : dir.dominant) {
            if (name.rfind("tau", 0) == 0) has_tau = true;
            if (name.rfind("L_", 0) == 0) has_laser = true;
        }
    CHECK(has_tau);
    CHECK(has_laser);
}

TEST_CASE("identifiability report on the default campaign") {
    GantryConfig cfg = tsup::demo_machine();
    cfg.true_errors = tsup::small_true_errors();
    const PlateGeometry plate = tsup::demo_plate();
    const CampaignSpec spec = tsup::demo_campaign();
    const auto meas = generate_campaign(spec, plate, cfg);
    const IdentifiabilityReport rep =
        identifiability_report(meas, plate, cfg, tsup::truth_ident(spec, plate, cfg));
    CHECK(rep.condition_number < 1e6);
    CHECK(rep.near_null.empty());
    CHECK(!rep.underdetermined);
}

TEST_CASE("identifiability report flags underdetermination for a single pose") {
    GantryConfig cfg = tsup::demo_machine();
    cfg.true_errors = tsup::small_true_errors();
    const PlateGeometry plate = tsup::demo_plate();
    CampaignSpec spec = tsup::demo_campaign();
    spec.plate_poses.resize(1);
    spec.carriage_heights.resize(1);
    spec.carriage_z_offsets.resize(1);
    const auto meas = generate_campaign(spec, plate, cfg);
    const IdentVector guess = initial_guess(meas, plate, cfg);
    CHECK(guess.layout.residual_rows() == 9);
    CHECK(guess.layout.size() == 13);
    const IdentifiabilityReport rep = identifiability_report(meas, plate, cfg, guess);
    CHECK(rep.underdetermined);
    CHECK(rep.near_null.size() >= 4);  // 13 params - 9 rows
}

TEST_CASE("solve_constrained agrees with solve_ls when bounds are inactive") {
    GantryConfig cfg = tsup::demo_machine();
    cfg.true_errors = tsup::small_true_errors();
    const PlateGeometry plate = tsup::demo_plate();
    const auto meas = generate_campaign(tsup::demo_campaign(), plate, cfg);

    const SolveReport ls = solve_ls(meas, plate, cfg);

    SUBCASE("generous box") {
        const SolveReport cn = solve_constrained(meas, plate, cfg, tsup::demo_bounds());
        CHECK(cn.converged);
        CHECK(cn.active_bounds.empty());
        const VectorXd a = pack(ls.p_id_hat), b = pack(cn.p_id_hat);
        for (int i = 0; i < a.size(); ++i) check_close(a[i], b[i], 1e-6, 1e-12);
    }
    SUBCASE("unbounded box matches solve_ls") {
        const SolveReport cn = solve_constrained(meas, plate, cfg, ParamBounds::unbounded());
        CHECK(cn.converged);
        const VectorXd a = pack(ls.p_id_hat), b = pack(cn.p_id_hat);
        for (int i = 0; i < a.size(); ++i)
            CHECK(std::abs(a[i] - b[i]) <= 1e-8 * std::max(1.0, std::abs(a[i])));
    }
}

TEST_CASE("solve_constrained pins parameters at violated bounds") {
    GantryConfig cfg = tsup::demo_machine();
    ErrorParams truth = tsup::small_true_errors();
    truth.alpha_xy = 5e-4;
    cfg.true_errors = truth;
    const PlateGeometry plate = tsup::demo_plate();
    const auto meas = generate_campaign(tsup::demo_campaign(), plate, cfg);

    ParamBounds bounds = tsup::demo_bounds();
    bounds.intrinsic["alpha_xy"] = {-1e-4, 1e-4};  // truth sits outside
    const SolveReport rep = solve_constrained(meas, plate, cfg, bounds);
    CHECK(rep.p_id_hat.p_e.alpha_xy == doctest::Approx(1e-4).epsilon(1e-12));
    bool listed = false;
    for (const auto& name : rep.active_bounds) listed = listed || name == "alpha_xy";
    CHECK(listed);
}

TEST_CASE("solve_constrained rejects an empty box") {
    GantryConfig cfg = tsup::demo_machine();
    cfg.true_errors = tsup::small_true_errors();
    const PlateGeometry plate = tsup::demo_plate();
    const auto meas = generate_campaign(tsup::demo_campaign(), plate, cfg);
    ParamBounds bounds;
    bounds.intrinsic["s_x"] = {0.01, 0.01};  // min == max is empty
    bounds.intrinsic["s_x"].second = 0.005;  // and inverted is empty too
    try {
        solve_constrained(meas, plate, cfg, bounds);
        FAIL("expected bound-infeasible");
    } catch (const SolverError& e) {
        CHECK(e.code() == "bound-infeasible");
    }
}

TEST_CASE("solve_constrained cost is monotone over accepted steps") {
    GantryConfig cfg = tsup::demo_machine();
    cfg.true_errors = tsup::demo_true_errors();
    const PlateGeometry plate = tsup::demo_plate();
    const auto meas = generate_campaign(tsup::demo_campaign(7, tsup::demo_noise()), plate, cfg);

    const IdentVector guess = initial_guess(meas, plate, cfg);
    const double f0 = 0.5 * stack_residuals(meas, guess, plate, cfg).squaredNorm();
    const SolveReport rep = solve_constrained(meas, plate, cfg, tsup::demo_bounds());
    CHECK(rep.final_cost < f0);
}

TEST_CASE("gradient orthogonality at the unconstrained solution") {
    GantryConfig cfg = tsup::demo_machine();
    cfg.true_errors = tsup::small_true_errors();
    const PlateGeometry plate = tsup::demo_plate();
    const auto meas = generate_campaign(tsup::demo_campaign(), plate, cfg);
    const SolveReport rep = solve_ls(meas, plate, cfg);

    const StackedSystem sys = jacobian_fd(rep.p_id_hat, meas, plate, cfg);
    const MatrixXd J = sys.assemble();
    const VectorXd norms = detail::column_norms(J);
    const MatrixXd Js = J * norms.cwiseInverse().asDiagonal();
    const double g = (Js.transpose() * sys.Q).norm();
    CHECK(g < 1e-8 * sys.Q.norm() + 1e-12);
}

TEST_CASE("noiseless recovery holds over random campaigns") {
    Prng rng(1234);
    for (int trial = 0; trial < 4; ++trial) {
        ErrorParams truth;
        auto draw = [&](double half) {
            return half * (0.2 + 0.8 * rng.uniform()) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        };
        truth.alpha_xy = draw(0.05);
        truth.alpha_xz = draw(0.05);
        truth.alpha_yz = draw(0.05);
        truth.s_x = draw(0.005);
        truth.s_y = draw(0.005);
        truth.s_z = draw(0.005);
        truth.tau_x = draw(0.05);
        truth.tau_y = draw(0.05);

        GantryConfig cfg = tsup::demo_machine();
        cfg.true_errors = truth;
        const PlateGeometry plate = tsup::demo_plate();
        // Poses away from the volume edges: half-sanity errors deflect the
        // carriage by tens of millimetres.
        CampaignSpec spec = tsup::demo_campaign();
        const std::vector<size_t> keep = {0, 2, 3, 4, 5, 7};
        CampaignSpec safe = spec;
        safe.plate_poses.clear();
        safe.carriage_heights.clear();
        safe.carriage_z_offsets.clear();
        for (size_t idx : keep) {
            safe.plate_poses.push_back(spec.plate_poses[idx]);
            safe.carriage_heights.push_back(spec.carriage_heights[idx]);
            safe.carriage_z_offsets.push_back(spec.carriage_z_offsets[idx]);
        }
        const int m = 4 + static_cast<int>(rng.uniform() * 3);  // m in [4, 6]
        safe.plate_poses.resize(static_cast<size_t>(m));
        safe.carriage_heights.resize(static_cast<size_t>(m));
        safe.carriage_z_offsets.resize(static_cast<size_t>(m));
        const auto meas = generate_campaign(safe, plate, cfg);

        const SolveReport ls = solve_ls(meas, plate, cfg);
        const SolveReport cn = solve_constrained(meas, plate, cfg, ParamBounds::unbounded());
        const auto err_ls = (ls.p_id_hat.p_e.to_vector() - truth.to_vector()).cwiseAbs();
        const auto err_cn = (cn.p_id_hat.p_e.to_vector() - truth.to_vector()).cwiseAbs();
        CHECK(err_ls.maxCoeff() < 1e-7);
        CHECK(err_cn.maxCoeff() < 1e-7);
    }
}
