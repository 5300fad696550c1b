#include <doctest.h>

#include <cmath>

#include "delayctl/ddare.hpp"
#include "delayctl/lyapunov.hpp"
#include "delayctl/numerics.hpp"
#include "test_support.hpp"

using namespace delayctl;
using delayctl::testing::DrawSeq;

namespace {

MultiDelaySystem scalar_sys(double a, std::vector<double> b, std::vector<double> c,
                            std::vector<double> s2) {
    MultiDelaySystem sys;
    sys.n = 1;
    sys.m = 1;
    sys.D = static_cast<int>(b.size()) - 1;
    sys.A = Matrix{{a}};
    for (std::size_t i = 0; i < b.size(); ++i) {
        sys.B.push_back(Matrix{{b[i]}});
        sys.C.push_back(Matrix{{c[i]}});
        sys.sigma2.push_back(s2[i]);
    }
    return sys;
}

const Matrix kIdentity1 = Matrix::Identity(1, 1);

}  // namespace

TEST_CASE("operator evaluation") {
    SUBCASE("scalar rational one-step map") {
        // a=2, b=1, no noise: Z -> (5Z+1)/(Z+1).
        const auto sys = scalar_sys(2.0, {1.0}, {1.0}, {0.0});
        const auto step = ddare_operator(sys, kIdentity1, kIdentity1, Matrix{{3.0}});
        CHECK(step.Z_next(0, 0) == doctest::Approx(4.0));
        CHECK(step.Psi(0, 0) == doctest::Approx(4.0));
    }
    SUBCASE("zero iterate maps to Q") {
        DrawSeq draw(7);
        const auto sys = delayctl::testing::random_system(draw);
        const Matrix Q = Matrix::Identity(sys.n, sys.n);
        const Matrix R = Matrix::Identity(sys.m, sys.m);
        const auto step = ddare_operator(sys, Q, R, Matrix::Zero(sys.n, sys.n));
        CHECK(step.Z_next.isApprox(Q));
        // With Z = 0 only the weight term of Psi survives.
        const Matrix U = step.Psi;
        const auto again = ddare_operator(sys, Q, R, Matrix::Zero(sys.n, sys.n));
        CHECK(again.Psi.isApprox(U));
    }
    SUBCASE("restricted overload agrees with the embedded form") {
        const RestrictedSystem r = delayctl::testing::example2_system();
        const MultiDelaySystem sys = r.to_multi_delay();
        const Matrix Q = Matrix::Identity(2, 2);
        const Matrix R = Matrix::Identity(2, 2);
        DrawSeq draw(13);
        const Matrix Zs = symmetrize(draw.matrix(2, 2));
        const Matrix Z = Zs * Zs.transpose() + Matrix::Identity(2, 2);
        const auto direct = ddare_operator(r, Q, R, Z);
        const auto embedded = ddare_operator(sys, Q, R, Z);
        CHECK(direct.Z_next.isApprox(embedded.Z_next, 1e-12));
        CHECK(direct.Psi.isApprox(embedded.Psi, 1e-12));
    }
}

TEST_CASE("fixed-point solve") {
    SUBCASE("noiseless scalar equals the quadratic root") {
        const auto sys = scalar_sys(2.0, {1.0}, {1.0}, {0.0});
        const auto result = solve_ddare(sys, kIdentity1, kIdentity1);
        REQUIRE(result.converged());
        CHECK(result.solution->Z(0, 0) == doctest::Approx(2.0 + std::sqrt(5.0)).epsilon(1e-9));
        CHECK(result.solution->final_residual <=
              1e-10 * std::max(1.0, result.solution->Z.norm()));
    }
    SUBCASE("noisy scalar equals the quadratic root") {
        const auto sys = scalar_sys(1.2, {1.0}, {1.0}, {0.25});
        const auto result = solve_ddare(sys, kIdentity1, kIdentity1);
        REQUIRE(result.converged());
        // 0.89 z^2 - 1.69 z - 1 = 0.
        const double root = (1.69 + std::sqrt(1.69 * 1.69 + 4.0 * 0.89)) / (2.0 * 0.89);
        CHECK(result.solution->Z(0, 0) == doctest::Approx(root).epsilon(1e-8));
    }
    SUBCASE("strong noise is not stabilizable") {
        const auto sys = scalar_sys(2.0, {1.0}, {1.0}, {1.0});
        const auto result = solve_ddare(sys, kIdentity1, kIdentity1);
        CHECK_FALSE(result.converged());
        CHECK(result.status == SolveStatus::diverged);
        CHECK_FALSE(result.solution.has_value());
    }
    SUBCASE("the worked restricted example reproduces the published solution") {
        const auto result = solve_ddare(delayctl::testing::example2_system(),
                                        Matrix::Identity(2, 2), Matrix::Identity(2, 2));
        REQUIRE(result.converged());
        const Matrix Zp = delayctl::testing::example2_paper_Z();
        CHECK(((result.solution->Z - Zp).cwiseAbs().array() / Zp.cwiseAbs().array()).maxCoeff() <
              1e-4);
    }
    SUBCASE("iterates increase monotonically from the zero start") {
        DrawSeq draw(17);
        int checked = 0;
        while (checked < 10) {
            const auto sys = delayctl::testing::random_system(draw);
            DdareOptions options;
            options.record_trace = true;
            const auto result = solve_ddare(sys, Matrix::Identity(sys.n, sys.n),
                                            Matrix::Identity(sys.m, sys.m), {}, options);
            if (!result.converged()) {
                continue;
            }
            CHECK(result.solution->monotonicity_violations == 0);
            CHECK(result.solution->trace.size() ==
                  static_cast<std::size_t>(result.iterations) + 1);
            ++checked;
        }
    }
    SUBCASE("dominating start decreases to the same fixed point") {
        const auto sys = scalar_sys(1.2, {1.0}, {1.0}, {0.25});
        const auto up = solve_ddare(sys, kIdentity1, kIdentity1);
        REQUIRE(up.converged());
        DdareOptions options;
        options.record_trace = true;
        options.dominating_start = Matrix{{50.0}};
        const auto down = solve_ddare(sys, kIdentity1, kIdentity1, {}, options);
        REQUIRE(down.converged());
        CHECK(down.solution->Z(0, 0) == doctest::Approx(up.solution->Z(0, 0)).epsilon(1e-8));
        CHECK(down.solution->monotonicity_violations == 0);
        options.dominating_start = Matrix{{0.5}};  // below the fixed point
        CHECK_THROWS_AS(solve_ddare(sys, kIdentity1, kIdentity1, {}, options),
                        AssumptionViolated);
    }
    SUBCASE("weights must be positive definite") {
        const auto sys = scalar_sys(2.0, {1.0}, {1.0}, {0.0});
        CHECK_THROWS_AS(solve_ddare(sys, Matrix::Zero(1, 1), kIdentity1), Error);
    }
    SUBCASE("returned solution is a fixed point of the operator") {
        DrawSeq draw(19);
        int checked = 0;
        while (checked < 15) {
            const auto sys = delayctl::testing::random_system(draw);
            const Matrix Q = Matrix::Identity(sys.n, sys.n);
            const Matrix R = Matrix::Identity(sys.m, sys.m);
            const auto result = solve_ddare(sys, Q, R);
            if (!result.converged()) {
                continue;
            }
            const auto step = ddare_operator(sys, Q, R, result.solution->Z);
            CHECK((step.Z_next - result.solution->Z).norm() <=
                  1e-10 * std::max(1.0, result.solution->Z.norm()));
            ++checked;
        }
    }
}

TEST_CASE("gain synthesis") {
    SUBCASE("noiseless scalar gain") {
        const auto sys = scalar_sys(2.0, {1.0}, {1.0}, {0.0});
        const auto result = solve_ddare(sys, kIdentity1, kIdentity1);
        REQUIRE(result.converged());
        const FeedbackLaw law = synthesize_gain(sys, *result.solution);
        REQUIRE(law.K.size() == 1);
        CHECK(law.K[0](0, 0) == doctest::Approx(-1.618034).epsilon(1e-6));
    }
    SUBCASE("no delay reduces to a single gain") {
        DrawSeq draw(29);
        MultiDelaySystem sys = delayctl::testing::random_system(draw, 3, 2, 0);
        const Matrix Q = Matrix::Identity(sys.n, sys.n);
        const Matrix R = Matrix::Identity(sys.m, sys.m);
        const auto result = solve_ddare(sys, Q, R);
        if (result.converged()) {
            const FeedbackLaw law = synthesize_gain(sys, *result.solution);
            CHECK(law.K.size() == 1);
            const Matrix expected =
                -result.solution->Psi.llt().solve(result.solution->L.transpose() *
                                                  result.solution->Z * sys.A);
            CHECK(law.K[0].isApprox(expected, 1e-10));
        }
    }
    SUBCASE("restricted law matches the published closed form") {
        const RestrictedSystem r = delayctl::testing::example2_system();
        const auto result = solve_ddare(r, Matrix::Identity(2, 2), Matrix::Identity(2, 2));
        REQUIRE(result.converged());
        const FeedbackLaw law = synthesize_gain(r, *result.solution);
        // u*_t = -Psi^{-1} Bbar' Z (A^{D+1} x_t + sum_tau A^tau Bbar u_{t-tau}).
        const Matrix G = result.solution->Psi.llt().solve(r.Bbar.transpose() *
                                                          result.solution->Z);
        CHECK(law.K[0].isApprox(Matrix(-G * mat_pow_signed(r.A, 3)), 1e-10));
        CHECK(law.K[1].isApprox(Matrix(-G * r.A * r.Bbar), 1e-10));
        CHECK(law.K[2].isApprox(Matrix(-G * r.A * r.A * r.Bbar), 1e-10));
    }
    SUBCASE("the synthesized law coincides with the realized auxiliary gain") {
        DrawSeq draw(31);
        int checked = 0;
        while (checked < 10) {
            const auto sys = delayctl::testing::random_system(draw);
            const auto result = solve_ddare(sys, Matrix::Identity(sys.n, sys.n),
                                            Matrix::Identity(sys.m, sys.m));
            if (!result.converged()) {
                continue;
            }
            const FeedbackLaw direct = synthesize_gain(sys, *result.solution);
            AuxGain aux;
            aux.L0 = direct.K[0];
            aux.Ltau.assign(static_cast<std::size_t>(sys.D), Matrix::Zero(sys.m, sys.m));
            const FeedbackLaw realized = realize_controller(sys, aux);
            for (std::size_t tau = 0; tau < direct.K.size(); ++tau) {
                CHECK((direct.K[tau] - realized.K[tau]).norm() <=
                      1e-9 * std::max(1.0, direct.K[tau].norm()));
            }
            ++checked;
        }
    }
}

TEST_CASE("equivalent P-form") {
    SUBCASE("no delay is the original equation") {
        const auto sys = scalar_sys(1.2, {1.0}, {1.0}, {0.25});
        const auto result = solve_ddare(sys, kIdentity1, kIdentity1);
        REQUIRE(result.converged());
        const PFormSolution pf = p_form_check(sys, kIdentity1, kIdentity1, *result.solution);
        CHECK(pf.P.isApprox(result.solution->Z, 1e-12));
        CHECK(pf.Qhat.isApprox(kIdentity1));
        CHECK(pf.H.isApprox(result.solution->L, 1e-12));
        CHECK(pf.Lambda.isApprox(result.solution->Psi, 1e-9));
    }
    SUBCASE("scalar two-delay fixture") {
        const auto sys = scalar_sys(2.0, {1.0, 3.0}, {0.5, 0.2}, {0.3, 0.4});
        const auto result = solve_ddare(sys, kIdentity1, kIdentity1);
        REQUIRE(result.converged());
        const PFormSolution pf = p_form_check(sys, kIdentity1, kIdentity1, *result.solution);
        CHECK(pf.residual < 1e-10 * std::max(1.0, pf.P.norm()) * 10);
    }
    SUBCASE("Lambda dominates R") {
        DrawSeq draw(43);
        int checked = 0;
        while (checked < 10) {
            const auto sys = delayctl::testing::random_system(draw);
            const Matrix Q = Matrix::Identity(sys.n, sys.n);
            const Matrix R = Matrix::Identity(sys.m, sys.m);
            const auto result = solve_ddare(sys, Q, R);
            if (!result.converged()) {
                continue;
            }
            const PFormSolution pf = p_form_check(sys, Q, R, *result.solution);
            CHECK(is_positive_definite(Matrix(pf.Lambda - R + 1e-12 * Matrix::Identity(sys.m, sys.m)),
                                       1e-12)
                      .min_eigenvalue >= -1e-9);
            ++checked;
        }
    }
}

TEST_CASE("coupled-equation reconstruction") {
    SUBCASE("no delay gives a single unknown") {
        const auto sys = scalar_sys(1.2, {1.0}, {1.0}, {0.25});
        const auto result = solve_ddare(sys, kIdentity1, kIdentity1);
        REQUIRE(result.converged());
        const CareReconstruction care =
            care_reconstruct(sys, kIdentity1, kIdentity1, *result.solution);
        REQUIRE(care.P.size() == 1);
        CHECK(care.P[0](0, 0) == doctest::Approx(result.solution->Z(0, 0)).epsilon(1e-9));
        CHECK(care.sum_residual < 1e-12);
    }
    SUBCASE("scalar one-delay fixture") {
        const auto sys = scalar_sys(2.0, {1.0, 3.0}, {0.0, 0.0}, {0.0, 0.0});
        const auto result = solve_ddare(sys, kIdentity1, kIdentity1);
        REQUIRE(result.converged());
        const CareReconstruction care =
            care_reconstruct(sys, kIdentity1, kIdentity1, *result.solution);
        REQUIRE(care.P.size() == 2);
        CHECK(care.sum_residual < 1e-9);
        CHECK(care.coupling_residual < 1e-7);
        CHECK(care.upsilon_gap < 1e-8);
    }
    SUBCASE("the worked three-state example reconstructs") {
        const auto sys = delayctl::testing::example1_system();
        const auto result =
            solve_ddare(sys, Matrix::Identity(3, 3), Matrix::Identity(2, 2));
        REQUIRE(result.converged());
        const CareReconstruction care = care_reconstruct(sys, Matrix::Identity(3, 3),
                                                         Matrix::Identity(2, 2), *result.solution);
        CHECK(care.P.size() == 3);
        CHECK(care.sum_residual < 1e-6);
        CHECK(care.equation_residual < 1e-6);
        CHECK(care.coupling_residual < 1e-6);
        CHECK(care.upsilon_gap < 1e-6);
    }
}

TEST_CASE("deterministic degeneration to the classical equation") {
    // With no noise and no delay the fixed point solves the standard
    // discrete-time equation; cross-checked on the hand-solved instance.
    const auto sys = scalar_sys(2.0, {1.0}, {0.0}, {0.0});
    const auto result = solve_ddare(sys, kIdentity1, kIdentity1);
    REQUIRE(result.converged());
    const double z = result.solution->Z(0, 0);
    // z = a^2 z + q - a^2 z^2 / (z + r) at a=2, q=r=1.
    CHECK(4.0 * z + 1.0 - 4.0 * z * z / (z + 1.0) ==
          doctest::Approx(z).epsilon(1e-9));
    CHECK(z == doctest::Approx(2.0 + std::sqrt(5.0)).epsilon(1e-9));
}
