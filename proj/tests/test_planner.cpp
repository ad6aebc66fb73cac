#include "doctest.h"
#include "rfp/errors.hpp"
#include "rfp/planner.hpp"
#include "rfp/policy.hpp"
#include "rfp/profile.hpp"

#include <algorithm>
#include <random>
#include <sstream>

using namespace rfp;

namespace {

TaxSchedule no_tax() {
    TaxSchedule s;
    s.marginal_rates = {0.0};
    s.ltcg_fixed_rate = 0.0;
    s.ltcg_brackets = {{std::numeric_limits<double>::infinity(), 0.0}};
    return s;
}

TaxSchedule table_2024() { return load_tax_schedule(std::filesystem::path(RFP_DATA_DIR) / "tax_2024_single.json"); }

int column_nnz(const lp::SparseMatrix& A, int col) {
    int n = 0;
    for (lp::SparseMatrix::InnerIterator it(A, col); it; ++it) ++n;
    return n;
}

const Environment& env() {
    static const Environment e = load_environment(RFP_DATA_DIR);
    return e;
}

} // namespace

TEST_CASE("problem size") {
    SUBCASE("45 years") {
        auto in = PlanInputs::constant(45, 1.032, 1.055, 1.055);
        in.tax = table_2024();
        const auto built = build_lp(in);
        const auto n = built.lp.num_variables();
        CHECK(n >= 13 * 45);
        CHECK(n <= 13 * 45 + 60);
        CHECK(built.lp.eq_matrix.rows() == 7 * 45 + 1);
        // caps(3) + rmd + deposit + 8 tax pieces + b <= g per year, plus the shortfall row
        CHECK(built.lp.ineq_matrix.rows() == (5 + 8 + 1) * 45 + 1);
    }
    SUBCASE("one year by hand") {
        auto in = PlanInputs::constant(1, 1.0, 1.0, 1.0);
        in.tax = no_tax();
        const auto built = build_lp(in);
        // B, I, R at two dates; b i r ic id iw rc rd rw tau g; c q s
        CHECK(built.lp.num_variables() == 6 + 11 + 3);
        // three dynamics, two component splits, cash balance, conversion match, bequest
        CHECK(built.lp.eq_matrix.rows() == 8);
        // three caps, rmd, deposit, two tax pieces (zero and the single rate), b <= g, shortfall
        CHECK(built.lp.ineq_matrix.rows() == 9);
    }
}

TEST_CASE("full basis removes the gains coupling") {
    auto in = PlanInputs::constant(3, 1.03, 1.05, 1.05);
    in.tax = table_2024();
    in.basis_ratio = 1.0;
    auto built = build_lp(in);
    for (int t = 0; t < 3; ++t) CHECK(column_nnz(built.lp.ineq_matrix, built.index.g(t)) == 1);

    in.basis_ratio = 0.6;
    built = build_lp(in);
    for (int t = 0; t < 3; ++t) CHECK(column_nnz(built.lp.ineq_matrix, built.index.g(t)) == 1 + 8);
}

TEST_CASE("one-year brokerage examples") {
    auto in = PlanInputs::constant(1, 1.0, 1.0, 1.0);
    in.tax = no_tax();
    in.target_consumption = 40000.0;
    in.B_init = 100000.0;
    auto p = solve_plan(in);
    CHECK(p.c == doctest::Approx(40000.0).epsilon(1e-7));
    CHECK(p.q == doctest::Approx(60000.0).epsilon(1e-7));
    CHECK(verify_plan(in, p).max() <= 1e-6);

    in.B_init = 10000.0;
    p = solve_plan(in);
    CHECK(p.c == doctest::Approx(10000.0).epsilon(1e-7));
    CHECK(std::abs(p.q) <= 1e-4);
    CHECK(p.objective_value == doctest::Approx(-500.0 * 30000.0).epsilon(1e-6));
}

TEST_CASE("RMD row is respected") {
    auto in = PlanInputs::constant(2, 1.0, 1.0, 1.0);
    in.tax = table_2024();
    in.I_init = 100000.0;
    in.rmd = {0.1, 0.0};
    const auto p = solve_plan(in);
    CHECK(p.iw[0] >= 10000.0 - 1e-6);
    CHECK(verify_plan(in, p).max() <= 1e-6);
}

TEST_CASE("upper-middle-class plan") {
    const Profile prof = load_profile(std::filesystem::path(RFP_DATA_DIR) / "profiles" / "upper.json");
    const RetireeState s = RetireeState::from_profile(prof);
    PolicyConfig cfg;
    const PlanInputs in = mpc_inputs(s, prof, env(), cfg);
    CHECK(in.horizon == planning_horizon(65, env().female));
    const Plan p = solve_plan(in);
    CHECK(p.status == lp::Status::optimal);
    CHECK(p.solve_time < 0.5);
    CHECK(verify_plan(in, p).max() <= 1e-6);
    // conversions start large and fade out around age 70
    CHECK(p.rc[0] > 20000.0);
    CHECK(p.rc[0] >= p.rc[3]);
    double late = 0.0;
    for (int k = 8; k < in.horizon; ++k) late = std::max(late, p.rc[static_cast<std::size_t>(k)]);
    CHECK(late < 0.1 * p.rc[0]);
    CHECK(p.c >= 58400.0 - 1e-4);
}

TEST_CASE("verification catches perturbations") {
    auto in = PlanInputs::constant(4, 1.03, 1.05, 1.05);
    in.tax = table_2024();
    in.B_init = 150000.0;
    in.I_init = 300000.0;
    in.R_init = 50000.0;
    in.additional.assign(4, 20000.0);
    in.target_consumption = 60000.0;
    const auto p = solve_plan(in);
    REQUIRE(verify_plan(in, p).max() <= 1e-6);

    auto bad = p;
    bad.tau[0] += 1.0;
    CHECK(verify_plan(in, bad).tightness == doctest::Approx(1.0 / (1.0 + bad.tau[0])));
    // the cash balance breaks by the same dollar
    CHECK(verify_plan(in, bad).cash_balance == doctest::Approx(1.0));

    bad = p;
    bad.B[1] += 123.0;
    CHECK(verify_plan(in, bad).dynamics == doctest::Approx(123.0 * 1.03).epsilon(1e-9));
}

TEST_CASE("infeasible plan reports a year") {
    auto in = PlanInputs::constant(3, 1.0, 1.0, 1.0);
    in.tax = no_tax();
    in.B_init = 50000.0;
    in.liabilities = {10000.0, 10000.0, 100000.0};
    try {
        solve_plan(in);
        FAIL("expected InfeasiblePlan");
    } catch (const InfeasiblePlan& e) {
        CHECK(e.year() == 3);
    }
}

TEST_CASE("randomized instances") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> bal(0.0, 1e6), inc(0.0, 60000.0), ret(0.98, 1.08), U(0.0, 1.0);
    const auto tax = table_2024();
    int solved = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const int T = 1 + static_cast<int>(U(rng) * 30);
        PlanInputs in = PlanInputs::constant(T, 1.0, 1.0, 1.0);
        in.tax = tax;
        in.B_init = bal(rng);
        in.I_init = bal(rng);
        in.R_init = bal(rng);
        in.basis_ratio = U(rng);
        in.deposit_limit = 8000.0;
        in.target_consumption = inc(rng) + 20000.0;
        for (int t = 0; t < T; ++t) {
            const auto k = static_cast<std::size_t>(t);
            in.rho_B[k] = ret(rng);
            in.rho_I[k] = ret(rng);
            in.rho_R[k] = ret(rng);
            in.additional[k] = U(rng) < 0.5 ? inc(rng) : 0.0;
            in.earned[k] = U(rng) < 0.2 ? inc(rng) : 0.0;
            in.rmd[k] = t > 5 ? 1.0 / (26.5 - t * 0.3) : 0.0;
        }
        const Plan p = solve_plan(in);
        ++solved;
        const auto v = verify_plan(in, p);
        CHECK(v.max() <= 1e-6);
        CHECK(v.tightness <= 1e-6);
        CHECK(p.ic == p.rc);
        for (int t = 0; t < T; ++t) {
            const auto k = static_cast<std::size_t>(t);
            CHECK(p.id[k] + p.rd[k] <= std::min(in.deposit_limit, in.earned[k]) + 1e-9);
        }

        // more money never hurts
        PlanInputs richer = in;
        richer.B_init += 50000.0;
        const Plan p2 = solve_plan(richer);
        CHECK(p2.objective_value >= p.objective_value - 1e-6 * (1.0 + std::abs(p.objective_value)));

        // plenty of money: consumption reaches the target
        PlanInputs rich = in;
        rich.R_init += 5e6;
        const Plan p3 = solve_plan(rich);
        CHECK(p3.c >= rich.target_consumption - 1e-4);
    }
    CHECK(solved == 60);
}

TEST_CASE("plan table export") {
    auto in = PlanInputs::constant(2, 1.0, 1.0, 1.0);
    in.tax = no_tax();
    in.B_init = 1000.0;
    in.start_age = 70;
    const auto p = solve_plan(in);
    std::ostringstream out;
    write_plan_csv(p, out);
    const std::string s = out.str();
    CHECK(s.rfind("year,age,B,I,R,b,ic,id,iw,rc,rd,rw,tau,c,q\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 4);
    CHECK(s.find("\n1,70,1000.00,") != std::string::npos);
}

TEST_CASE("invalid plan inputs") {
    auto in = PlanInputs::constant(2, 1.0, 1.0, 1.0);
    in.tax = no_tax();
    in.rho_B[1] = 0.0;
    CHECK_THROWS_AS(build_lp(in), DataError);
    in = PlanInputs::constant(0, 1.0, 1.0, 1.0);
    CHECK_THROWS_AS(build_lp(in), DataError);
}
