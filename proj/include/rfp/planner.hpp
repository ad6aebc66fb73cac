#pragma once

#include "rfp/lp.hpp"
#include "rfp/tax.hpp"

#include <iosfwd>
#include <vector>

namespace rfp {

struct PlanInputs {
    int horizon = 1;  // T
    double B_init = 0.0, I_init = 0.0, R_init = 0.0;
    double basis_ratio = 1.0;  // delta_0
    std::vector<double> rho_B, rho_I, rho_R;  // gross real returns, length T
    std::vector<double> earned, additional, liabilities;
    std::vector<double> rmd;  // kappa_t
    TaxSchedule tax;
    double deposit_limit = 0.0;
    double target_consumption = 0.0;
    double shortfall_weight = 500.0;
    double tightness_weight = 1e-6;
    int start_age = 0;  // labels only

    // Throws DataError.
    void validate() const;
    // Same length-T vectors filled with constants.
    static PlanInputs constant(int T, double rho_B, double rho_I, double rho_R);
};

// Column positions of the plan variables in the LP.
struct PlanIndex {
    int T = 0;
    int B(int t) const { return t; }                 // t = 0..T
    int I(int t) const { return (T + 1) + t; }
    int R(int t) const { return 2 * (T + 1) + t; }
    int flow(int k, int t) const { return 3 * (T + 1) + k * T + t; }  // t = 0..T-1
    int b(int t) const { return flow(0, t); }
    int i(int t) const { return flow(1, t); }
    int r(int t) const { return flow(2, t); }
    int ic(int t) const { return flow(3, t); }
    int id(int t) const { return flow(4, t); }
    int iw(int t) const { return flow(5, t); }
    int rc(int t) const { return flow(6, t); }
    int rd(int t) const { return flow(7, t); }
    int rw(int t) const { return flow(8, t); }
    int tau(int t) const { return flow(9, t); }
    int g(int t) const { return flow(10, t); }
    int c() const { return 3 * (T + 1) + 11 * T; }
    int q() const { return c() + 1; }
    int s() const { return c() + 2; }
    int size() const { return c() + 3; }
};

struct BuiltLP {
    lp::StandardFormLP lp;
    PlanIndex index;
};

BuiltLP build_lp(const PlanInputs& inputs);

struct Plan {
    int horizon = 0;
    int start_age = 0;
    std::vector<double> B, I, R;  // T+1
    std::vector<double> b, i, r, ic, id, iw, rc, rd, rw, tau, omega;  // T
    double c = 0.0, q = 0.0, shortfall = 0.0;
    double objective_value = 0.0;
    lp::Status status = lp::Status::numerical_failure;
    double solve_time = 0.0;
    int iterations = 0;
};

// Throws InfeasiblePlan (status infeasible) or SolverError (other failures).
Plan solve_plan(const PlanInputs& inputs, const lp::Backend& backend = lp::default_backend(),
                double tolerance = 1e-10);

struct PlanViolations {
    double initial = 0.0;
    double nonnegativity = 0.0;
    double dynamics = 0.0;
    double components = 0.0;  // i = ic - id + iw, r = -rc - rd + rw, and component signs
    double caps = 0.0;
    double cash_balance = 0.0;
    double rmd = 0.0;
    double deposit = 0.0;
    double conversion = 0.0;
    double tightness = 0.0;  // |tau - exact| / (1 + tau)
    double bequest = 0.0;
    double max() const;
};

PlanViolations verify_plan(const PlanInputs& inputs, const Plan& plan);

// year, age, B, I, R, b, ic, id, iw, rc, rd, rw, tau, c, q
void write_plan_csv(const Plan& plan, std::ostream& out);

} // namespace rfp
