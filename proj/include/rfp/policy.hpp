#pragma once

#include "rfp/planner.hpp"
#include "rfp/profile.hpp"

#include <Eigen/Dense>

namespace rfp {

// Average-cost basis of the brokerage account. Values are tracked in nominal dollars;
// price_index converts between real and nominal.
struct BasisTracker {
    double nominal_basis = 0.0;
    double nominal_value = 0.0;
    double price_index = 1.0;

    static BasisTracker start(double real_value, double basis_ratio);
    // basis / value; 1 for an empty account.
    double ratio() const;
    // Sells `amount` real dollars; returns the realized gain in real dollars (may be negative).
    double sell(double amount);
    void deposit(double amount);
    // Applies one year's real gross return and inflation.
    void grow(double real_gross_return, double inflation);
};

struct RetireeState {
    int age = 65;
    double B = 0.0, I = 0.0, R = 0.0;
    BasisTracker basis;
    double carried_liability = 0.0;  // last year's cash discrepancy
    bool alive = true;
    Eigen::Vector2d rates = Eigen::Vector2d::Zero();  // last observed (treasury, transformed inflation)

    static RetireeState from_profile(const Profile& p);
};

struct YearlyAction {
    double b = 0.0, ic = 0.0, id = 0.0, iw = 0.0, rc = 0.0, rd = 0.0, rw = 0.0;
    double c = 0.0;
    double planned_tax = 0.0;
    bool fallback = false;  // emitted by the benchmark mechanics because the plan failed
    int search_steps = 0;   // benchmark withdrawal search iterations

    double i() const { return ic - id + iw; }
    double r() const { return -rc - rd + rw; }
};

struct ForecastConfig {
    enum class Mode { fixed, var };
    Mode mode = Mode::fixed;
    double rho_B = 1.032, rho_I = 1.055, rho_R = 1.055;
};

struct PolicyConfig {
    ForecastConfig forecast;
    double horizon_factor = 1.5;
    int max_age = 120;
    int frozen_terminal_age = 0;  // > 0: plan through this age instead of the horizon rule
    double tightness_weight = 1e-6;
    double tolerance = 1e-10;
    bool fallback = true;
};

// Tax schedule with the profile's planning capital gains rate.
TaxSchedule planning_tax(const Profile& p, const Environment& env);

// PlanInputs for the current state; year 1 liabilities include the carried discrepancy.
PlanInputs mpc_inputs(const RetireeState& s, const Profile& p, const Environment& env, const PolicyConfig& cfg);

YearlyAction mpc_step(const RetireeState& s, const Profile& p, const Environment& env, const PolicyConfig& cfg);

struct BenchmarkConfig {
    double withdrawal_rate = 0.0375;
    int projection_age = 85;
};

double benchmark_target(double B, double I, double R, const std::vector<IncomeStream>& additional, int start_age,
                        const BenchmarkConfig& cfg = {});

// Fixed post-tax spending: RMD first, then proportional withdrawals found by bisection.
YearlyAction benchmark_step(const RetireeState& s, const Profile& p, const Environment& env, double target_post_tax);

struct Realized {
    double rho_B = 1.0, rho_I = 1.0, rho_R = 1.0;
    double inflation = 0.0;
};

struct YearRecord {
    int age = 0;
    double B = 0.0, I = 0.0, R = 0.0;  // start of year
    YearlyAction action;
    double earned = 0.0, additional = 0.0;
    double liability = 0.0;  // scheduled, excluding the carried discrepancy
    double carried_in = 0.0;
    double realized_gain = 0.0;
    double tax = 0.0;
    double delta = 0.0;
    double rmd = 0.0;         // required amount
    double deposit_cap = 0.0; // min(d_max, earned)
    double investment_gain = 0.0;
    double B_next = 0.0, I_next = 0.0, R_next = 0.0;
};

// Applies the action with realized returns and the exact tax; advances age by one.
// Throws std::logic_error when the action overdraws an account.
YearRecord settle_year(RetireeState& s, const YearlyAction& a, const Realized& real, const Profile& p,
                       const Environment& env);

// Post-tax cash from a withdrawal mix; the same computation settle_year uses.
double exact_year_tax(double b, double ic, double id, double iw, double earned, double additional, double basis_ratio,
                      const TaxSchedule& tax, double* realized_gain = nullptr);

} // namespace rfp
