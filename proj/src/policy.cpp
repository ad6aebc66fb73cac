#include "rfp/policy.hpp"

#include "rfp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rfp {

BasisTracker BasisTracker::start(double real_value, double basis_ratio) {
    BasisTracker t;
    t.nominal_value = real_value;
    t.nominal_basis = real_value * basis_ratio;
    return t;
}

double BasisTracker::ratio() const { return nominal_value > 0.0 ? nominal_basis / nominal_value : 1.0; }

double BasisTracker::sell(double amount) {
    if (amount <= 0.0) return 0.0;
    const double nominal = amount * price_index;
    if (nominal_value <= 0.0) return 0.0;
    const double frac = std::min(nominal / nominal_value, 1.0);
    const double basis_sold = nominal_basis * frac;
    nominal_basis -= basis_sold;
    nominal_value -= nominal;
    if (frac >= 1.0 || nominal_value <= 0.0) {
        nominal_value = 0.0;
        nominal_basis = 0.0;
    }
    return (nominal - basis_sold) / price_index;
}

void BasisTracker::deposit(double amount) {
    if (amount <= 0.0) return;
    nominal_basis += amount * price_index;
    nominal_value += amount * price_index;
}

void BasisTracker::grow(double real_gross_return, double inflation) {
    nominal_value *= real_gross_return * (1.0 + inflation);
    price_index *= 1.0 + inflation;
}

RetireeState RetireeState::from_profile(const Profile& p) {
    RetireeState s;
    s.age = p.start_age;
    s.B = p.brokerage;
    s.I = p.ira;
    s.R = p.roth;
    s.basis = BasisTracker::start(p.brokerage, p.basis_ratio);
    return s;
}

TaxSchedule planning_tax(const Profile& p, const Environment& env) {
    TaxSchedule t = env.tax;
    t.ltcg_fixed_rate = p.ltcg_rate;
    return t;
}

PlanInputs mpc_inputs(const RetireeState& s, const Profile& p, const Environment& env, const PolicyConfig& cfg) {
    const auto& table = env.table(p.sex);
    int T = cfg.frozen_terminal_age > 0 ? cfg.frozen_terminal_age - s.age + 1
                                        : planning_horizon(s.age, table, cfg.horizon_factor, cfg.max_age);
    T = std::max(T, 1);
    PlanInputs in = PlanInputs::constant(T, cfg.forecast.rho_B, cfg.forecast.rho_I, cfg.forecast.rho_R);
    if (cfg.forecast.mode == ForecastConfig::Mode::var) {
        std::vector<int> h(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t) h[static_cast<std::size_t>(t)] = t + 1;
        const auto fc = forecast_var(env.models.var, s.rates, h);
        const double m = env.models.market_forecast;
        for (int t = 0; t < T; ++t) {
            const auto k = static_cast<std::size_t>(t);
            const double tr = fc[k][0];
            const double infl = inverse_transform(fc[k][1], env.models.transform);
            in.rho_B[k] = 1.0 + portfolio_real_return(m, tr, infl, p.stock_brokerage);
            in.rho_I[k] = 1.0 + portfolio_real_return(m, tr, infl, p.stock_ira);
            in.rho_R[k] = 1.0 + portfolio_real_return(m, tr, infl, p.stock_roth);
        }
    }
    in.B_init = std::max(s.B, 0.0);
    in.I_init = std::max(s.I, 0.0);
    in.R_init = std::max(s.R, 0.0);
    in.basis_ratio = s.basis.ratio();
    for (int t = 0; t < T; ++t) {
        const auto k = static_cast<std::size_t>(t);
        const int age = s.age + t;
        in.earned[k] = stream_amount(p.earned_income, age);
        in.additional[k] = stream_amount(p.additional_income, age);
        in.liabilities[k] = stream_amount(p.liabilities, age) + (t == 0 ? s.carried_liability : 0.0);
        in.rmd[k] = rmd_fraction(age, env.rmd);
    }
    in.tax = planning_tax(p, env);
    in.deposit_limit = p.deposit_limit;
    in.target_consumption = p.target_consumption;
    in.shortfall_weight = p.shortfall_weight;
    in.tightness_weight = cfg.tightness_weight;
    in.start_age = s.age;
    return in;
}

YearlyAction mpc_step(const RetireeState& s, const Profile& p, const Environment& env, const PolicyConfig& cfg) {
    if (!s.alive) throw std::logic_error("mpc_step on a deceased retiree");
    const PlanInputs in = mpc_inputs(s, p, env, cfg);
    try {
        const Plan plan = solve_plan(in, lp::default_backend(), cfg.tolerance);
        YearlyAction a;
        a.b = plan.b[0];
        a.ic = plan.ic[0];
        a.id = plan.id[0];
        a.iw = plan.iw[0];
        a.rc = plan.rc[0];
        a.rd = plan.rd[0];
        a.rw = plan.rw[0];
        a.c = plan.c;
        a.planned_tax = plan.tau[0];
        return a;
    } catch (const SolverError&) {
        if (!cfg.fallback) throw;
        YearlyAction a = benchmark_step(s, p, env, p.target_consumption);
        a.fallback = true;
        return a;
    }
}

double exact_year_tax(double b, double ic, double id, double iw, double earned, double additional, double basis_ratio,
                      const TaxSchedule& tax, double* realized_gain) {
    const double omega = ic - id + iw + earned + additional;
    const double gain = b > 0.0 ? b * (1.0 - basis_ratio) : 0.0;
    if (realized_gain) *realized_gain = gain;
    return income_tax(omega, tax) + exact_capital_gains_tax(gain, omega, tax);
}

YearRecord settle_year(RetireeState& s, const YearlyAction& a, const Realized& real, const Profile& p,
                       const Environment& env) {
    const double scale = 1e-6 * std::max(1.0, s.B + s.I + s.R);
    if (a.b > s.B + scale || a.i() > s.I + scale || a.r() > s.R + scale)
        throw std::logic_error("action withdraws more than the account holds");
    for (double v : {a.ic, a.id, a.iw, a.rc, a.rd, a.rw}) {
        if (v < -scale) throw std::logic_error("negative action component");
    }
    YearRecord rec;
    rec.age = s.age;
    rec.B = s.B;
    rec.I = s.I;
    rec.R = s.R;
    rec.action = a;
    rec.earned = stream_amount(p.earned_income, s.age);
    rec.additional = stream_amount(p.additional_income, s.age);
    rec.liability = stream_amount(p.liabilities, s.age);
    rec.carried_in = s.carried_liability;
    rec.rmd = rmd_fraction(s.age, env.rmd) * s.I;
    rec.deposit_cap = std::min(p.deposit_limit, rec.earned);

    double gain = 0.0;
    if (a.b > 0.0) {
        gain = s.basis.sell(std::min(a.b, s.B));
    } else if (a.b < 0.0) {
        s.basis.deposit(-a.b);
    }
    rec.realized_gain = gain;
    const double omega = a.ic - a.id + a.iw + rec.earned + rec.additional;
    rec.tax = income_tax(omega, env.tax) + exact_capital_gains_tax(gain, omega, env.tax);
    rec.delta = a.c + rec.tax + rec.liability + rec.carried_in -
                (a.b + a.i() + a.r() + rec.earned + rec.additional);

    auto next = [scale](double bal, double w, double rho) {
        const double left = bal - w;
        return (std::abs(left) <= scale ? std::max(left, 0.0) : left) * rho;
    };
    rec.B_next = std::max(next(s.B, a.b, real.rho_B), 0.0);
    rec.I_next = std::max(next(s.I, a.i(), real.rho_I), 0.0);
    rec.R_next = std::max(next(s.R, a.r(), real.rho_R), 0.0);
    rec.investment_gain = (rec.B_next - (s.B - a.b)) + (rec.I_next - (s.I - a.i())) + (rec.R_next - (s.R - a.r()));

    s.basis.grow(real.rho_B, real.inflation);
    // keep the nominal value tied to the real balance
    s.basis.nominal_value = rec.B_next * s.basis.price_index;
    if (rec.B_next <= 0.0) s.basis.nominal_basis = 0.0;
    s.B = rec.B_next;
    s.I = rec.I_next;
    s.R = rec.R_next;
    s.carried_liability = rec.delta;
    s.age += 1;
    return rec;
}

} // namespace rfp
