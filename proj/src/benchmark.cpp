#include "rfp/policy.hpp"

#include <algorithm>
#include <cmath>

namespace rfp {

double benchmark_target(double B, double I, double R, const std::vector<IncomeStream>& additional, int start_age,
                        const BenchmarkConfig& cfg) {
    double projected = 0.0;
    for (int age = start_age; age <= cfg.projection_age; ++age) projected += stream_amount(additional, age);
    return cfg.withdrawal_rate * (B + I + R + projected);
}

namespace {

struct Split {
    double b = 0.0, iw = 0.0, r = 0.0;
};

// RMD first; the rest in proportion to balances so the accounts deplete together.
Split split_withdrawal(double W, double B, double I, double R, double rmd) {
    const double total = B + I + R;
    Split s;
    if (total <= 0.0) return s;
    W = std::clamp(W, 0.0, total);
    const double prop_i = W * I / total;
    if (prop_i >= rmd) {
        s.b = W * B / total;
        s.iw = prop_i;
        s.r = W * R / total;
        return s;
    }
    s.iw = std::min(rmd, W);
    const double rest = W - s.iw;
    const double br = B + R;
    if (br > 0.0) {
        s.b = std::min(rest * B / br, B);
        s.r = std::min(rest * R / br, R);
    }
    // accounts B and R ran dry: take the remainder from the IRA
    s.iw = std::min(I, W - s.b - s.r);
    return s;
}

} // namespace

YearlyAction benchmark_step(const RetireeState& st, const Profile& p, const Environment& env, double target) {
    const double e = stream_amount(p.earned_income, st.age);
    const double a = stream_amount(p.additional_income, st.age);
    const double l = stream_amount(p.liabilities, st.age) + st.carried_liability;
    const double B = std::max(st.B, 0.0), I = std::max(st.I, 0.0), R = std::max(st.R, 0.0);
    const double rmd = std::min(rmd_fraction(st.age, env.rmd) * I, I);
    const double delta0 = st.basis.ratio();
    const double need = target + l;

    auto cash = [&](const Split& s) {
        return s.b + s.iw + s.r + e + a - exact_year_tax(s.b, 0.0, 0.0, s.iw, e, a, delta0, env.tax);
    };
    auto act = [&](const Split& s, double c, int steps) {
        YearlyAction y;
        y.b = s.b;
        y.iw = s.iw;
        y.rw = s.r;
        y.c = c;
        y.planned_tax = exact_year_tax(s.b, 0.0, 0.0, s.iw, e, a, delta0, env.tax);
        y.search_steps = steps;
        return y;
    };

    const double total = B + I + R;
    const Split at_rmd = split_withdrawal(rmd, B, I, R, rmd);
    const double cash_rmd = cash(at_rmd);
    if (cash_rmd >= need) {
        // surplus beyond spending goes to the brokerage account
        Split s = at_rmd;
        s.b -= cash_rmd - need;
        return act(s, target, 0);
    }
    const Split all = split_withdrawal(total, B, I, R, rmd);
    const double cash_all = cash(all);
    if (cash_all <= need) {
        // depletion: everything out, consume what is left after liabilities, capped at target
        return act(all, std::clamp(cash_all - l, 0.0, target), 0);
    }
    // Start from the untaxed amount, then bisect on [lo, hi] with cash(lo) < need <= cash(hi).
    double lo = rmd, hi = total;
    const double guess = std::clamp(need - e - a, rmd, total);
    int steps = 1;
    const double cg = cash(split_withdrawal(guess, B, I, R, rmd));
    const double slack = 1e-9 * std::max(1.0, need);  // rounding in the proportional split
    if (cg >= need - slack && cg - need <= 1.0) return act(split_withdrawal(guess, B, I, R, rmd), target, steps);
    if (cg < need) lo = guess;
    else hi = guess;
    while (steps < 60) {
        ++steps;
        const double mid = 0.5 * (lo + hi);
        const double cm = cash(split_withdrawal(mid, B, I, R, rmd));
        if (cm >= need) {
            hi = mid;
            if (cm - need <= 1.0) break;
        } else {
            lo = mid;
        }
    }
    return act(split_withdrawal(hi, B, I, R, rmd), target, steps);
}

} // namespace rfp
