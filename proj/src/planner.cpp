#include "rfp/planner.hpp"

#include "rfp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace rfp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_length(const std::vector<double>& v, int T, const char* name) {
    if (static_cast<int>(v.size()) != T)
        throw DataError(std::string("plan inputs: ") + name + " must have one entry per year");
}

class RowBuilder {
public:
    int add(double rhs) {
        rhs_.push_back(rhs);
        return static_cast<int>(rhs_.size()) - 1;
    }
    void set(int row, int col, double v) {
        if (v != 0.0) trips_.emplace_back(row, col, v);
    }
    void finish(int ncols, lp::SparseMatrix& A, Eigen::VectorXd& b) const {
        A.resize(static_cast<Eigen::Index>(rhs_.size()), ncols);
        A.setFromTriplets(trips_.begin(), trips_.end());
        A.makeCompressed();
        b = Eigen::Map<const Eigen::VectorXd>(rhs_.data(), static_cast<Eigen::Index>(rhs_.size()));
    }

private:
    std::vector<lp::Triplet> trips_;
    std::vector<double> rhs_;
};

// Best-effort year of first trouble: liquidate everything at zero consumption and
// report the first year whose liabilities cannot be met.
int first_shortfall_year(const PlanInputs& in) {
    double B = in.B_init, I = in.I_init, R = in.R_init;
    const double zeta = capital_gains_coefficient(in.tax, in.basis_ratio);
    for (int t = 0; t < in.horizon; ++t) {
        const double income = in.earned[t] + in.additional[t];
        const double cash = B * (1.0 - zeta) + R + I + income - income_tax(I + income, in.tax);
        if (cash < in.liabilities[t]) return t + 1;
        // keep the rest in the brokerage account
        const double left = cash - in.liabilities[t];
        B = left * in.rho_B[t];
        I = 0.0;
        R = 0.0;
    }
    return 0;
}

} // namespace

void PlanInputs::validate() const {
    const int T = horizon;
    if (T < 1) throw DataError("plan inputs: horizon must be at least 1");
    if (!(B_init >= 0.0 && I_init >= 0.0 && R_init >= 0.0))
        throw DataError("plan inputs: initial balances must be nonnegative");
    if (!(basis_ratio >= 0.0)) throw DataError("plan inputs: basis ratio must be nonnegative");
    check_length(rho_B, T, "rho_B");
    check_length(rho_I, T, "rho_I");
    check_length(rho_R, T, "rho_R");
    check_length(earned, T, "earned income");
    check_length(additional, T, "additional income");
    check_length(liabilities, T, "liabilities");
    check_length(rmd, T, "rmd fractions");
    for (int t = 0; t < T; ++t) {
        if (!(rho_B[t] > 0.0 && rho_I[t] > 0.0 && rho_R[t] > 0.0))
            throw DataError("plan inputs: returns must be positive");
        if (!(rmd[t] >= 0.0 && rmd[t] <= 1.0)) throw DataError("plan inputs: RMD fraction outside [0,1]");
        if (!(earned[t] >= 0.0)) throw DataError("plan inputs: earned income must be nonnegative");
        if (!std::isfinite(additional[t]) || !std::isfinite(liabilities[t]))
            throw DataError("plan inputs: income and liabilities must be finite");
    }
    if (!(deposit_limit >= 0.0)) throw DataError("plan inputs: deposit limit must be nonnegative");
    if (!(target_consumption >= 0.0)) throw DataError("plan inputs: target consumption must be nonnegative");
    if (!(shortfall_weight > 0.0)) throw DataError("plan inputs: shortfall weight must be positive");
    if (!(tightness_weight > 0.0)) throw DataError("plan inputs: tightness weight must be positive");
    tax.validate();
}

PlanInputs PlanInputs::constant(int T, double rho_B, double rho_I, double rho_R) {
    PlanInputs in;
    in.horizon = T;
    in.rho_B.assign(T, rho_B);
    in.rho_I.assign(T, rho_I);
    in.rho_R.assign(T, rho_R);
    in.earned.assign(T, 0.0);
    in.additional.assign(T, 0.0);
    in.liabilities.assign(T, 0.0);
    in.rmd.assign(T, 0.0);
    return in;
}

BuiltLP build_lp(const PlanInputs& in) {
    in.validate();
    const int T = in.horizon;
    PlanIndex ix;
    ix.T = T;
    const int n = ix.size();
    const auto pieces = income_tax_epigraph(in.tax);
    const double zeta = capital_gains_coefficient(in.tax, in.basis_ratio);

    lp::StandardFormLP lp;
    lp.objective = Eigen::VectorXd::Zero(n);
    lp.objective[ix.q()] = 1.0;
    lp.objective[ix.s()] = -in.shortfall_weight;
    for (int t = 0; t < T; ++t) lp.objective[ix.tau(t)] = -in.tightness_weight;

    lp.lower_bounds = Eigen::VectorXd::Constant(n, -kInf);
    lp.upper_bounds = Eigen::VectorXd::Constant(n, kInf);
    for (int t = 0; t <= T; ++t) {
        lp.lower_bounds[ix.B(t)] = 0.0;
        lp.lower_bounds[ix.I(t)] = 0.0;
        lp.lower_bounds[ix.R(t)] = 0.0;
    }
    lp.lower_bounds[ix.B(0)] = lp.upper_bounds[ix.B(0)] = in.B_init;
    lp.lower_bounds[ix.I(0)] = lp.upper_bounds[ix.I(0)] = in.I_init;
    lp.lower_bounds[ix.R(0)] = lp.upper_bounds[ix.R(0)] = in.R_init;
    for (int t = 0; t < T; ++t) {
        for (int col : {ix.ic(t), ix.id(t), ix.iw(t), ix.rc(t), ix.rd(t), ix.rw(t), ix.g(t)})
            lp.lower_bounds[col] = 0.0;
    }
    lp.lower_bounds[ix.c()] = 0.0;
    lp.lower_bounds[ix.s()] = 0.0;

    RowBuilder eq, in_rows;
    for (int t = 0; t < T; ++t) {
        // B_{t+1} = (B_t - b_t) rho
        int row = eq.add(0.0);
        eq.set(row, ix.B(t + 1), 1.0);
        eq.set(row, ix.B(t), -in.rho_B[t]);
        eq.set(row, ix.b(t), in.rho_B[t]);
        row = eq.add(0.0);
        eq.set(row, ix.I(t + 1), 1.0);
        eq.set(row, ix.I(t), -in.rho_I[t]);
        eq.set(row, ix.i(t), in.rho_I[t]);
        row = eq.add(0.0);
        eq.set(row, ix.R(t + 1), 1.0);
        eq.set(row, ix.R(t), -in.rho_R[t]);
        eq.set(row, ix.r(t), in.rho_R[t]);
        // i = ic - id + iw
        row = eq.add(0.0);
        eq.set(row, ix.i(t), 1.0);
        eq.set(row, ix.ic(t), -1.0);
        eq.set(row, ix.id(t), 1.0);
        eq.set(row, ix.iw(t), -1.0);
        // r = -rc - rd + rw
        row = eq.add(0.0);
        eq.set(row, ix.r(t), 1.0);
        eq.set(row, ix.rc(t), 1.0);
        eq.set(row, ix.rd(t), 1.0);
        eq.set(row, ix.rw(t), -1.0);
        // b + i + r - c - tau = l - e - a
        row = eq.add(in.liabilities[t] - in.earned[t] - in.additional[t]);
        eq.set(row, ix.b(t), 1.0);
        eq.set(row, ix.i(t), 1.0);
        eq.set(row, ix.r(t), 1.0);
        eq.set(row, ix.c(), -1.0);
        eq.set(row, ix.tau(t), -1.0);
        // ic = rc
        row = eq.add(0.0);
        eq.set(row, ix.ic(t), 1.0);
        eq.set(row, ix.rc(t), -1.0);
    }
    {
        const int row = eq.add(0.0);
        eq.set(row, ix.q(), 1.0);
        eq.set(row, ix.B(T), -1.0);
        eq.set(row, ix.I(T), -1.0);
        eq.set(row, ix.R(T), -1.0);
    }

    for (int t = 0; t < T; ++t) {
        int row = in_rows.add(0.0);  // b <= B
        in_rows.set(row, ix.b(t), 1.0);
        in_rows.set(row, ix.B(t), -1.0);
        row = in_rows.add(0.0);
        in_rows.set(row, ix.i(t), 1.0);
        in_rows.set(row, ix.I(t), -1.0);
        row = in_rows.add(0.0);
        in_rows.set(row, ix.r(t), 1.0);
        in_rows.set(row, ix.R(t), -1.0);
        row = in_rows.add(0.0);  // kappa I <= iw
        in_rows.set(row, ix.I(t), in.rmd[t]);
        in_rows.set(row, ix.iw(t), -1.0);
        row = in_rows.add(std::min(in.deposit_limit, in.earned[t]));
        in_rows.set(row, ix.id(t), 1.0);
        in_rows.set(row, ix.rd(t), 1.0);
        // tau >= slope * omega + intercept + zeta g
        const double fixed_income = in.earned[t] + in.additional[t];
        for (const auto& p : pieces) {
            row = in_rows.add(-p.slope * fixed_income - p.intercept);
            in_rows.set(row, ix.ic(t), p.slope);
            in_rows.set(row, ix.id(t), -p.slope);
            in_rows.set(row, ix.iw(t), p.slope);
            in_rows.set(row, ix.g(t), zeta);
            in_rows.set(row, ix.tau(t), -1.0);
        }
        row = in_rows.add(0.0);  // b <= g
        in_rows.set(row, ix.b(t), 1.0);
        in_rows.set(row, ix.g(t), -1.0);
    }
    {
        const int row = in_rows.add(-in.target_consumption);  // c + s >= c_tar
        in_rows.set(row, ix.c(), -1.0);
        in_rows.set(row, ix.s(), -1.0);
    }
    eq.finish(n, lp.eq_matrix, lp.eq_rhs);
    in_rows.finish(n, lp.ineq_matrix, lp.ineq_rhs);

    lp.variable_names.resize(static_cast<std::size_t>(n));
    auto name = [&](int col, const char* base, int t) {
        lp.variable_names[static_cast<std::size_t>(col)] = std::string(base) + "_" + std::to_string(t + 1);
    };
    for (int t = 0; t <= T; ++t) {
        name(ix.B(t), "B", t);
        name(ix.I(t), "I", t);
        name(ix.R(t), "R", t);
    }
    const char* flows[] = {"b", "i", "r", "ic", "id", "iw", "rc", "rd", "rw", "tau", "g"};
    for (int k = 0; k < 11; ++k)
        for (int t = 0; t < T; ++t) name(ix.flow(k, t), flows[k], t);
    lp.variable_names[static_cast<std::size_t>(ix.c())] = "c";
    lp.variable_names[static_cast<std::size_t>(ix.q())] = "q";
    lp.variable_names[static_cast<std::size_t>(ix.s())] = "s";
    return {std::move(lp), ix};
}

Plan solve_plan(const PlanInputs& in, const lp::Backend& backend, double tolerance) {
    const BuiltLP built = build_lp(in);
    const PlanIndex& ix = built.index;
    lp::SolverOptions opts;
    opts.tolerance = tolerance;
    const lp::LPSolution sol = backend.solve(built.lp, opts);
    if (sol.status == lp::Status::infeasible) {
        const int year = first_shortfall_year(in);
        throw InfeasiblePlan("retirement plan is infeasible" +
                                 (year > 0 ? " (first shortfall in year " + std::to_string(year) + ")" : std::string()),
                             year);
    }
    if (sol.status != lp::Status::optimal)
        throw SolverError(std::string("LP solver returned ") + lp::to_string(sol.status));

    const int T = in.horizon;
    const Eigen::VectorXd& x = sol.primal;
    const double zeta = capital_gains_coefficient(in.tax, in.basis_ratio);
    Plan p;
    p.horizon = T;
    p.start_age = in.start_age;
    p.status = sol.status;
    p.solve_time = sol.solve_time;
    p.iterations = sol.iterations;
    p.B.resize(T + 1);
    p.I.resize(T + 1);
    p.R.resize(T + 1);
    for (auto* v : {&p.b, &p.i, &p.r, &p.ic, &p.id, &p.iw, &p.rc, &p.rd, &p.rw, &p.tau, &p.omega})
        v->resize(static_cast<std::size_t>(T));
    p.c = std::max(x[ix.c()], 0.0);

    // Re-derive the trajectory from the solver's decisions so that the equalities and the
    // tax definition hold to rounding error; brokerage flow absorbs the tax correction.
    p.B[0] = in.B_init;
    p.I[0] = in.I_init;
    p.R[0] = in.R_init;
    for (int t = 0; t < T; ++t) {
        const auto k = static_cast<std::size_t>(t);
        const double conv = std::max(0.5 * (x[ix.ic(t)] + x[ix.rc(t)]), 0.0);
        double id = std::max(x[ix.id(t)], 0.0), rd = std::max(x[ix.rd(t)], 0.0);
        const double dep_cap = std::min(in.deposit_limit, in.earned[k]);
        if (id + rd > dep_cap) {
            const double f = dep_cap > 0.0 ? dep_cap / (id + rd) : 0.0;
            id *= f;
            rd *= f;
        }
        double conv_net = conv;
        double iw = std::max(x[ix.iw(t)], 0.0);
        double rw = std::max(x[ix.rw(t)], 0.0);
        // Canonical form of economically identical actions: a conversion that is withdrawn
        // from the Roth in the same year is an IRA withdrawal, and same-account deposits and
        // withdrawals cancel.
        const double back = std::min(conv_net, rw);
        conv_net -= back;
        rw -= back;
        iw += back;
        const double rmd_amount = in.rmd[k] * p.I[k];
        const double i_net = std::min(id, std::max(iw - rmd_amount, 0.0));
        id -= i_net;
        iw -= i_net;
        const double r_net = std::min(rd, rw);
        rd -= r_net;
        rw -= r_net;
        iw = std::max(iw, rmd_amount);
        p.ic[k] = p.rc[k] = conv_net;
        p.id[k] = id;
        p.rd[k] = rd;
        p.iw[k] = iw;
        p.rw[k] = rw;
        p.i[k] = conv_net - id + iw;
        p.r[k] = -conv_net - rd + rw;
        p.omega[k] = conv_net - id + iw + in.earned[k] + in.additional[k];
        const double phi = income_tax(p.omega[k], in.tax);
        const double base = p.c + in.liabilities[k] + phi - p.i[k] - p.r[k] - in.earned[k] - in.additional[k];
        p.b[k] = base > 0.0 ? base / (1.0 - zeta) : base;
        p.tau[k] = phi + zeta * std::max(p.b[k], 0.0);
        p.B[k + 1] = (p.B[k] - p.b[k]) * in.rho_B[k];
        p.I[k + 1] = (p.I[k] - p.i[k]) * in.rho_I[k];
        p.R[k + 1] = (p.R[k] - p.r[k]) * in.rho_R[k];
    }
    const auto last = static_cast<std::size_t>(T);
    p.q = p.B[last] + p.I[last] + p.R[last];
    p.shortfall = std::max(in.target_consumption - p.c, 0.0);
    double tau_sum = 0.0;
    for (double v : p.tau) tau_sum += v;
    p.objective_value = p.q - in.shortfall_weight * p.shortfall - in.tightness_weight * tau_sum;
    return p;
}

double PlanViolations::max() const {
    return std::max({initial, nonnegativity, dynamics, components, caps, cash_balance, rmd, deposit, conversion,
                     tightness, bequest});
}

PlanViolations verify_plan(const PlanInputs& in, const Plan& p) {
    PlanViolations v;
    const int T = in.horizon;
    if (p.horizon != T || static_cast<int>(p.B.size()) != T + 1 || static_cast<int>(p.b.size()) != T)
        throw DataError("plan does not match the inputs' horizon");
    const double zeta = capital_gains_coefficient(in.tax, in.basis_ratio);
    auto upd = [](double& slot, double value) { slot = std::max(slot, value); };
    upd(v.initial, std::abs(p.B[0] - in.B_init));
    upd(v.initial, std::abs(p.I[0] - in.I_init));
    upd(v.initial, std::abs(p.R[0] - in.R_init));
    for (int k = 0; k <= T; ++k) {
        for (double bal : {p.B[k], p.I[k], p.R[k]}) upd(v.nonnegativity, -bal);
    }
    upd(v.nonnegativity, -p.c);
    for (int k = 0; k < T; ++k) {
        upd(v.dynamics, std::abs(p.B[k + 1] - (p.B[k] - p.b[k]) * in.rho_B[k]));
        upd(v.dynamics, std::abs(p.I[k + 1] - (p.I[k] - p.i[k]) * in.rho_I[k]));
        upd(v.dynamics, std::abs(p.R[k + 1] - (p.R[k] - p.r[k]) * in.rho_R[k]));
        upd(v.components, std::abs(p.i[k] - (p.ic[k] - p.id[k] + p.iw[k])));
        upd(v.components, std::abs(p.r[k] - (-p.rc[k] - p.rd[k] + p.rw[k])));
        for (double comp : {p.ic[k], p.id[k], p.iw[k], p.rc[k], p.rd[k], p.rw[k]}) upd(v.components, -comp);
        upd(v.caps, p.b[k] - p.B[k]);
        upd(v.caps, p.i[k] - p.I[k]);
        upd(v.caps, p.r[k] - p.R[k]);
        upd(v.cash_balance, std::abs(p.b[k] + p.i[k] + p.r[k] + in.earned[k] + in.additional[k] -
                                     (p.c + in.liabilities[k] + p.tau[k])));
        upd(v.rmd, in.rmd[k] * p.I[k] - p.iw[k]);
        upd(v.deposit, p.id[k] + p.rd[k] - std::min(in.deposit_limit, in.earned[k]));
        upd(v.conversion, std::abs(p.ic[k] - p.rc[k]));
        const double omega = p.ic[k] - p.id[k] + p.iw[k] + in.earned[k] + in.additional[k];
        const double exact = income_tax(omega, in.tax) + zeta * std::max(p.b[k], 0.0);
        upd(v.tightness, std::abs(p.tau[k] - exact) / (1.0 + std::abs(p.tau[k])));
    }
    upd(v.bequest, std::abs(p.q - (p.B[T] + p.I[T] + p.R[T])));
    return v;
}

void write_plan_csv(const Plan& p, std::ostream& out) {
    out << "year,age,B,I,R,b,ic,id,iw,rc,rd,rw,tau,c,q\n";
    out.setf(std::ios::fixed);
    const auto prec = out.precision(2);
    for (int k = 0; k <= p.horizon; ++k) {
        const auto u = static_cast<std::size_t>(k);
        out << k + 1 << ',' << p.start_age + k << ',' << p.B[u] << ',' << p.I[u] << ',' << p.R[u];
        if (k < p.horizon) {
            out << ',' << p.b[u] << ',' << p.ic[u] << ',' << p.id[u] << ',' << p.iw[u] << ',' << p.rc[u] << ','
                << p.rd[u] << ',' << p.rw[u] << ',' << p.tau[u];
        } else {
            out << ",,,,,,,,";
        }
        out << ',' << p.c << ',' << p.q << '\n';
    }
    out.unsetf(std::ios::fixed);
    out.precision(prec);
}

} // namespace rfp
