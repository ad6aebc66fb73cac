// Acceptance suite: one PASS/FAIL line per criterion, exit 1 when any fails.
#include "rfp/collar.hpp"
#include "rfp/errors.hpp"
#include "rfp/planner.hpp"
#include "rfp/policy.hpp"
#include "rfp/profile.hpp"
#include "rfp/simulator.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace rfp;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double corr_of(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        sab += (a[k] - ma) * (b[k] - mb);
        saa += (a[k] - ma) * (a[k] - ma);
        sbb += (b[k] - mb) * (b[k] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

bool within(double x, double centre, double tol) { return std::abs(x - centre) <= tol; }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Options {
    int count = 1000;
    std::uint64_t seed = 1;
    int threads = 0;
    std::filesystem::path out;
};

struct Context : Options {
    Environment env;
    Profile upper, lower;

    Context(const Options& o, Environment e, Profile u, Profile l)
        : Options(o), env(std::move(e)), upper(std::move(u)), lower(std::move(l)) {}
    // filled lazily and shared across criteria
    std::map<std::string, SimulationRun> runs;

    const SimulationRun& run(const std::string& key) {
        if (auto it = runs.find(key); it != runs.end()) return it->second;
        RunOptions opt;
        opt.scenarios.count = count;
        opt.scenarios.seed = seed;
        opt.threads = threads;
        const Profile& p = key.rfind("upper", 0) == 0 ? upper : lower;
        if (key == "upper_collar") {
            opt.scenarios.collar.enabled = true;
            opt.run_benchmark = false;
        }
        std::fprintf(stderr, "running %s (%d scenarios)\n", key.c_str(), count);
        auto& r = runs[key] = run_simulation(p, env, opt);
        if (!out.empty()) {
            std::filesystem::create_directories(out);
            std::ofstream(out / (key + "_metrics.json")) << metrics_json(r);
            std::ofstream summary(out / (key + "_summary.csv"));
            write_summary_csv(r, summary);
        }
        return r;
    }
};

Outcome p1(Context& ctx) {
    PolicyConfig cfg;
    cfg.frozen_terminal_age = ctx.upper.start_age + 44;
    const auto state = RetireeState::from_profile(ctx.upper);
    const PlanInputs in = mpc_inputs(state, ctx.upper, ctx.env, cfg);
    const BuiltLP built = build_lp(in);
    const int T = in.horizon;
    const int vars = built.lp.num_variables();
    const int eqs = static_cast<int>(built.lp.eq_matrix.rows());
    const int raw_ineqs = static_cast<int>(built.lp.ineq_matrix.rows());
    // per year: three caps, RMD, deposit, one convex tax constraint, three balance signs;
    // plus terminal balance signs and the shortfall bound
    const int ineqs = 9 * T + 3 + 1;

    double worst = 0.0;
    for (int k = 0; k < 5; ++k) {
        const Plan plan = solve_plan(in);
        worst = std::max(worst, plan.solve_time);
    }
    auto near = [](int n, double target) { return std::abs(n - target) <= 0.15 * target; };
    Outcome o;
    o.pass = T == 45 && near(vars, 600) && near(eqs, 300) && near(ineqs, 400) && worst < 0.5;
    o.detail = fmt("T=%d vars=%d eqs=%d ineqs=%d (raw rows %d), slowest solve %.3fs", T, vars, eqs, ineqs,
                   raw_ineqs, worst);
    return o;
}

Outcome p2(Context& ctx) {
    std::mt19937_64 rng(ctx.seed + 2);
    std::uniform_real_distribution<double> bal(0.0, 2e6), inc(0.0, 80000.0), ret(0.97, 1.09), U(0.0, 1.0);
    const TaxSchedule tax = planning_tax(ctx.upper, ctx.env);
    int solved = 0, tight = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int T = 1 + static_cast<int>(U(rng) * 45);
        PlanInputs in = PlanInputs::constant(T, 1.0, 1.0, 1.0);
        in.tax = tax;
        in.B_init = bal(rng);
        in.I_init = bal(rng);
        in.R_init = bal(rng);
        in.basis_ratio = U(rng);
        in.deposit_limit = 8000.0;
        in.target_consumption = 15000.0 + inc(rng);
        const int age = 60 + static_cast<int>(U(rng) * 16);
        in.start_age = age;
        for (int t = 0; t < T; ++t) {
            const auto k = static_cast<std::size_t>(t);
            in.rho_B[k] = ret(rng);
            in.rho_I[k] = ret(rng);
            in.rho_R[k] = ret(rng);
            in.additional[k] = U(rng) < 0.6 ? inc(rng) : 0.0;
            in.earned[k] = U(rng) < 0.2 ? inc(rng) : 0.0;
            in.liabilities[k] = U(rng) < 0.1 ? 0.3 * inc(rng) : 0.0;
            in.rmd[k] = rmd_fraction(age + t, ctx.env.rmd);
        }
        try {
            const Plan plan = solve_plan(in);
            ++solved;
            const double t = verify_plan(in, plan).tightness;
            worst = std::max(worst, t);
            if (t <= 1e-6) ++tight;
        } catch (const InfeasiblePlan&) {
            // liabilities can exceed the balances; those draws are not feasible instances
        }
    }
    Outcome o;
    o.pass = solved >= 900 && tight == solved;
    o.detail = fmt("%d/%d feasible instances tight, worst relative gap %.2e", tight, solved, worst);
    return o;
}

Outcome p3(Context& ctx) {
    const auto r = sample_market_returns(ctx.env.models.gmm, 100000, ctx.seed + 3);
    const double m = mean_of(r), s = std_of(r);
    Outcome o;
    o.pass = within(m, 0.117, 0.005) && within(s, 0.204, 0.010);
    o.detail = fmt("mean %.2f%% (11.7 +- 0.5), std %.2f%% (20.4 +- 1.0)", 100 * m, 100 * s);
    return o;
}

// 1962 initial values plus 61 simulated years per path.
struct RateSample {
    std::vector<double> treasury, inflation;
};

RateSample rates_1962_2023(const MarketModels& models, std::mt19937_64& rng, int paths) {
    RateSample s;
    for (int p = 0; p < paths; ++p) {
        s.treasury.push_back(models.initial_treasury);
        s.inflation.push_back(models.initial_inflation);
        const auto r = simulate_rates(models, initial_state(models), 61, rng);
        s.treasury.insert(s.treasury.end(), r.treasury.begin(), r.treasury.end());
        s.inflation.insert(s.inflation.end(), r.inflation.begin(), r.inflation.end());
    }
    return s;
}

Outcome p4(Context& ctx) {
    std::mt19937_64 rng(ctx.seed + 4);
    const auto s = rates_1962_2023(ctx.env.models, rng, 1000);
    const double tm = mean_of(s.treasury), tv = std_of(s.treasury), im = mean_of(s.inflation);
    const double c = corr_of(s.treasury, s.inflation);
    Outcome o;
    o.pass = within(tm, 0.053, 0.005) && within(tv, 0.028, 0.005) && within(im, 0.035, 0.005) && within(c, 0.70, 0.10);
    o.detail = fmt("treasury mean %.2f%% vol %.2f%%, inflation mean %.2f%%, correlation %.3f", 100 * tm, 100 * tv,
                   100 * im, c);
    return o;
}

Outcome p5(Context& ctx) {
    const auto& models = ctx.env.models;
    std::mt19937_64 rng(ctx.seed + 5);
    std::vector<double> p20, p60;
    for (int p = 0; p < 1000; ++p) {
        const auto r = simulate_rates(models, initial_state(models), 62, rng);
        for (int t = 0; t < 62; ++t) {
            const double mk = models.gmm.sample(rng);
            p20.push_back(portfolio_real_return(mk, r.treasury[t], r.inflation[t], 0.2));
            p60.push_back(portfolio_real_return(mk, r.treasury[t], r.inflation[t], 0.6));
        }
    }
    const double m20 = mean_of(p20), s20 = std_of(p20), m60 = mean_of(p60), s60 = std_of(p60);
    Outcome o;
    o.pass = within(m20, 0.031, 0.005) && within(s20, 0.044, 0.010) && within(m60, 0.057, 0.010) &&
             within(s60, 0.121, 0.020);
    o.detail = fmt("20/80 mean %.2f%% vol %.2f%%, 60/40 mean %.2f%% vol %.2f%%", 100 * m20, 100 * s20, 100 * m60,
                   100 * s60);
    return o;
}

Outcome p6(Context& ctx) {
    const auto& r = ctx.run("upper");
    const auto& c = r.comparison;
    const double med = c.bequest_summary.p50;
    Outcome o;
    o.pass = med >= 1.01 && med <= 1.11 && c.fraction_mpc_larger >= 0.60 && c.fraction_mpc_larger <= 0.76 &&
             c.conditional_median_uplift >= 0.07 && c.conditional_median_uplift <= 0.17 &&
             c.fraction_consumption_differs <= 0.05 && r.seconds < 600.0;
    o.detail = fmt("median %.3f, MPC larger %.3f, uplift %.3f, consumption differs %.3f, tails min %.2f p99 %.2f, "
                   "%.0fs",
                   med, c.fraction_mpc_larger, c.conditional_median_uplift, c.fraction_consumption_differs,
                   c.bequest_summary.min, c.bequest_summary.p99, r.seconds);
    return o;
}

Outcome p7(Context& ctx) {
    const auto& c = ctx.run("lower").comparison;
    const double med = c.bequest_summary.p50;
    const double same = 1.0 - c.fraction_consumption_differs;
    Outcome o;
    o.pass = med >= 1.01 && med <= 1.11 && c.fraction_mpc_larger >= 0.60 && c.fraction_mpc_larger <= 0.76 &&
             same >= 0.97;
    o.detail = fmt("median %.3f, MPC larger %.3f, consumption equal %.3f", med, c.fraction_mpc_larger, same);
    return o;
}

Outcome p8(Context& ctx) {
    const auto& r = ctx.run("upper");
    const AgeBands conv = age_bands(r.mpc, BandField::conversion);
    const AgeBands tax_m = age_bands(r.mpc, BandField::tax);
    const AgeBands tax_b = age_bands(r.benchmark, BandField::tax);
    const int min_alive = std::max(1, ctx.count / 10);
    bool early_conv = true, late_conv = true, early_tax = true, late_tax = true;
    double max_late = 0.0;
    int last_positive = 0;
    for (std::size_t k = 0; k < conv.age.size(); ++k) {
        const int age = conv.age[k];
        if (conv.alive[k] < min_alive) continue;
        if (age < 70) {
            early_conv = early_conv && conv.p50[k] > 1.0;
            early_tax = early_tax && tax_m.p50[k] > tax_b.p50[k];
        } else if (age > 72) {
            late_conv = late_conv && conv.p50[k] <= 1.0;
            max_late = std::max(max_late, conv.p50[k]);
        }
        if (conv.p50[k] > 1.0) last_positive = age;
        if (age > 70) late_tax = late_tax && tax_m.p50[k] < tax_b.p50[k];
    }
    Outcome o;
    o.pass = early_conv && late_conv && early_tax && late_tax;
    o.detail = fmt("median conversion positive before 70: %s (last positive age %d), largest after 72 $%.0f; MPC "
                   "tax above benchmark before 70: %s, below after 70: %s",
                   early_conv ? "yes" : "no", last_positive, max_late, early_tax ? "yes" : "no", late_tax ? "yes" : "no");
    return o;
}

Outcome p9(Context& ctx) {
    // self-financing legs on every collared scenario-year
    ScenarioConfig sc;
    sc.count = ctx.count;
    sc.seed = ctx.seed;
    sc.collar.enabled = true;
    const auto scenarios = generate_scenarios(ctx.upper, ctx.env, sc);
    double worst_legs = 0.0;
    for (const auto& s : scenarios)
        for (int a = 0; a < 3; ++a)
            for (std::size_t k = 0; k < s.floor[a].size(); ++k) {
                if (!std::isfinite(s.floor[a][k])) continue;
                const double put = black_scholes_price(OptionKind::put, 1.0, 1.0 + s.floor[a][k], s.treasury[k],
                                                       s.collar_sigma);
                const double call = std::isfinite(s.cap[a][k])
                                        ? black_scholes_price(OptionKind::call, 1.0, 1.0 + s.cap[a][k], s.treasury[k],
                                                              s.collar_sigma)
                                        : 0.0;
                worst_legs = std::max(worst_legs, std::abs(put - call));
            }

    // collared 60/40 real return with the default floor
    const auto& models = ctx.env.models;
    const CollarConfig cc;
    const double sigma = cc.sigma > 0.0 ? cc.sigma : models.gmm.stddev();
    std::mt19937_64 rng(ctx.seed + 9);
    std::vector<double> collared;
    for (int p = 0; p < 1000; ++p) {
        const auto r = simulate_rates(models, initial_state(models), 62, rng);
        for (int t = 0; t < 62; ++t) {
            const double mk = models.gmm.sample(rng);
            const double cap = solve_cap(cc.floor, 1.0, r.treasury[t], sigma);
            collared.push_back(collared_return(mk, cc.floor, cap, 0.6, r.treasury[t], r.inflation[t]));
        }
    }
    const double m60 = mean_of(collared);

    // narrower bequest range under the MPC policy
    auto range = [](const std::vector<SimulationReport>& reps) {
        std::vector<double> b;
        for (const auto& r : reps) b.push_back(r.bequest);
        return percentile(b, 95) - percentile(b, 5);
    };
    const double plain = range(ctx.run("upper").mpc);
    const double hedged = range(ctx.run("upper_collar").mpc);

    Outcome o;
    o.pass = worst_legs <= 1e-8 && within(m60, 0.054, 0.005) && hedged < plain;
    o.detail = fmt("worst leg gap %.1e, collared 60/40 mean %.2f%% (5.4 +- 0.5), bequest 5-95%% range $%.0f "
                   "collared vs $%.0f uncollared",
                   worst_legs, 100 * m60, hedged, plain);
    return o;
}

Outcome p10(Context& ctx) {
    std::size_t trajectories = 0, violations = 0;
    std::string first;
    for (const char* key : {"upper", "lower", "upper_collar"}) {
        const auto& r = ctx.run(key);
        for (const auto* set : {&r.mpc, &r.benchmark})
            for (const auto& rep : *set) {
                ++trajectories;
                const auto bad = check_trajectory(rep);
                violations += bad.size();
                if (!bad.empty() && first.empty()) first = bad.front();
            }
    }
    Outcome o;
    o.pass = violations == 0 && trajectories > 0;
    o.detail = fmt("%zu trajectories, %zu violations%s%s", trajectories, violations, first.empty() ? "" : "; first: ",
                   first.c_str());
    return o;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks for the retirement funding planner"};
    std::string data_dir = default_data_dir().string();
    std::string only;
    Options opt;
    std::string out;
    app.add_option("--data-dir", data_dir, "Data directory");
    app.add_option("-n,--count", opt.count, "Scenarios per simulation run")->check(CLI::PositiveNumber);
    app.add_option("-s,--seed", opt.seed, "Base seed");
    app.add_option("-j,--threads", opt.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--only", only, "Comma-separated criteria, e.g. P1,P6");
    app.add_option("-o,--out", out, "Write run metrics here");
    CLI11_PARSE(app, argc, argv);
    opt.out = out;

    std::unique_ptr<Context> holder;
    try {
        const std::filesystem::path dir(data_dir);
        holder = std::make_unique<Context>(opt, load_environment(dir), load_profile(dir / "profiles" / "upper.json"),
                                           load_profile(dir / "profiles" / "lower.json"));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    Context& ctx = *holder;

    std::set<std::string> selected;
    for (std::size_t start = 0; start < only.size();) {
        const auto end = std::min(only.find(',', start), only.size());
        selected.insert(only.substr(start, end - start));
        start = end + 1;
    }

    const std::vector<std::pair<std::string, Outcome (*)(Context&)>> criteria = {
        {"P1", p1}, {"P2", p2}, {"P3", p3}, {"P4", p4}, {"P5", p5},
        {"P6", p6}, {"P7", p7}, {"P8", p8}, {"P9", p9}, {"P10", p10}};
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        if (!selected.empty() && !selected.count(name)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%-4s %s  %s  [%.1fs]\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
