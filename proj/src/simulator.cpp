#include "rfp/simulator.hpp"

#include "rfp/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace rfp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

double stock_weight(const Profile& p, int acct) {
    switch (acct) {
    case 0: return p.stock_brokerage;
    case 1: return p.stock_ira;
    default: return p.stock_roth;
    }
}

} // namespace

std::uint64_t scenario_seed(std::uint64_t base_seed, int id) {
    return splitmix64(base_seed ^ splitmix64(static_cast<std::uint64_t>(id) + 1));
}

Scenario generate_scenario(int id, const Profile& p, const Environment& env, const ScenarioConfig& cfg) {
    const auto& models = env.models;
    Scenario sc;
    sc.id = id;
    sc.seed = scenario_seed(cfg.seed, id);
    sc.start_age = p.start_age;

    // independent streams so death does not shift the return draws
    std::mt19937_64 death_rng(splitmix64(sc.seed + 1));
    std::mt19937_64 market_rng(splitmix64(sc.seed + 2));
    std::mt19937_64 rate_rng(splitmix64(sc.seed + 3));

    sc.death_age = sample_death_year(p.start_age, env.table(p.sex), death_rng);
    const int n = sc.years();
    const auto un = static_cast<std::size_t>(n);

    const Eigen::Vector2d x0 = cfg.steady_state_start ? sample_steady_state(models.var, rate_rng) : initial_state(models);
    sc.states.reserve(un + 1);
    sc.states.push_back(x0);
    for (const auto& x : simulate_var(models.var, x0, n, rate_rng)) sc.states.push_back(x);

    sc.market.resize(un);
    sc.treasury.resize(un);
    sc.inflation.resize(un);
    for (std::size_t k = 0; k < un; ++k) {
        sc.market[k] = models.gmm.sample(market_rng);
        sc.treasury[k] = sc.states[k + 1][0];
        sc.inflation[k] = inverse_transform(sc.states[k + 1][1], models.transform);
    }

    const bool collar = cfg.collar.enabled;
    if (collar) sc.collar_sigma = cfg.collar.sigma > 0.0 ? cfg.collar.sigma : models.gmm.stddev();
    for (int a = 0; a < 3; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        const double w = stock_weight(p, a);
        sc.rho[ua].resize(un);
        if (collar) {
            sc.floor[ua].resize(un);
            sc.cap[ua].resize(un);
        }
        for (std::size_t k = 0; k < un; ++k) {
            if (!collar || w <= 0.0) {
                sc.rho[ua][k] = 1.0 + portfolio_real_return(sc.market[k], sc.treasury[k], sc.inflation[k], w);
                if (collar) {
                    sc.floor[ua][k] = -kInf;
                    sc.cap[ua][k] = kInf;
                }
                continue;
            }
            const double rf = sc.treasury[k];
            double F = cfg.collar.floor;
            if (cfg.collar.floor_from_min_return) {
                const auto fc = forecast_var(models.var, sc.states[k], {1});
                const double expected_inflation = inverse_transform(fc[0][1], models.transform);
                F = collar_floor(cfg.collar.min_return, w, rf, expected_inflation);
            }
            const double C = solve_cap(F, 1.0, rf, sc.collar_sigma);
            sc.floor[ua][k] = F;
            sc.cap[ua][k] = C;
            sc.rho[ua][k] = 1.0 + collared_return(sc.market[k], F, C, w, rf, sc.inflation[k]);
        }
    }
    return sc;
}

std::vector<Scenario> generate_scenarios(const Profile& p, const Environment& env, const ScenarioConfig& cfg) {
    if (cfg.count < 1) throw DataError("scenario count must be at least 1");
    std::vector<Scenario> out;
    out.reserve(static_cast<std::size_t>(cfg.count));
    for (int i = 0; i < cfg.count; ++i) out.push_back(generate_scenario(i, p, env, cfg));
    return out;
}

const char* policy_name(PolicyKind k) { return k == PolicyKind::mpc ? "mpc" : "benchmark"; }

double SimulationReport::conservation_error() const {
    double in = initial_wealth, out = bequest;
    for (const auto& y : years) {
        in += y.earned + y.additional + y.investment_gain;
        out += y.action.c + y.tax + y.liability;
    }
    if (!years.empty()) out += std::max(-years.back().delta, 0.0);
    return std::abs(in - out) / std::max(1.0, std::abs(in));
}

SimulationReport run_trajectory(PolicyKind policy, const Scenario& sc, const Profile& p, const Environment& env,
                                const TrajectoryOptions& opt) {
    SimulationReport rep;
    rep.scenario_id = sc.id;
    rep.policy = policy;
    RetireeState s = RetireeState::from_profile(p);
    rep.initial_wealth = s.B + s.I + s.R;
    const double target = opt.benchmark_target >= 0.0 ? opt.benchmark_target : p.target_consumption;
    const double goal = policy == PolicyKind::mpc ? p.target_consumption : target;
    const double eps = 1e-6 * std::max(1.0, rep.initial_wealth);
    rep.min_consumption = kInf;

    const int n = sc.years();
    rep.years.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        s.rates = sc.states[uk];
        const YearlyAction a =
            policy == PolicyKind::mpc ? mpc_step(s, p, env, opt.mpc) : benchmark_step(s, p, env, target);
        const Realized real{sc.rho[0][uk], sc.rho[1][uk], sc.rho[2][uk], sc.inflation[uk]};
        YearRecord rec = settle_year(s, a, real, p, env);
        if (a.fallback) ++rep.fallback_years;
        if (a.c < goal - 1e-6 * std::max(1.0, goal)) ++rep.shortfall_years;
        rep.min_consumption = std::min(rep.min_consumption, a.c);
        if (rec.B_next + rec.I_next + rec.R_next <= eps) rep.depleted = true;
        rep.years.push_back(std::move(rec));
    }
    if (rep.years.empty()) rep.min_consumption = 0.0;
    const auto& last = rep.years.back();
    rep.bequest = last.B_next + last.I_next + last.R_next - std::max(last.delta, 0.0);
    return rep;
}

std::vector<std::string> check_trajectory(const SimulationReport& r, double tol) {
    std::vector<std::string> bad;
    auto note = [&](int age, const std::string& what) {
        bad.push_back("scenario " + std::to_string(r.scenario_id) + " " + policy_name(r.policy) + " age " +
                      std::to_string(age) + ": " + what);
    };
    const double scale = std::max(1.0, r.initial_wealth);
    if (r.conservation_error() > tol) note(r.years.empty() ? 0 : r.years.back().age, "wealth not conserved");
    for (const auto& y : r.years) {
        const auto& a = y.action;
        if (y.age >= 73 && a.iw < y.rmd - tol * scale) note(y.age, "RMD not met");
        if (y.B_next < 0.0 || y.I_next < 0.0 || y.R_next < 0.0 || y.B < 0.0 || y.I < 0.0 || y.R < 0.0)
            note(y.age, "negative balance");
        if (std::abs(a.ic - a.rc) > tol * scale) note(y.age, "conversion legs differ");
        if (a.id + a.rd > y.deposit_cap + tol * scale) note(y.age, "deposit limit exceeded");
        for (double v : {a.ic, a.id, a.iw, a.rc, a.rd, a.rw})
            if (v < -tol * scale) note(y.age, "negative action component");
    }
    return bad;
}

double percentile(std::vector<double> v, double pct) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0 || v[lo] == v[hi]) return v[lo];
    if (std::isinf(v[hi])) return v[hi];
    return v[lo] + frac * (v[hi] - v[lo]);
}

PercentileSummary summarize(const std::vector<double>& values, bool finite_max) {
    PercentileSummary s;
    if (values.empty()) return s;
    s.min = *std::min_element(values.begin(), values.end());
    s.p1 = percentile(values, 1);
    s.p5 = percentile(values, 5);
    s.p50 = percentile(values, 50);
    s.p95 = percentile(values, 95);
    s.p99 = percentile(values, 99);
    s.max = -kInf;
    for (double v : values)
        if (!finite_max || std::isfinite(v)) s.max = std::max(s.max, v);
    return s;
}

EmpiricalCdf empirical_cdf(const std::vector<double>& values, int points) {
    EmpiricalCdf c;
    if (values.empty() || points < 2) return c;
    std::vector<double> v = values;
    std::sort(v.begin(), v.end());
    for (int i = 0; i < points; ++i) {
        const double q = static_cast<double>(i) / (points - 1);
        c.probability.push_back(q);
        c.value.push_back(percentile(v, 100.0 * q));
    }
    return c;
}

const char* band_field_name(BandField f) {
    switch (f) {
    case BandField::b: return "b";
    case BandField::i: return "i";
    case BandField::r: return "r";
    case BandField::conversion: return "conversion";
    case BandField::B: return "B";
    case BandField::I: return "I";
    case BandField::R: return "R";
    case BandField::tax: return "tax";
    case BandField::consumption: return "consumption";
    }
    return "";
}

namespace {

double field_value(const YearRecord& y, BandField f) {
    switch (f) {
    case BandField::b: return y.action.b;
    case BandField::i: return y.action.i();
    case BandField::r: return y.action.r();
    case BandField::conversion: return y.action.rc;
    case BandField::B: return y.B;
    case BandField::I: return y.I;
    case BandField::R: return y.R;
    case BandField::tax: return y.tax;
    case BandField::consumption: return y.action.c;
    }
    return 0.0;
}

} // namespace

AgeBands age_bands(const std::vector<SimulationReport>& reports, BandField field) {
    AgeBands out;
    int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
    for (const auto& r : reports)
        for (const auto& y : r.years) {
            lo = std::min(lo, y.age);
            hi = std::max(hi, y.age);
        }
    if (lo > hi) return out;
    std::vector<std::vector<double>> by_age(static_cast<std::size_t>(hi - lo + 1));
    for (const auto& r : reports)
        for (const auto& y : r.years) by_age[static_cast<std::size_t>(y.age - lo)].push_back(field_value(y, field));
    for (int age = lo; age <= hi; ++age) {
        auto& v = by_age[static_cast<std::size_t>(age - lo)];
        out.age.push_back(age);
        out.alive.push_back(static_cast<int>(v.size()));
        std::sort(v.begin(), v.end());
        out.p5.push_back(v.empty() ? 0.0 : percentile(v, 5));
        out.p50.push_back(v.empty() ? 0.0 : percentile(v, 50));
        out.p95.push_back(v.empty() ? 0.0 : percentile(v, 95));
    }
    return out;
}

Comparison compare(const std::vector<SimulationReport>& mpc, const std::vector<SimulationReport>& benchmark) {
    if (mpc.size() != benchmark.size()) throw std::invalid_argument("report sets differ in size");
    Comparison c;
    c.scenarios = static_cast<int>(mpc.size());
    if (mpc.empty()) return c;
    std::vector<double> uplift;
    int larger = 0, differs = 0, mpc_dep = 0, bench_dep = 0;
    for (std::size_t k = 0; k < mpc.size(); ++k) {
        const auto& m = mpc[k];
        const auto& b = benchmark[k];
        if (m.scenario_id != b.scenario_id) throw std::invalid_argument("report sets are not paired by scenario");
        double rb;
        if (b.bequest > 0.0)
            rb = m.bequest / b.bequest;
        else
            rb = m.bequest > 0.0 ? kInf : 1.0;
        if (std::isinf(rb)) ++c.unbounded_bequest;
        c.relative_bequest.push_back(rb);
        if (rb > 1.0) {
            ++larger;
            uplift.push_back(rb - 1.0);
        }
        const double rc = b.min_consumption > 0.0 ? m.min_consumption / b.min_consumption
                                                  : (m.min_consumption > 0.0 ? kInf : 1.0);
        c.relative_consumption.push_back(rc);
        if (std::abs(rc - 1.0) > 1e-3) ++differs;
        c.mean_mpc_bequest += m.bequest;
        c.mean_benchmark_bequest += b.bequest;
        mpc_dep += m.depleted ? 1 : 0;
        bench_dep += b.depleted ? 1 : 0;
    }
    const double n = static_cast<double>(mpc.size());
    c.bequest_summary = summarize(c.relative_bequest, true);
    c.consumption_summary = summarize(c.relative_consumption, true);
    c.fraction_mpc_larger = larger / n;
    c.conditional_median_uplift = uplift.empty() ? 0.0 : percentile(uplift, 50);
    c.fraction_consumption_differs = differs / n;
    c.mean_mpc_bequest /= n;
    c.mean_benchmark_bequest /= n;
    c.mpc_depleted = mpc_dep / n;
    c.benchmark_depleted = bench_dep / n;
    return c;
}

SimulationRun run_simulation(const Profile& p, const Environment& env, const RunOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    SimulationRun run;
    run.scenarios = generate_scenarios(p, env, opt.scenarios);
    const int n = static_cast<int>(run.scenarios.size());
    if (opt.run_mpc) run.mpc.resize(static_cast<std::size_t>(n));
    if (opt.run_benchmark) run.benchmark.resize(static_cast<std::size_t>(n));

    int threads = opt.threads > 0 ? opt.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, n);
    std::atomic<int> next{0}, done{0};
    std::mutex err_mutex, progress_mutex;
    std::exception_ptr error;

    auto worker = [&] {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= n) return;
            {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (error) return;
            }
            try {
                const auto uk = static_cast<std::size_t>(k);
                const Scenario& sc = run.scenarios[uk];
                if (opt.run_mpc) run.mpc[uk] = run_trajectory(PolicyKind::mpc, sc, p, env, opt.trajectory);
                if (opt.run_benchmark)
                    run.benchmark[uk] = run_trajectory(PolicyKind::benchmark, sc, p, env, opt.trajectory);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!error) error = std::current_exception();
                return;
            }
            const int d = done.fetch_add(1) + 1;
            if (opt.progress) {
                std::lock_guard<std::mutex> lock(progress_mutex);
                opt.progress(d, n);
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    if (opt.run_mpc && opt.run_benchmark) run.comparison = compare(run.mpc, run.benchmark);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

namespace {

void write_number(std::ostream& out, double v) {
    if (std::isinf(v))
        out << (v > 0 ? "inf" : "-inf");
    else
        out << v;
}

} // namespace

void write_summary_csv(const SimulationRun& run, std::ostream& out) {
    out << "scenario,seed,death_age,mpc_bequest,benchmark_bequest,relative_bequest,mpc_min_consumption,"
           "benchmark_min_consumption,relative_consumption,mpc_depleted,benchmark_depleted,mpc_fallback_years\n";
    out << std::setprecision(10);
    const bool paired = !run.mpc.empty() && !run.benchmark.empty();
    for (std::size_t k = 0; k < run.scenarios.size(); ++k) {
        const auto& sc = run.scenarios[k];
        out << sc.id << ',' << sc.seed << ',' << sc.death_age << ',';
        if (!run.mpc.empty()) out << run.mpc[k].bequest;
        out << ',';
        if (!run.benchmark.empty()) out << run.benchmark[k].bequest;
        out << ',';
        if (paired) write_number(out, run.comparison.relative_bequest[k]);
        out << ',';
        if (!run.mpc.empty()) out << run.mpc[k].min_consumption;
        out << ',';
        if (!run.benchmark.empty()) out << run.benchmark[k].min_consumption;
        out << ',';
        if (paired) write_number(out, run.comparison.relative_consumption[k]);
        out << ',';
        if (!run.mpc.empty()) out << (run.mpc[k].depleted ? 1 : 0);
        out << ',';
        if (!run.benchmark.empty()) out << (run.benchmark[k].depleted ? 1 : 0);
        out << ',';
        if (!run.mpc.empty()) out << run.mpc[k].fallback_years;
        out << '\n';
    }
}

void write_years_csv(const SimulationRun& run, std::ostream& out) {
    out << "scenario,policy,age,B,I,R,b,ic,id,iw,rc,rd,rw,c,tax,liability,delta,realized_gain,rho_B,rho_I,rho_R\n";
    out << std::fixed << std::setprecision(2);
    for (const auto* set : {&run.mpc, &run.benchmark}) {
        for (const auto& r : *set) {
            const auto& sc = run.scenarios[static_cast<std::size_t>(r.scenario_id)];
            for (std::size_t k = 0; k < r.years.size(); ++k) {
                const auto& y = r.years[k];
                const auto& a = y.action;
                out << r.scenario_id << ',' << policy_name(r.policy) << ',' << y.age << ',' << y.B << ',' << y.I << ','
                    << y.R << ',' << a.b << ',' << a.ic << ',' << a.id << ',' << a.iw << ',' << a.rc << ',' << a.rd
                    << ',' << a.rw << ',' << a.c << ',' << y.tax << ',' << y.liability << ',' << y.delta << ','
                    << y.realized_gain << std::setprecision(6) << ',' << sc.rho[0][k] << ',' << sc.rho[1][k] << ','
                    << sc.rho[2][k] << std::setprecision(2) << '\n';
            }
        }
    }
}

void write_cdf_csv(const EmpiricalCdf& cdf, std::ostream& out) {
    out << "probability,value\n" << std::setprecision(10);
    for (std::size_t k = 0; k < cdf.value.size(); ++k) {
        out << cdf.probability[k] << ',';
        write_number(out, cdf.value[k]);
        out << '\n';
    }
}

namespace {

using nlohmann::json;

json num(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

json summary_json(const PercentileSummary& s) {
    return {{"min", num(s.min)}, {"p1", num(s.p1)}, {"p5", num(s.p5)}, {"p50", num(s.p50)},
            {"p95", num(s.p95)}, {"p99", num(s.p99)}, {"max", num(s.max)}};
}

json cdf_json(const EmpiricalCdf& c) {
    json v = json::array();
    for (double x : c.value) v.push_back(num(x));
    return {{"probability", c.probability}, {"value", v}};
}

json bands_json(const std::vector<SimulationReport>& reports) {
    json out = json::object();
    bool ages_done = false;
    for (auto f : {BandField::b, BandField::i, BandField::r, BandField::conversion, BandField::B, BandField::I,
                   BandField::R, BandField::tax, BandField::consumption}) {
        const auto b = age_bands(reports, f);
        if (!ages_done) {
            out["age"] = b.age;
            out["alive"] = b.alive;
            ages_done = true;
        }
        out[band_field_name(f)] = {{"p5", b.p5}, {"p50", b.p50}, {"p95", b.p95}};
    }
    return out;
}

std::vector<double> bequests(const std::vector<SimulationReport>& r) {
    std::vector<double> v;
    v.reserve(r.size());
    for (const auto& x : r) v.push_back(x.bequest);
    return v;
}

} // namespace

std::string metrics_json(const SimulationRun& run, int indent) {
    json doc;
    doc["scenarios"] = run.scenarios.size();
    if (!run.mpc.empty() && !run.benchmark.empty()) {
        const auto& c = run.comparison;
        doc["relative_bequest"] = summary_json(c.bequest_summary);
        doc["relative_consumption"] = summary_json(c.consumption_summary);
        doc["fraction_mpc_larger"] = c.fraction_mpc_larger;
        doc["conditional_median_uplift"] = c.conditional_median_uplift;
        doc["fraction_consumption_differs"] = c.fraction_consumption_differs;
        doc["unbounded_relative_bequest"] = c.unbounded_bequest;
        doc["mean_bequest"] = {{"mpc", c.mean_mpc_bequest}, {"benchmark", c.mean_benchmark_bequest}};
        doc["depleted_fraction"] = {{"mpc", c.mpc_depleted}, {"benchmark", c.benchmark_depleted}};
        doc["cdf"]["relative_bequest"] = cdf_json(empirical_cdf(c.relative_bequest));
        doc["cdf"]["relative_consumption"] = cdf_json(empirical_cdf(c.relative_consumption));
    }
    if (!run.mpc.empty()) {
        doc["cdf"]["mpc_bequest"] = cdf_json(empirical_cdf(bequests(run.mpc)));
        doc["bands"]["mpc"] = bands_json(run.mpc);
    }
    if (!run.benchmark.empty()) {
        doc["cdf"]["benchmark_bequest"] = cdf_json(empirical_cdf(bequests(run.benchmark)));
        doc["bands"]["benchmark"] = bands_json(run.benchmark);
    }
    return doc.dump(indent);
}

} // namespace rfp
