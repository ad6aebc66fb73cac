#include "rfp/requests.hpp"

#include "rfp/errors.hpp"
#include "rfp/planner.hpp"
#include "rfp/policy.hpp"
#include "rfp/simulator.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace rfp {

using nlohmann::json;

namespace {

class Fields {
public:
    explicit Fields(const json& doc) : doc_(doc) {
        if (!doc_.is_object()) errors_.emplace_back("$", "request must be an object");
    }

    bool has(const char* key) const { return doc_.is_object() && doc_.contains(key) && !doc_.at(key).is_null(); }
    const json& at(const char* key) const { return doc_.at(key); }

    double number(const json& obj, const std::string& path, const char* key, double fallback, double lo, double hi) {
        if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
        const auto& v = obj.at(key);
        if (!v.is_number()) {
            errors_.emplace_back(path + key, "must be a number");
            return fallback;
        }
        const double x = v.get<double>();
        if (!(x >= lo && x <= hi)) {
            std::ostringstream msg;
            msg << "must lie in [" << lo << ", " << hi << "]";
            errors_.emplace_back(path + key, msg.str());
            return fallback;
        }
        return x;
    }

    long long integer(const json& obj, const std::string& path, const char* key, long long fallback, long long lo,
                      long long hi) {
        if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
        const auto& v = obj.at(key);
        if (!v.is_number_integer() && !(v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())) {
            errors_.emplace_back(path + key, "must be an integer");
            return fallback;
        }
        const auto x = v.is_number_unsigned() ? static_cast<long long>(std::min<std::uint64_t>(
                                                    v.get<std::uint64_t>(), std::numeric_limits<long long>::max()))
                                              : v.get<long long>();
        if (x < lo || x > hi) {
            errors_.emplace_back(path + key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
            return fallback;
        }
        return x;
    }

    bool boolean(const json& obj, const std::string& path, const char* key, bool fallback) {
        if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
        if (!obj.at(key).is_boolean()) {
            errors_.emplace_back(path + key, "must be true or false");
            return fallback;
        }
        return obj.at(key).get<bool>();
    }

    std::string text(const json& obj, const std::string& path, const char* key, const std::string& fallback) {
        if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
        if (!obj.at(key).is_string()) {
            errors_.emplace_back(path + key, "must be a string");
            return fallback;
        }
        return obj.at(key).get<std::string>();
    }

    const json& object(const char* key) {
        static const json empty = json::object();
        if (!has(key)) return empty;
        if (!doc_.at(key).is_object()) {
            errors_.emplace_back(key, "must be an object");
            return empty;
        }
        return doc_.at(key);
    }

    void add(const std::string& path, const std::string& msg) { errors_.emplace_back(path, msg); }
    void merge(const std::string& prefix, const ValidationError::FieldErrors& f) {
        for (const auto& [p, m] : f) errors_.emplace_back(p == "$" ? prefix : prefix + "." + p, m);
    }
    void raise() const {
        if (!errors_.empty()) throw ValidationError(errors_);
    }
    const json& doc() const { return doc_; }

private:
    const json& doc_;
    ValidationError::FieldErrors errors_;
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Profile read_profile(Fields& f, const RequestLimits& limits) {
    if (!f.has("profile")) {
        f.add("profile", "is required");
        return {};
    }
    const auto& node = f.at("profile");
    try {
        if (node.is_string()) {
            if (!limits.allow_files) {
                f.add("profile", "must be an object");
                return {};
            }
            return parse_profile(read_file(node.get<std::string>()));
        }
        if (!node.is_object()) {
            f.add("profile", "must be an object");
            return {};
        }
        return parse_profile(node.dump());
    } catch (const ValidationError& e) {
        f.merge("profile", e.fields());
    } catch (const DataError& e) {
        f.add("profile", e.what());
    }
    return {};
}

PolicyConfig read_policy(Fields& f, int start_age) {
    PolicyConfig cfg;
    const json& p = f.object("policy");
    const std::string base = "policy.";
    const std::string mode = f.text(p, base, "forecast", "fixed");
    if (mode == "var")
        cfg.forecast.mode = ForecastConfig::Mode::var;
    else if (mode != "fixed")
        f.add(base + "forecast", "must be \"fixed\" or \"var\"");
    cfg.forecast.rho_B = f.number(p, base, "rho_B", cfg.forecast.rho_B, 0.5, 2.0);
    cfg.forecast.rho_I = f.number(p, base, "rho_I", cfg.forecast.rho_I, 0.5, 2.0);
    cfg.forecast.rho_R = f.number(p, base, "rho_R", cfg.forecast.rho_R, 0.5, 2.0);
    cfg.horizon_factor = f.number(p, base, "horizon_factor", cfg.horizon_factor, 0.1, 10.0);
    cfg.max_age = static_cast<int>(f.integer(p, base, "max_age", cfg.max_age, start_age, 150));
    cfg.frozen_terminal_age = static_cast<int>(f.integer(p, base, "terminal_age", 0, 0, 150));
    if (cfg.frozen_terminal_age > 0 && cfg.frozen_terminal_age < start_age)
        f.add(base + "terminal_age", "must not precede the start age");
    cfg.fallback = f.boolean(p, base, "fallback", cfg.fallback);
    return cfg;
}

json policy_json(const PolicyConfig& c) {
    json j = {{"forecast", c.forecast.mode == ForecastConfig::Mode::var ? "var" : "fixed"},
              {"rho_B", c.forecast.rho_B},
              {"rho_I", c.forecast.rho_I},
              {"rho_R", c.forecast.rho_R},
              {"horizon_factor", c.horizon_factor},
              {"max_age", c.max_age},
              {"fallback", c.fallback}};
    if (c.frozen_terminal_age > 0) j["terminal_age"] = c.frozen_terminal_age;
    return j;
}

std::filesystem::path output_dir(Fields& f, const RequestLimits& limits) {
    if (!f.has("output_dir")) return {};
    if (!limits.allow_files) {
        f.add("output_dir", "is not accepted here");
        return {};
    }
    return f.text(f.doc(), "", "output_dir", "");
}

void write_text(const std::filesystem::path& dir, const std::string& name, const std::string& body, json& files) {
    std::filesystem::create_directories(dir);
    const auto path = dir / name;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << body;
    if (!out) throw DataError("cannot write " + path.string());
    files.push_back(path.string());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

json handle_plan(const Environment& env, const json& request, const RequestLimits& limits) {
    const auto t0 = std::chrono::steady_clock::now();
    Fields f(request);
    const Profile profile = read_profile(f, limits);
    const PolicyConfig policy = read_policy(f, profile.start_age);
    const auto dir = output_dir(f, limits);
    f.raise();

    const RetireeState state = RetireeState::from_profile(profile);
    const PlanInputs in = mpc_inputs(state, profile, env, policy);
    const Plan plan = solve_plan(in, lp::default_backend(), policy.tolerance);
    const auto v = verify_plan(in, plan);

    json years = json::object();
    std::vector<int> year, age;
    for (int t = 0; t <= plan.horizon; ++t) {
        year.push_back(t + 1);
        age.push_back(plan.start_age + t);
    }
    years["year"] = year;
    years["age"] = age;
    years["B"] = plan.B;
    years["I"] = plan.I;
    years["R"] = plan.R;
    years["b"] = plan.b;
    years["i"] = plan.i;
    years["r"] = plan.r;
    years["ic"] = plan.ic;
    years["id"] = plan.id;
    years["iw"] = plan.iw;
    years["rc"] = plan.rc;
    years["rd"] = plan.rd;
    years["rw"] = plan.rw;
    years["tau"] = plan.tau;

    json out;
    out["status"] = lp::to_string(plan.status);
    out["c"] = plan.c;
    out["q"] = plan.q;
    out["shortfall"] = plan.shortfall;
    out["objective"] = plan.objective_value;
    out["tightness"] = v.tightness;
    out["max_violation"] = v.max();
    out["horizon"] = plan.horizon;
    out["start_age"] = plan.start_age;
    out["iterations"] = plan.iterations;
    out["benchmark_target"] = benchmark_target(profile.brokerage, profile.ira, profile.roth,
                                               profile.additional_income, profile.start_age);
    out["years"] = years;
    out["config"] = {{"profile", json::parse(profile_to_json(profile))}, {"policy", policy_json(policy)}};
    json files = json::array();
    if (!dir.empty()) {
        std::ostringstream csv;
        write_plan_csv(plan, csv);
        write_text(dir, "plan.csv", csv.str(), files);
        json doc = out;
        doc.erase("config");
        write_text(dir, "plan.json", doc.dump(2) + "\n", files);
    }
    out["files"] = files;
    out["timing"] = {{"solve_seconds", plan.solve_time}, {"total_seconds", seconds_since(t0)}};
    return out;
}

json handle_simulate(const Environment& env, const json& request, const RequestLimits& limits) {
    const auto t0 = std::chrono::steady_clock::now();
    Fields f(request);
    const Profile profile = read_profile(f, limits);
    RunOptions opt;
    opt.trajectory.mpc = read_policy(f, profile.start_age);
    const json& root = f.doc();
    const long long cap = limits.max_scenarios > 0 ? limits.max_scenarios : 1000000;
    opt.scenarios.count = static_cast<int>(f.integer(root, "", "count", 1000, 1, cap));
    opt.scenarios.seed = static_cast<std::uint64_t>(
        f.integer(root, "", "seed", 1, 0, std::numeric_limits<long long>::max()));
    opt.scenarios.steady_state_start = f.boolean(root, "", "steady_state_start", true);
    opt.threads = static_cast<int>(f.integer(root, "", "threads", limits.threads, 0, 256));
    opt.trajectory.benchmark_target = f.number(root, "", "benchmark_target", -1.0, 0.0, 1e9);
    const std::string which = f.text(root, "", "policies", "both");
    if (which == "mpc")
        opt.run_benchmark = false;
    else if (which == "benchmark")
        opt.run_mpc = false;
    else if (which != "both")
        f.add("policies", "must be \"both\", \"mpc\" or \"benchmark\"");
    const json& collar = f.object("collar");
    auto& cc = opt.scenarios.collar;
    cc.enabled = f.boolean(collar, "collar.", "enabled", false);
    cc.floor = f.number(collar, "collar.", "floor", cc.floor, -1.0, 1.0);
    cc.floor_from_min_return = f.boolean(collar, "collar.", "floor_from_min_return", false);
    cc.min_return = f.number(collar, "collar.", "min_return", cc.min_return, -1.0, 1.0);
    cc.sigma = f.number(collar, "collar.", "sigma", 0.0, 0.0, 5.0);
    const bool write_years = f.boolean(root, "", "write_years", false);
    const auto dir = output_dir(f, limits);
    f.raise();

    const SimulationRun run = run_simulation(profile, env, opt);
    json out = json::parse(metrics_json(run, -1));

    int bad = 0;
    json examples = json::array();
    for (const auto* set : {&run.mpc, &run.benchmark}) {
        for (const auto& r : *set) {
            const auto issues = check_trajectory(r);
            if (issues.empty()) continue;
            ++bad;
            if (examples.size() < 5) examples.push_back(issues.front());
        }
    }
    out["trajectory_violations"] = {{"count", bad}, {"examples", examples}};
    if (!run.mpc.empty()) {
        int fb = 0;
        for (const auto& r : run.mpc) fb += r.fallback_years;
        out["mpc_fallback_years"] = fb;
    }
    out["benchmark_target"] = benchmark_target(profile.brokerage, profile.ira, profile.roth,
                                               profile.additional_income, profile.start_age);
    out["config"] = {{"profile", json::parse(profile_to_json(profile))},
                     {"policy", policy_json(opt.trajectory.mpc)},
                     {"count", opt.scenarios.count},
                     {"seed", opt.scenarios.seed},
                     {"steady_state_start", opt.scenarios.steady_state_start},
                     {"policies", which},
                     {"benchmark_target", opt.trajectory.benchmark_target >= 0.0
                                              ? opt.trajectory.benchmark_target
                                              : profile.target_consumption},
                     {"collar",
                      {{"enabled", cc.enabled},
                       {"floor", cc.floor},
                       {"floor_from_min_return", cc.floor_from_min_return},
                       {"min_return", cc.min_return},
                       {"sigma", cc.sigma > 0.0 ? cc.sigma : env.models.gmm.stddev()}}}};

    json files = json::array();
    if (!dir.empty()) {
        std::ostringstream summary;
        write_summary_csv(run, summary);
        write_text(dir, "summary.csv", summary.str(), files);
        write_text(dir, "metrics.json", out.dump(2) + "\n", files);
        if (write_years) {
            std::ostringstream years;
            write_years_csv(run, years);
            write_text(dir, "years.csv", years.str(), files);
        }
        auto cdf_file = [&](const std::string& name, const std::vector<double>& values) {
            std::ostringstream s;
            write_cdf_csv(empirical_cdf(values), s);
            write_text(dir, name, s.str(), files);
        };
        if (!run.mpc.empty() && !run.benchmark.empty()) cdf_file("cdf_relative_bequest.csv", run.comparison.relative_bequest);
        for (const auto* set : {&run.mpc, &run.benchmark}) {
            if (set->empty()) continue;
            std::vector<double> b;
            for (const auto& r : *set) b.push_back(r.bequest);
            cdf_file(std::string("cdf_") + policy_name(set->front().policy) + "_bequest.csv", b);
        }
    }
    out["files"] = files;
    out["timing"] = {{"total_seconds", seconds_since(t0)}, {"simulation_seconds", run.seconds}};
    return out;
}

json handle_fit(const Environment& env, const json& request, const RequestLimits& limits) {
    Fields f(request);
    const json& root = f.doc();
    const int m = static_cast<int>(f.integer(root, "", "components", 3, 1, 10));
    const auto seed = static_cast<std::uint64_t>(f.integer(root, "", "seed", 1, 0, std::numeric_limits<long long>::max()));
    const int max_it = static_cast<int>(f.integer(root, "", "max_iterations", 1000, 1, 1000000));
    const std::string output = f.text(root, "", "output", "");
    if (!output.empty() && !limits.allow_files) f.add("output", "is not accepted here");

    // inline arrays or paths to delimited files; the last column carries the value
    auto rows = [&](const char* key, std::size_t width) {
        std::vector<std::vector<double>> out;
        if (!f.has(key)) return out;
        const auto& node = f.at(key);
        if (node.is_array()) {
            for (std::size_t k = 0; k < node.size(); ++k) {
                std::vector<double> row;
                if (node[k].is_number()) row.push_back(node[k].get<double>());
                else if (node[k].is_array())
                    for (const auto& x : node[k])
                        if (x.is_number()) row.push_back(x.get<double>());
                if (row.size() < width) {
                    f.add(std::string(key) + "[" + std::to_string(k) + "]", "needs " + std::to_string(width) + " numbers");
                    return out;
                }
                out.push_back(std::vector<double>(row.end() - static_cast<long>(width), row.end()));
            }
            return out;
        }
        if (!node.is_string() || !limits.allow_files) {
            f.add(key, "must be an array or a file path");
            return out;
        }
        std::istringstream in(read_file(node.get<std::string>()));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::vector<double> row;
            std::stringstream ss(line);
            std::string cell;
            bool numeric = true;
            while (std::getline(ss, cell, ',')) {
                try {
                    row.push_back(std::stod(cell));
                } catch (const std::exception&) {
                    numeric = false;
                }
            }
            if (!numeric || row.size() < width) continue;  // header or malformed line
            out.push_back(std::vector<double>(row.end() - static_cast<long>(width), row.end()));
        }
        return out;
    };
    const auto market = rows("market_returns", 1);
    const auto rates = rows("rates", 2);
    if (!f.has("market_returns") && !f.has("rates")) f.add("market_returns", "market_returns or rates is required");
    f.raise();

    MarketModels models = env.models;
    json out;
    if (!market.empty()) {
        std::vector<double> r;
        for (const auto& row : market) r.push_back(row[0]);
        const GmmFit fit = fit_gmm(r, m, seed, max_it);
        models.gmm = fit.model;
        out["gmm"] = {{"observations", r.size()},
                      {"iterations", fit.log_likelihood.size()},
                      {"log_likelihood", fit.log_likelihood.empty() ? 0.0 : fit.log_likelihood.back()},
                      {"mean", models.gmm.mean()},
                      {"stddev", models.gmm.stddev()}};
    }
    if (!rates.empty()) {
        std::vector<Eigen::Vector2d> s;
        for (const auto& row : rates) s.emplace_back(row[0], transform_inflation(row[1], models.transform));
        if (s.size() < 3) throw DataError("rates: need at least three observations");
        models.var = fit_var(s);
        models.initial_treasury = rates.front()[0];
        models.initial_inflation = rates.front()[1];
        out["var"] = {{"observations", s.size()}, {"spectral_radius", models.var.spectral_radius()}};
    }
    out["preset"] = json::parse(market_models_json(models));
    json files = json::array();
    if (!output.empty()) {
        save_market_models(models, output);
        files.push_back(output);
    }
    out["files"] = files;
    return out;
}

json error_document(const std::exception& e) {
    json doc;
    doc["message"] = e.what();
    if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
        doc["error"] = "validation";
        json fields = json::array();
        for (const auto& [path, msg] : v->fields()) fields.push_back({{"path", path}, {"message", msg}});
        doc["fields"] = fields;
    } else if (const auto* inf = dynamic_cast<const InfeasiblePlan*>(&e)) {
        doc["error"] = "infeasible";
        doc["year"] = inf->year();
    } else if (dynamic_cast<const SolverError*>(&e)) {
        doc["error"] = "solver";
    } else if (dynamic_cast<const DataError*>(&e)) {
        doc["error"] = "data";
    } else if (dynamic_cast<const ServiceError*>(&e)) {
        doc["error"] = "service";
    } else {
        doc["error"] = "internal";
    }
    return doc;
}

} // namespace rfp
