#include "rfp/rfp.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <pthread.h>

#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

using nlohmann::json;

namespace {

struct Engine {
    rfp_engine* ptr = nullptr;
    ~Engine() { rfp_engine_destroy(ptr); }
};

std::string money(double v) {
    if (!std::isfinite(v)) return v > 0 ? "inf" : "-inf";
    const long long n = std::llround(v);
    std::string digits = std::to_string(n < 0 ? -n : n);
    for (int k = static_cast<int>(digits.size()) - 3; k > 0; k -= 3) digits.insert(static_cast<std::size_t>(k), ",");
    return (n < 0 ? "-$" : "$") + digits;
}

std::string ratio(const json& v) {
    if (v.is_null()) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v.get<double>());
    return buf;
}

// Reads the run configuration; a string "profile" stays a path and is resolved by the library.
json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    json j = json::parse(in, nullptr, true, true);
    if (!j.is_object()) throw std::runtime_error("config must be an object");
    return j;
}

int report_failure(rfp_status st, char* response) {
    if (response) {
        const auto doc = json::parse(response, nullptr, false);
        rfp_string_free(response);
        if (!doc.is_discarded()) {
            if (doc.contains("fields"))
                std::cerr << "error: invalid input\n";
            else
                std::cerr << "error: " << doc.value("message", std::string("failed")) << "\n";
            if (doc.contains("fields"))
                for (const auto& f : doc["fields"])
                    std::cerr << "  " << f.value("path", std::string()) << ": " << f.value("message", std::string())
                              << "\n";
            if (doc.contains("year") && doc["year"].get<int>() > 0)
                std::cerr << "  first infeasible year: " << doc["year"].get<int>() << "\n";
        }
    } else {
        std::cerr << "error: " << rfp_last_error() << "\n";
    }
    return st == RFP_INTERNAL_ERROR ? 1 : static_cast<int>(st);
}

// whole dollars without a sign on rounding noise
double whole(const json& v) {
    const double x = v.get<double>();
    return std::abs(x) < 0.5 ? 0.0 : x;
}

void print_plan(const json& r) {
    std::printf("status      %s\n", r["status"].get<std::string>().c_str());
    std::printf("horizon     %d years from age %d\n", r["horizon"].get<int>(), r["start_age"].get<int>());
    std::printf("consumption %s per year\n", money(r["c"].get<double>()).c_str());
    std::printf("bequest     %s\n", money(r["q"].get<double>()).c_str());
    std::printf("solve time  %.4f s (%d iterations)\n", r["timing"]["solve_seconds"].get<double>(),
                r["iterations"].get<int>());
    std::printf("max residual %.2e\n", r["max_violation"].get<double>());
    const auto& y = r["years"];
    std::printf("\n%5s %10s %10s %10s %9s %9s %9s %9s %9s\n", "age", "B", "I", "R", "b", "i", "r", "conv", "tax");
    const auto T = y["b"].size();
    for (std::size_t t = 0; t < T; ++t) {
        std::printf("%5d %10.0f %10.0f %10.0f %9.0f %9.0f %9.0f %9.0f %9.0f\n", y["age"][t].get<int>(),
                    whole(y["B"][t]), whole(y["I"][t]), whole(y["R"][t]),
                    whole(y["b"][t]), whole(y["i"][t]), whole(y["r"][t]),
                    whole(y["rc"][t]), whole(y["tau"][t]));
    }
}

void print_row(const char* name, const json& s) {
    std::printf("%-22s %6s %6s %6s %6s %6s %6s %6s\n", name, ratio(s["min"]).c_str(), ratio(s["p1"]).c_str(),
                ratio(s["p5"]).c_str(), ratio(s["p50"]).c_str(), ratio(s["p95"]).c_str(), ratio(s["p99"]).c_str(),
                ratio(s["max"]).c_str());
}

void print_simulation(const json& r) {
    std::printf("scenarios %d, seed %llu, %.1f s\n", r["config"]["count"].get<int>(),
                r["config"]["seed"].get<unsigned long long>(), r["timing"]["simulation_seconds"].get<double>());
    if (r.contains("relative_bequest")) {
        std::printf("\n%-22s %6s %6s %6s %6s %6s %6s %6s\n", "", "min", "1%", "5%", "50%", "95%", "99%", "max");
        print_row("relative consumption", r["relative_consumption"]);
        print_row("relative bequest", r["relative_bequest"]);
        std::printf("\nMPC bequest larger in        %.1f%% of scenarios\n", 100.0 * r["fraction_mpc_larger"].get<double>());
        std::printf("median uplift when larger    %.1f%%\n", 100.0 * r["conditional_median_uplift"].get<double>());
        std::printf("relative consumption != 1    %.1f%% of scenarios\n",
                    100.0 * r["fraction_consumption_differs"].get<double>());
        std::printf("mean bequest                 MPC %s, benchmark %s\n",
                    money(r["mean_bequest"]["mpc"].get<double>()).c_str(),
                    money(r["mean_bequest"]["benchmark"].get<double>()).c_str());
    }
    const auto& v = r["trajectory_violations"];
    std::printf("trajectory checks            %d violations\n", v["count"].get<int>());
    for (const auto& e : v["examples"]) std::printf("  %s\n", e.get<std::string>().c_str());
}

void print_files(const json& r) {
    for (const auto& f : r["files"]) std::printf("wrote %s\n", f.get<std::string>().c_str());
}

template <class Call>
int run_request(const std::string& data_dir, const std::string& preset, const json& request, bool raw, Call call,
                void (*print)(const json&)) {
    Engine engine;
    if (rfp_status st = rfp_engine_create(data_dir.empty() ? nullptr : data_dir.c_str(),
                                          preset.empty() ? nullptr : preset.c_str(), &engine.ptr);
        st != RFP_OK) {
        std::cerr << "error: " << rfp_last_error() << "\n";
        return static_cast<int>(st);
    }
    char* response = nullptr;
    const rfp_status st = call(engine.ptr, request.dump().c_str(), &response);
    if (st != RFP_OK) return report_failure(st, response);
    const json doc = json::parse(response);
    rfp_string_free(response);
    if (raw) {
        std::cout << doc.dump(2) << "\n";
    } else {
        print(doc);
        print_files(doc);
    }
    return 0;
}

int serve(const std::string& data_dir, const std::string& preset, const json& service) {
    // signals are taken by a watcher thread so the server can stop cleanly
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    Engine engine;
    if (rfp_status st = rfp_engine_create(data_dir.empty() ? nullptr : data_dir.c_str(),
                                          preset.empty() ? nullptr : preset.c_str(), &engine.ptr);
        st != RFP_OK) {
        std::cerr << "error: " << rfp_last_error() << "\n";
        return static_cast<int>(st);
    }
    rfp_server* server = nullptr;
    if (rfp_status st = rfp_server_create(engine.ptr, service.dump().c_str(), &server); st != RFP_OK) {
        std::cerr << "error: " << rfp_last_error() << "\n";
        return st == RFP_INPUT_ERROR ? 2 : 3;
    }
    std::printf("listening on %s:%d\n", service.value("host", std::string("127.0.0.1")).c_str(),
                rfp_server_port(server));
    std::fflush(stdout);

    std::thread watcher([&] {
        int sig = 0;
        sigwait(&set, &sig);
        rfp_server_stop(server);
    });
    const rfp_status st = rfp_server_run(server);
    if (st != RFP_OK) pthread_kill(watcher.native_handle(), SIGTERM);
    watcher.join();
    rfp_server_destroy(server);
    if (st != RFP_OK) {
        std::cerr << "error: " << rfp_last_error() << "\n";
        return 3;
    }
    std::printf("stopped\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retirement funding planner: plans, Monte Carlo comparisons and an HTTP service"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(rfp_version()));

    std::string config_path, data_dir, preset;
    bool raw = false;
    auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "Run configuration (JSON)");
        sub->add_option("--data-dir", data_dir, "Directory with tax, RMD and life tables");
        sub->add_option("--preset", preset, "Market model preset");
    };

    // plan
    auto* plan = app.add_subcommand("plan", "Solve one plan for a profile");
    common(plan);
    std::string profile, out_dir, forecast;
    std::optional<int> terminal_age;
    plan->add_option("-p,--profile", profile, "Profile document");
    plan->add_option("-o,--out", out_dir, "Write plan.csv and plan.json here");
    plan->add_option("--forecast", forecast, "Return forecasts: fixed or var")->check(CLI::IsMember({"fixed", "var"}));
    plan->add_option("--terminal-age", terminal_age, "Plan through this age instead of the horizon rule");
    plan->add_flag("--json", raw, "Print the full response document");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Paired MPC and benchmark Monte Carlo run");
    common(sim);
    std::optional<int> count, threads;
    std::optional<unsigned long long> seed;
    std::optional<double> collar_floor;
    bool collar = false, no_collar = false, years = false;
    std::string policies;
    sim->add_option("-p,--profile", profile, "Profile document");
    sim->add_option("-n,--count", count, "Number of scenarios")->check(CLI::PositiveNumber);
    sim->add_option("-s,--seed", seed, "Base seed");
    sim->add_option("-j,--threads", threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    sim->add_option("-o,--out", out_dir, "Write summary, metrics and CDF files here");
    sim->add_option("--policies", policies, "both, mpc or benchmark")->check(CLI::IsMember({"both", "mpc", "benchmark"}));
    sim->add_option("--forecast", forecast, "Return forecasts: fixed or var")->check(CLI::IsMember({"fixed", "var"}));
    sim->add_flag("--collar", collar, "Hedge stock positions with a self-financing collar");
    sim->add_flag("--no-collar", no_collar, "Disable the collar even if the config enables it");
    sim->add_option("--collar-floor", collar_floor, "Collar floor as a return, e.g. -0.075");
    sim->add_flag("--years", years, "Also write the per-year long table");
    sim->add_flag("--json", raw, "Print the full response document");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit the market return mixture and the rate VAR");
    common(fit);
    std::string market_file, rates_file, fit_out;
    std::optional<int> components;
    fit->add_option("--market-returns", market_file, "Annual market returns (CSV, last column)");
    fit->add_option("--rates", rates_file, "Annual Treasury rate and inflation (CSV, last two columns)");
    fit->add_option("-k,--components", components, "Mixture components")->check(CLI::Range(1, 10));
    fit->add_option("-s,--seed", seed, "EM initialization seed");
    fit->add_option("-o,--out", fit_out, "Write the fitted preset here");
    fit->add_flag("--json", raw, "Print the full response document");

    // serve
    auto* srv = app.add_subcommand("serve", "Run the HTTP service");
    common(srv);
    std::string host, origin;
    std::optional<int> port, max_scenarios;
    srv->add_option("--host", host, "Bind address");
    srv->add_option("--port", port, "Port (0: any free port)")->check(CLI::Range(0, 65535));
    srv->add_option("--max-scenarios", max_scenarios, "Largest accepted simulate count")->check(CLI::PositiveNumber);
    srv->add_option("-j,--threads", threads, "Simulate worker threads")->check(CLI::NonNegativeNumber);
    srv->add_option("--allowed-origin", origin, "Origin allowed for cross-origin requests");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    json cfg;
    try {
        cfg = load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    // engine settings may come from the config; flags win
    if (data_dir.empty()) data_dir = cfg.value("data_dir", std::string());
    if (preset.empty()) preset = cfg.value("preset", std::string());
    cfg.erase("data_dir");
    cfg.erase("preset");

    if (!profile.empty()) cfg["profile"] = profile;
    if (!out_dir.empty()) cfg["output_dir"] = out_dir;
    if (!forecast.empty()) cfg["policy"]["forecast"] = forecast;

    if (*plan) {
        cfg.erase("service");
        if (terminal_age) cfg["policy"]["terminal_age"] = *terminal_age;
        return run_request(data_dir, preset, cfg, raw, rfp_plan, print_plan);
    }
    if (*sim) {
        cfg.erase("service");
        if (count) cfg["count"] = *count;
        if (seed) cfg["seed"] = *seed;
        if (threads) cfg["threads"] = *threads;
        if (!policies.empty()) cfg["policies"] = policies;
        if (collar) cfg["collar"]["enabled"] = true;
        if (no_collar) cfg["collar"]["enabled"] = false;
        if (collar_floor) cfg["collar"]["floor"] = *collar_floor;
        if (years) cfg["write_years"] = true;
        return run_request(data_dir, preset, cfg, raw, rfp_simulate, print_simulation);
    }
    if (*fit) {
        json req = cfg.contains("fit") ? cfg["fit"] : json::object();
        if (!market_file.empty()) req["market_returns"] = market_file;
        if (!rates_file.empty()) req["rates"] = rates_file;
        if (components) req["components"] = *components;
        if (seed) req["seed"] = *seed;
        if (!fit_out.empty()) req["output"] = fit_out;
        return run_request(
            data_dir, preset, req, raw, rfp_fit, +[](const json& r) {
                if (r.contains("gmm"))
                    std::printf("market mixture: mean %.4f, std %.4f, %zu EM iterations\n",
                                r["gmm"]["mean"].get<double>(), r["gmm"]["stddev"].get<double>(),
                                r["gmm"]["iterations"].get<std::size_t>());
                if (r.contains("var"))
                    std::printf("rate VAR: spectral radius %.4f\n", r["var"]["spectral_radius"].get<double>());
                std::printf("%s\n", r["preset"].dump(2).c_str());
            });
    }
    json service = cfg.contains("service") ? cfg["service"] : json::object();
    if (!host.empty()) service["host"] = host;
    if (port) service["port"] = *port;
    if (max_scenarios) service["max_scenarios"] = *max_scenarios;
    if (threads) service["threads"] = *threads;
    if (!origin.empty()) service["allowed_origin"] = origin;
    return serve(data_dir, preset, service);
}
