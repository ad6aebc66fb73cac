#pragma once

#include "rfp/collar.hpp"
#include "rfp/policy.hpp"
#include "rfp/profile.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace rfp {

enum class Account { brokerage = 0, ira = 1, roth = 2 };

struct ScenarioConfig {
    int count = 1000;
    std::uint64_t seed = 1;
    bool steady_state_start = true;  // false: start from the preset's initial rates
    CollarConfig collar;
};

// One sampled future. Index k is the k-th year of retirement (age start_age + k).
struct Scenario {
    int id = 0;
    std::uint64_t seed = 0;
    int start_age = 65;
    int death_age = 65;  // last year lived
    std::vector<double> market, treasury, inflation;
    std::vector<Eigen::Vector2d> states;  // VAR states x_0 .. x_years; year k is decided at states[k]
    std::array<std::vector<double>, 3> rho;  // real gross returns per account
    std::array<std::vector<double>, 3> floor, cap;  // collar legs per account; empty without a collar
    double collar_sigma = 0.0;

    int years() const { return death_age - start_age + 1; }
};

// Per-scenario seed from a counter: splitmix64 of base_seed mixed with the scenario index.
std::uint64_t scenario_seed(std::uint64_t base_seed, int id);

Scenario generate_scenario(int id, const Profile& p, const Environment& env, const ScenarioConfig& cfg);
std::vector<Scenario> generate_scenarios(const Profile& p, const Environment& env, const ScenarioConfig& cfg);

enum class PolicyKind { mpc, benchmark };
const char* policy_name(PolicyKind k);

struct SimulationReport {
    int scenario_id = 0;
    PolicyKind policy = PolicyKind::mpc;
    std::vector<YearRecord> years;
    double initial_wealth = 0.0;
    double bequest = 0.0;
    double min_consumption = 0.0;
    bool depleted = false;
    int shortfall_years = 0;  // consumption below target
    int fallback_years = 0;

    // W0 + incomes + gains - (consumption + taxes + liabilities + bequest + max(-Delta_last, 0)), relative
    double conservation_error() const;
};

struct TrajectoryOptions {
    PolicyConfig mpc;
    double benchmark_target = -1.0;  // < 0: the profile's target consumption
};

SimulationReport run_trajectory(PolicyKind policy, const Scenario& sc, const Profile& p, const Environment& env,
                                const TrajectoryOptions& opt = {});

// Violations of the trajectory invariants; empty when the trajectory is sound.
std::vector<std::string> check_trajectory(const SimulationReport& r, double tol = 1e-6);

struct PercentileSummary {
    double min = 0.0, p1 = 0.0, p5 = 0.0, p50 = 0.0, p95 = 0.0, p99 = 0.0, max = 0.0;
};

// Linear interpolation between order statistics; +inf entries sort last.
double percentile(std::vector<double> values, double pct);
PercentileSummary summarize(const std::vector<double>& values, bool finite_max = false);

struct EmpiricalCdf {
    std::vector<double> value;
    std::vector<double> probability;
};
EmpiricalCdf empirical_cdf(const std::vector<double>& values, int points = 101);

struct AgeBands {
    std::vector<int> age;
    std::vector<int> alive;
    std::vector<double> p5, p50, p95;
};

enum class BandField { b, i, r, conversion, B, I, R, tax, consumption };
const char* band_field_name(BandField f);
AgeBands age_bands(const std::vector<SimulationReport>& reports, BandField field);

struct Comparison {
    int scenarios = 0;
    std::vector<double> relative_bequest;      // +inf when the benchmark bequest is zero
    std::vector<double> relative_consumption;  // ratio of minimum annual consumption
    PercentileSummary bequest_summary;         // max over finite ratios
    PercentileSummary consumption_summary;
    double fraction_mpc_larger = 0.0;
    double conditional_median_uplift = 0.0;  // median of (ratio - 1) where ratio > 1
    double fraction_consumption_differs = 0.0;
    int unbounded_bequest = 0;
    double mean_mpc_bequest = 0.0, mean_benchmark_bequest = 0.0;
    double mpc_depleted = 0.0, benchmark_depleted = 0.0;  // fractions
};

// Throws std::invalid_argument when the report sets are not paired by scenario id.
Comparison compare(const std::vector<SimulationReport>& mpc, const std::vector<SimulationReport>& benchmark);

struct SimulationRun {
    std::vector<Scenario> scenarios;
    std::vector<SimulationReport> mpc, benchmark;
    Comparison comparison;
    double seconds = 0.0;
};

struct RunOptions {
    ScenarioConfig scenarios;
    TrajectoryOptions trajectory;
    bool run_mpc = true;
    bool run_benchmark = true;
    int threads = 0;  // 0: hardware concurrency
    std::function<void(int done, int total)> progress;
};

SimulationRun run_simulation(const Profile& p, const Environment& env, const RunOptions& opt);

// Per-scenario summary table.
void write_summary_csv(const SimulationRun& run, std::ostream& out);
// Long format: one row per scenario, policy and year.
void write_years_csv(const SimulationRun& run, std::ostream& out);
void write_cdf_csv(const EmpiricalCdf& cdf, std::ostream& out);
// Metrics document with percentile rows, CDFs and per-age bands. Excludes timing.
std::string metrics_json(const SimulationRun& run, int indent = 2);

} // namespace rfp
