#pragma once

#include <filesystem>
#include <map>
#include <vector>

namespace rfp {

struct LtcgBracket {
    double threshold;  // upper edge of the bracket in taxable income; +inf for the last one
    double rate;
};

struct TaxSchedule {
    std::vector<double> bracket_edges;   // beta_1 < ... < beta_K, all > 0
    std::vector<double> marginal_rates;  // eta_1 < ... < eta_{K+1}
    double ltcg_fixed_rate = 0.0;        // xi, used by the planner
    std::vector<LtcgBracket> ltcg_brackets;

    // Throws DataError when the invariants fail.
    void validate() const;
};

struct AffinePiece {
    double slope;
    double intercept;
    double operator()(double x) const { return slope * x + intercept; }
};

// phi(omega); zero for omega <= 0.
double income_tax(double omega, const TaxSchedule& schedule);

// K+2 affine pieces whose pointwise max is phi (first piece is the zero function).
std::vector<AffinePiece> income_tax_epigraph(const TaxSchedule& schedule);

// Gain stacked on top of max(ordinary income, 0) and taxed through ltcg_brackets.
double exact_capital_gains_tax(double realized_gain, double ordinary_taxable_income, const TaxSchedule& schedule);

// xi * max(1 - delta0, 0)
double capital_gains_coefficient(const TaxSchedule& schedule, double basis_ratio);

struct RMDSchedule {
    int start_age = 73;
    std::map<int, double> divisor_by_age;
};

// 0 before start_age, 1/divisor afterwards. Throws DataError if the divisor is missing.
double rmd_fraction(int age, const RMDSchedule& schedule);

struct DepositLimits {
    double d_max = 0.0;
};

TaxSchedule load_tax_schedule(const std::filesystem::path& path);
RMDSchedule load_rmd_schedule(const std::filesystem::path& path, int start_age = 73);

} // namespace rfp
