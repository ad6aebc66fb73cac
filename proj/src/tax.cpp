#include "rfp/tax.hpp"

#include "rfp/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace rfp {

void TaxSchedule::validate() const {
    if (marginal_rates.size() != bracket_edges.size() + 1)
        throw DataError("tax schedule: need one more marginal rate than bracket edges");
    for (std::size_t k = 0; k < bracket_edges.size(); ++k) {
        if (!(bracket_edges[k] > 0.0)) throw DataError("tax schedule: bracket edges must be positive");
        if (k > 0 && !(bracket_edges[k] > bracket_edges[k - 1]))
            throw DataError("tax schedule: bracket edges must increase");
    }
    for (std::size_t k = 0; k < marginal_rates.size(); ++k) {
        if (!(marginal_rates[k] >= 0.0 && marginal_rates[k] < 1.0))
            throw DataError("tax schedule: marginal rates must lie in [0,1)");
        if (k > 0 && !(marginal_rates[k] > marginal_rates[k - 1]))
            throw DataError("tax schedule: marginal rates must increase");
    }
    if (!(ltcg_fixed_rate >= 0.0 && ltcg_fixed_rate < 1.0)) throw DataError("tax schedule: ltcg rate outside [0,1)");
    for (std::size_t k = 0; k < ltcg_brackets.size(); ++k) {
        const auto& b = ltcg_brackets[k];
        if (!(b.rate >= 0.0 && b.rate < 1.0)) throw DataError("tax schedule: ltcg bracket rate outside [0,1)");
        if (k > 0 && !(b.threshold > ltcg_brackets[k - 1].threshold))
            throw DataError("tax schedule: ltcg thresholds must increase");
    }
}

double income_tax(double omega, const TaxSchedule& s) {
    if (omega <= 0.0) return 0.0;
    double tax = 0.0, lo = 0.0;
    for (std::size_t k = 0; k < s.marginal_rates.size(); ++k) {
        const double hi = k < s.bracket_edges.size() ? s.bracket_edges[k] : std::numeric_limits<double>::infinity();
        if (omega <= lo) break;
        tax += s.marginal_rates[k] * (std::min(omega, hi) - lo);
        lo = hi;
    }
    return tax;
}

std::vector<AffinePiece> income_tax_epigraph(const TaxSchedule& s) {
    std::vector<AffinePiece> pieces;
    pieces.reserve(s.marginal_rates.size() + 1);
    pieces.push_back({0.0, 0.0});
    double kink = 0.0, value = 0.0;
    for (std::size_t k = 0; k < s.marginal_rates.size(); ++k) {
        const double eta = s.marginal_rates[k];
        pieces.push_back({eta, value - eta * kink});
        if (k < s.bracket_edges.size()) {
            value += eta * (s.bracket_edges[k] - kink);
            kink = s.bracket_edges[k];
        }
    }
    return pieces;
}

double exact_capital_gains_tax(double gain, double ordinary, const TaxSchedule& s) {
    if (!(gain > 0.0)) return 0.0;
    const double start = std::max(ordinary, 0.0);
    const double end = start + gain;
    double tax = 0.0, lo = 0.0;
    for (const auto& b : s.ltcg_brackets) {
        const double hi = b.threshold;
        const double overlap = std::min(end, hi) - std::max(start, lo);
        if (overlap > 0.0) tax += b.rate * overlap;
        lo = hi;
        if (lo >= end) break;
    }
    return tax;
}

double capital_gains_coefficient(const TaxSchedule& s, double basis_ratio) {
    return s.ltcg_fixed_rate * std::max(1.0 - basis_ratio, 0.0);
}

double rmd_fraction(int age, const RMDSchedule& s) {
    if (age < s.start_age) return 0.0;
    auto it = s.divisor_by_age.find(age);
    if (it == s.divisor_by_age.end())
        throw DataError("RMD table has no divisor for age " + std::to_string(age));
    return std::min(1.0, 1.0 / it->second);
}

TaxSchedule load_tax_schedule(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open tax schedule " + path.string());
    TaxSchedule s;
    try {
        const auto j = nlohmann::json::parse(in);
        s.bracket_edges = j.at("bracket_edges").get<std::vector<double>>();
        s.marginal_rates = j.at("marginal_rates").get<std::vector<double>>();
        s.ltcg_fixed_rate = j.value("ltcg_fixed_rate", 0.0);
        for (const auto& b : j.value("ltcg_brackets", nlohmann::json::array())) {
            const auto& t = b.at("threshold");
            s.ltcg_brackets.push_back(
                {t.is_null() ? std::numeric_limits<double>::infinity() : t.get<double>(), b.at("rate").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("tax schedule " + path.string() + ": " + e.what());
    }
    if (s.ltcg_brackets.empty()) s.ltcg_brackets.push_back({std::numeric_limits<double>::infinity(), s.ltcg_fixed_rate});
    s.validate();
    return s;
}

RMDSchedule load_rmd_schedule(const std::filesystem::path& path, int start_age) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open RMD table " + path.string());
    RMDSchedule s;
    s.start_age = start_age;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        int age = 0;
        double div = 0.0;
        if (!(ls >> age >> div) || !(div > 0.0))
            throw DataError("RMD table line " + std::to_string(lineno) + ": expected '<age> <divisor>'");
        s.divisor_by_age[age] = div;
    }
    if (s.divisor_by_age.empty()) throw DataError("RMD table is empty");
    int expect = s.divisor_by_age.begin()->first;
    for (const auto& [age, div] : s.divisor_by_age) {
        if (age != expect++) throw DataError("RMD table ages are not contiguous");
    }
    return s;
}

} // namespace rfp
