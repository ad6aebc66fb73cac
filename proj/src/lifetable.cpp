#include "rfp/lifetable.hpp"

#include "rfp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rfp {

Sex parse_sex(const std::string& s) {
    if (s == "female" || s == "f" || s == "F") return Sex::female;
    if (s == "male" || s == "m" || s == "M") return Sex::male;
    throw DataError("unknown sex '" + s + "'");
}

LifeTable::LifeTable(Sex sex, int min_age, std::vector<double> q, std::optional<std::vector<double>> expectancy)
    : sex_(sex), min_age_(min_age), q_(std::move(q)) {
    if (q_.empty()) throw DataError("life table is empty");
    for (double v : q_) {
        if (!(v >= 0.0 && v <= 1.0)) throw DataError("life table: death probability outside [0,1]");
    }
    if (q_.back() != 1.0) throw DataError("life table: terminal death probability must be 1");
    if (expectancy) {
        if (expectancy->size() != q_.size()) throw DataError("life table: expectancy column length mismatch");
        e_ = std::move(*expectancy);
    } else {
        // e_x = p_x (1 + e_{x+1})
        e_.assign(q_.size(), 0.0);
        for (std::size_t k = q_.size() - 1; k-- > 0;) e_[k] = (1.0 - q_[k]) * (1.0 + e_[k + 1]);
    }
}

double LifeTable::death_probability(int age) const {
    if (!contains(age)) throw DataError("age " + std::to_string(age) + " outside life table");
    return q_[static_cast<std::size_t>(age - min_age_)];
}

double LifeTable::expected_remaining(int age) const {
    if (!contains(age)) throw DataError("age " + std::to_string(age) + " outside life table");
    return e_[static_cast<std::size_t>(age - min_age_)];
}

double LifeTable::derived_expected_remaining(int age) const {
    if (!contains(age)) throw DataError("age " + std::to_string(age) + " outside life table");
    double e = 0.0, survive = 1.0;
    for (int a = age; a < terminal_age(); ++a) {
        survive *= 1.0 - death_probability(a);
        e += survive;
    }
    return e;
}

LifeTable load_life_table(const std::filesystem::path& path, Sex sex) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open life table " + path.string());
    std::string line;
    std::vector<std::string> header;
    std::vector<int> ages;
    std::vector<double> q, e;
    int lineno = 0;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cell.erase(0, cell.find_first_not_of(" \t\r"));
            cell.erase(cell.find_last_not_of(" \t\r") + 1);
            out.push_back(cell);
        }
        return out;
    };
    int q_col = -1, e_col = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto cells = split(line);
        if (header.empty()) {
            header = cells;
            const std::string qn = sex == Sex::female ? "q_female" : "q_male";
            const std::string en = sex == Sex::female ? "e_female" : "e_male";
            for (std::size_t k = 0; k < header.size(); ++k) {
                if (header[k] == qn) q_col = static_cast<int>(k);
                if (header[k] == en) e_col = static_cast<int>(k);
            }
            if (header.empty() || header[0] != "age" || q_col < 0)
                throw DataError("life table header must start with 'age' and contain " + qn);
            continue;
        }
        try {
            ages.push_back(std::stoi(cells.at(0)));
            q.push_back(std::stod(cells.at(static_cast<std::size_t>(q_col))));
            if (e_col >= 0) e.push_back(std::stod(cells.at(static_cast<std::size_t>(e_col))));
        } catch (const std::exception&) {
            throw DataError("life table line " + std::to_string(lineno) + " is malformed");
        }
    }
    if (ages.empty()) throw DataError("life table has no rows");
    for (std::size_t k = 1; k < ages.size(); ++k) {
        if (ages[k] != ages[k - 1] + 1) throw DataError("life table ages are not contiguous");
    }
    std::optional<std::vector<double>> expectancy;
    if (e_col >= 0) expectancy = std::move(e);
    return LifeTable(sex, ages.front(), std::move(q), std::move(expectancy));
}

int planning_horizon(int age, const LifeTable& table, double inflation_factor, int max_age) {
    if (!(inflation_factor >= 1.0)) throw DataError("horizon factor must be at least 1");
    const double e = table.expected_remaining(age);
    const int scaled = static_cast<int>(std::floor(inflation_factor * e + 0.5));
    return std::max(1, std::min(scaled, max_age - age));
}

int sample_death_year(int age, const LifeTable& table, std::mt19937_64& rng) {
    if (!table.contains(age)) throw DataError("age " + std::to_string(age) + " outside life table");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int a = age;
    while (a < table.terminal_age() && u(rng) >= table.death_probability(a)) ++a;
    return a;
}

int sample_death_year(int age, const LifeTable& table, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_death_year(age, table, rng);
}

double expected_remaining(int age, const LifeTable& table) { return table.expected_remaining(age); }

} // namespace rfp
