#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <vector>

namespace rfp {

enum class Sex { female, male };

Sex parse_sex(const std::string& s);

// Period life table for one sex, indexed by integer age from min_age.
class LifeTable {
public:
    // q[k] is the one-year death probability at age min_age + k; the last entry must be 1.
    LifeTable(Sex sex, int min_age, std::vector<double> q, std::optional<std::vector<double>> expectancy = {});

    Sex sex() const { return sex_; }
    int min_age() const { return min_age_; }
    int terminal_age() const { return min_age_ + static_cast<int>(q_.size()) - 1; }
    bool contains(int age) const { return age >= min_age() && age <= terminal_age(); }
    double death_probability(int age) const;
    // Ingested column when present, otherwise derived from q.
    double expected_remaining(int age) const;
    double derived_expected_remaining(int age) const;

private:
    Sex sex_;
    int min_age_;
    std::vector<double> q_;
    std::vector<double> e_;
};

// Reads age,q_female,q_male[,e_female,e_male]; lines starting with '#' are comments.
LifeTable load_life_table(const std::filesystem::path& path, Sex sex);

// min(round(factor * e_age), max_age - age), at least 1. Halves round up.
int planning_horizon(int age, const LifeTable& table, double inflation_factor = 1.5, int max_age = 120);

// Age in the last year lived: one Bernoulli(q_x) draw at the end of each year starting at `age`.
int sample_death_year(int age, const LifeTable& table, std::mt19937_64& rng);
int sample_death_year(int age, const LifeTable& table, std::uint64_t seed);

double expected_remaining(int age, const LifeTable& table);

} // namespace rfp
