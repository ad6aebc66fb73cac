#include "doctest.h"
#include "rfp/errors.hpp"
#include "rfp/lifetable.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace rfp;

namespace {

// q = 0 before `death_age`, 1 from there on, table ends at `last`.
LifeTable certain_death(int death_age, int last = 120) {
    std::vector<double> q;
    for (int a = 0; a <= last; ++a) q.push_back(a >= death_age ? 1.0 : 0.0);
    return LifeTable(Sex::female, 0, q);
}

// Table whose derived expectancy at 65 is exactly `e` (death certain at 65 + e).
LifeTable with_expectancy_at_65(int e) { return certain_death(65 + e); }

std::filesystem::path ssa() { return std::filesystem::path(RFP_DATA_DIR) / "lifetable_ssa2007.csv"; }

} // namespace

TEST_CASE("planning horizon") {
    CHECK(planning_horizon(65, with_expectancy_at_65(20)) == 30);
    CHECK(planning_horizon(65, with_expectancy_at_65(20), 1.0) == 20);
    CHECK(planning_horizon(115, certain_death(125, 130), 1.5, 120) == 5);
    // 1.5 * 13 = 19.5 rounds up
    CHECK(planning_horizon(65, with_expectancy_at_65(13)) == 20);
    CHECK_THROWS_AS(planning_horizon(200, certain_death(90)), DataError);
}

TEST_CASE("planning horizon is nonincreasing in age on the SSA table") {
    for (Sex s : {Sex::female, Sex::male}) {
        const auto t = load_life_table(ssa(), s);
        int prev = planning_horizon(0, t);
        for (int age = 1; age <= 119; ++age) {
            const int h = planning_horizon(age, t);
            CHECK(h <= prev);
            CHECK(h >= 1);
            prev = h;
        }
    }
}

TEST_CASE("expected remaining lifetime") {
    CHECK(expected_remaining(90, certain_death(90)) == 0.0);
    CHECK(expected_remaining(80, certain_death(90)) == doctest::Approx(10.0));
    const auto f = load_life_table(ssa(), Sex::female);
    CHECK(f.expected_remaining(65) == doctest::Approx(f.derived_expected_remaining(65)).epsilon(1e-12));
    CHECK(f.expected_remaining(65) > 18.0);
    CHECK(f.expected_remaining(65) < 21.0);
    const auto m = load_life_table(ssa(), Sex::male);
    CHECK(m.expected_remaining(65) < f.expected_remaining(65));
}

TEST_CASE("ingested expectancy column is returned as is") {
    const auto tmp = std::filesystem::temp_directory_path() / "rfp_lifetable_test.csv";
    {
        std::ofstream out(tmp);
        out << "# test\nage,q_female,q_male,e_female,e_male\n";
        out << "0,0.5,0.5,0.75,0.75\n1,0.5,0.5,0.5,0.5\n2,1.0,1.0,0,0\n";
    }
    const auto t = load_life_table(tmp, Sex::female);
    CHECK(t.expected_remaining(0) == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(t.derived_expected_remaining(0) == doctest::Approx(0.75).epsilon(1e-9));
    std::filesystem::remove(tmp);
}

TEST_CASE("death year sampling") {
    const auto t = certain_death(90);
    for (std::uint64_t seed = 0; seed < 50; ++seed) CHECK(sample_death_year(70, t, seed) == 90);

    std::vector<double> zero(121, 0.0);
    zero.back() = 1.0;
    const LifeTable never(Sex::male, 0, zero);
    CHECK(sample_death_year(65, never, 1) == 120);

    std::vector<double> half(121, 0.5);
    half.back() = 1.0;
    const LifeTable coin(Sex::male, 0, half);
    std::mt19937_64 rng(2024);
    double sum = 0.0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) sum += sample_death_year(65, coin, rng) - 65 + 1;  // years lived, death year included
    CHECK(sum / n == doctest::Approx(2.0).epsilon(0.025));
}

TEST_CASE("sampling matches expectancy within three standard errors") {
    const auto t = load_life_table(ssa(), Sex::female);
    std::mt19937_64 rng(99);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double x = sample_death_year(65, t, rng) - 65;
        s += x;
        s2 += x * x;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    CHECK(std::abs(mean - t.expected_remaining(65)) <= 3.0 * std::sqrt(var / n));
}

TEST_CASE("malformed tables") {
    CHECK_THROWS_AS(LifeTable(Sex::female, 0, {0.1, 0.2}), DataError);
    CHECK_THROWS_AS(LifeTable(Sex::female, 0, {1.5, 1.0}), DataError);
    CHECK_THROWS_AS(load_life_table("/nonexistent.csv", Sex::male), DataError);
    CHECK_THROWS_AS(parse_sex("x"), DataError);
}
