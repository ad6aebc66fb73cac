#pragma once

#include "rfp/lifetable.hpp"
#include "rfp/market.hpp"
#include "rfp/tax.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rfp {

// Constant real amount per year for ages from_age..to_age inclusive.
struct IncomeStream {
    int from_age = 0;
    int to_age = 120;
    double annual = 0.0;
};

double stream_amount(const std::vector<IncomeStream>& streams, int age);

struct Profile {
    std::string name;
    Sex sex = Sex::female;
    int start_age = 65;
    double brokerage = 0.0, ira = 0.0, roth = 0.0;
    double basis_ratio = 1.0;
    std::vector<IncomeStream> additional_income, earned_income, liabilities;
    double target_consumption = 0.0;
    double shortfall_weight = 500.0;
    double ltcg_rate = 0.15;
    double deposit_limit = 8000.0;
    double stock_brokerage = 0.2, stock_ira = 0.6, stock_roth = 0.6;
};

// Parses a profile document; throws ValidationError listing every bad field.
Profile parse_profile(const std::string& json_text);
Profile load_profile(const std::filesystem::path& path);
std::string profile_to_json(const Profile& p);

// Everything read from the data directory once and then shared read-only.
struct Environment {
    TaxSchedule tax;
    RMDSchedule rmd;
    LifeTable female;
    LifeTable male;
    MarketModels models;

    const LifeTable& table(Sex s) const { return s == Sex::female ? female : male; }
};

Environment load_environment(const std::filesystem::path& data_dir);
std::filesystem::path default_data_dir();

} // namespace rfp
