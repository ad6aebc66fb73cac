#include "rfp/profile.hpp"

#include "rfp/errors.hpp"

#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rfp {

using nlohmann::json;

double stream_amount(const std::vector<IncomeStream>& streams, int age) {
    double total = 0.0;
    for (const auto& s : streams) {
        if (age >= s.from_age && age <= s.to_age) total += s.annual;
    }
    return total;
}

namespace {

class Reader {
public:
    explicit Reader(const json& j) : j_(j) {}

    double number(const char* key, double fallback, bool required, double lo, double hi) {
        return number_at(j_, key, key, fallback, required, lo, hi);
    }

    double number_at(const json& obj, const char* key, const std::string& path, double fallback, bool required,
                     double lo, double hi) {
        if (!obj.is_object() || !obj.contains(key)) {
            if (required) errors_.emplace_back(path, "is required");
            return fallback;
        }
        const auto& v = obj.at(key);
        if (!v.is_number()) {
            errors_.emplace_back(path, "must be a number");
            return fallback;
        }
        const double x = v.get<double>();
        if (!(x >= lo && x <= hi)) {
            std::ostringstream msg;
            msg << "must lie in [" << lo << ", " << hi << "]";
            errors_.emplace_back(path, msg.str());
        }
        return x;
    }

    std::vector<IncomeStream> streams(const char* key) {
        std::vector<IncomeStream> out;
        if (!j_.contains(key)) return out;
        const auto& arr = j_.at(key);
        if (!arr.is_array()) {
            errors_.emplace_back(key, "must be an array");
            return out;
        }
        for (std::size_t k = 0; k < arr.size(); ++k) {
            const std::string base = std::string(key) + "[" + std::to_string(k) + "]";
            IncomeStream s;
            s.from_age = static_cast<int>(number_at(arr[k], "from_age", base + ".from_age", 0, true, 0, 150));
            s.to_age = static_cast<int>(number_at(arr[k], "to_age", base + ".to_age", 120, false, 0, 150));
            s.annual = number_at(arr[k], "annual", base + ".annual", 0, true, -1e9, 1e9);
            if (s.to_age < s.from_age) errors_.emplace_back(base, "to_age precedes from_age");
            out.push_back(s);
        }
        return out;
    }

    ValidationError::FieldErrors& errors() { return errors_; }

private:
    const json& j_;
    ValidationError::FieldErrors errors_;
};

} // namespace

Profile parse_profile(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(ValidationError::FieldErrors{{"$", std::string("not valid JSON: ") + e.what()}});
    }
    if (!j.is_object()) throw ValidationError(ValidationError::FieldErrors{{"$", "must be an object"}});
    Reader r(j);
    Profile p;
    if (j.contains("name") && !j["name"].is_string()) r.errors().emplace_back("name", "must be a string");
    else p.name = j.value("name", std::string());
    const std::string sex = j.contains("sex") && j["sex"].is_string() ? j["sex"].get<std::string>() : "";
    if (sex == "female") p.sex = Sex::female;
    else if (sex == "male") p.sex = Sex::male;
    else r.errors().emplace_back("sex", "must be \"female\" or \"male\"");
    p.start_age = static_cast<int>(r.number("start_age", 65, true, 18, 119));
    if (!j.contains("balances") || !j["balances"].is_object()) {
        r.errors().emplace_back("balances", "is required");
    } else {
        const auto& b = j["balances"];
        p.brokerage = r.number_at(b, "brokerage", "balances.brokerage", 0, true, 0, 1e12);
        p.ira = r.number_at(b, "ira", "balances.ira", 0, true, 0, 1e12);
        p.roth = r.number_at(b, "roth", "balances.roth", 0, true, 0, 1e12);
    }
    p.basis_ratio = r.number("basis_ratio", 1.0, false, 0, 1e3);
    p.additional_income = r.streams("additional_income");
    p.earned_income = r.streams("earned_income");
    p.liabilities = r.streams("liabilities");
    for (std::size_t k = 0; k < p.earned_income.size(); ++k) {
        if (p.earned_income[k].annual < 0)
            r.errors().emplace_back("earned_income[" + std::to_string(k) + "].annual", "must be nonnegative");
    }
    p.target_consumption = r.number("target_consumption", 0, true, 0, 1e9);
    p.shortfall_weight = r.number("shortfall_weight", 500, false, 1e-9, 1e9);
    p.ltcg_rate = r.number("ltcg_rate", 0.15, false, 0, 0.999);
    p.deposit_limit = r.number("deposit_limit", 8000, false, 0, 1e9);
    if (j.contains("stock_weights")) {
        const auto& w = j["stock_weights"];
        p.stock_brokerage = r.number_at(w, "brokerage", "stock_weights.brokerage", 0.2, false, 0, 1);
        p.stock_ira = r.number_at(w, "ira", "stock_weights.ira", 0.6, false, 0, 1);
        p.stock_roth = r.number_at(w, "roth", "stock_weights.roth", 0.6, false, 0, 1);
    }
    if (!r.errors().empty()) throw ValidationError(std::move(r.errors()));
    return p;
}

Profile load_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open profile " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_profile(ss.str());
}

std::string profile_to_json(const Profile& p) {
    auto streams = [](const std::vector<IncomeStream>& v) {
        json a = json::array();
        for (const auto& s : v) a.push_back({{"from_age", s.from_age}, {"to_age", s.to_age}, {"annual", s.annual}});
        return a;
    };
    json j = {{"name", p.name},
              {"sex", p.sex == Sex::female ? "female" : "male"},
              {"start_age", p.start_age},
              {"balances", {{"brokerage", p.brokerage}, {"ira", p.ira}, {"roth", p.roth}}},
              {"basis_ratio", p.basis_ratio},
              {"additional_income", streams(p.additional_income)},
              {"earned_income", streams(p.earned_income)},
              {"liabilities", streams(p.liabilities)},
              {"target_consumption", p.target_consumption},
              {"shortfall_weight", p.shortfall_weight},
              {"ltcg_rate", p.ltcg_rate},
              {"deposit_limit", p.deposit_limit},
              {"stock_weights", {{"brokerage", p.stock_brokerage}, {"ira", p.stock_ira}, {"roth", p.stock_roth}}}};
    return j.dump(2);
}

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("RFP_DATA_DIR"); env && *env) return env;
#ifdef RFP_DATA_DIR
    if (std::filesystem::exists(RFP_DATA_DIR)) return RFP_DATA_DIR;
#endif
    return "data";
}

Environment load_environment(const std::filesystem::path& dir) {
    return Environment{load_tax_schedule(dir / "tax_2024_single.json"),
                       load_rmd_schedule(dir / "rmd_uniform_lifetime.txt"),
                       load_life_table(dir / "lifetable_ssa2007.csv", Sex::female),
                       load_life_table(dir / "lifetable_ssa2007.csv", Sex::male),
                       load_market_models(dir / "presets/reference_models.json")};
}

} // namespace rfp
