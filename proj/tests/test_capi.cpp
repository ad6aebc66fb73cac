#include "doctest.h"
#include "rfp/rfp.h"

#include "json.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <thread>

using nlohmann::json;

namespace {

struct Engine {
    rfp_engine* e = nullptr;
    Engine() { REQUIRE(rfp_engine_create(RFP_DATA_DIR, nullptr, &e) == RFP_OK); }
    ~Engine() { rfp_engine_destroy(e); }
};

struct Result {
    rfp_status status;
    json doc;
};

template <class F>
Result call(F fn, const rfp_engine* e, const std::string& request) {
    char* out = nullptr;
    const rfp_status s = fn(e, request.c_str(), &out);
    REQUIRE(out != nullptr);
    Result r{s, json::parse(out)};
    rfp_string_free(out);
    return r;
}

json profile_doc(const char* name) {
    std::ifstream in(std::string(RFP_DATA_DIR) + "/profiles/" + name);
    return json::parse(in);
}

} // namespace

TEST_CASE("engine lifecycle") {
    CHECK(std::strlen(rfp_version()) > 0);
    rfp_engine* e = nullptr;
    CHECK(rfp_engine_create("/nonexistent/data", nullptr, &e) == RFP_INPUT_ERROR);
    CHECK(e == nullptr);
    CHECK(std::strlen(rfp_last_error()) > 0);
    CHECK(rfp_engine_create(RFP_DATA_DIR, "/nonexistent/preset.json", &e) == RFP_INPUT_ERROR);
    CHECK(rfp_engine_create(RFP_DATA_DIR, nullptr, nullptr) != RFP_OK);
    rfp_engine_destroy(nullptr);
    rfp_string_free(nullptr);
}

TEST_CASE("plan through the C interface") {
    Engine eng;
    SUBCASE("upper profile") {
        const auto r = call(rfp_plan, eng.e, json{{"profile", profile_doc("upper.json")}}.dump());
        REQUIRE(r.status == RFP_OK);
        CHECK(r.doc["c"].get<double>() == doctest::Approx(58400.0));
        CHECK(r.doc["tightness"].get<double>() <= 1e-6);
        CHECK(r.doc.contains("timing"));
    }
    SUBCASE("malformed request") {
        const auto r = call(rfp_plan, eng.e, "{oops");
        CHECK(r.status == RFP_INPUT_ERROR);
        CHECK(r.doc.contains("message"));
        const auto v = call(rfp_plan, eng.e, json{{"profile", {{"start_age", "old"}}}}.dump());
        CHECK(v.status == RFP_INPUT_ERROR);
        CHECK(v.doc["error"] == "validation");
        CHECK(v.doc["fields"].size() > 0);
    }
    SUBCASE("infeasible") {
        json p = profile_doc("lower.json");
        p["target_consumption"] = 1000.0;
        p["liabilities"] = json::array({{{"from_age", 67}, {"to_age", 67}, {"annual", 5e6}}});
        const auto r = call(rfp_plan, eng.e, json{{"profile", p}}.dump());
        CHECK(r.status == RFP_SOLVER_ERROR);
        CHECK(r.doc["error"] == "infeasible");
        CHECK(r.doc["year"] == 3);
    }
    SUBCASE("null arguments") {
        char* out = nullptr;
        CHECK(rfp_plan(nullptr, "{}", &out) == RFP_INPUT_ERROR);
        rfp_string_free(out);
        out = nullptr;
        CHECK(rfp_plan(eng.e, nullptr, &out) == RFP_INPUT_ERROR);
        rfp_string_free(out);
    }
}

TEST_CASE("simulate through the C interface") {
    Engine eng;
    const std::string req = json{{"profile", profile_doc("lower.json")}, {"count", 8}, {"seed", 3}}.dump();
    auto a = call(rfp_simulate, eng.e, req);
    auto b = call(rfp_simulate, eng.e, req);
    REQUIRE(a.status == RFP_OK);
    a.doc.erase("timing");
    b.doc.erase("timing");
    CHECK(a.doc.dump() == b.doc.dump());
    CHECK(a.doc["relative_bequest"]["p50"].get<double>() > 0.0);
}

TEST_CASE("fit through the C interface") {
    Engine eng;
    std::mt19937_64 rng(42);
    SUBCASE("mixture on returns") {
        std::normal_distribution<double> lo(-0.15, 0.1), hi(0.12, 0.12);
        std::bernoulli_distribution pick(0.25);
        json returns = json::array();
        for (int i = 0; i < 2000; ++i) returns.push_back(pick(rng) ? lo(rng) : hi(rng));
        const auto r = call(rfp_fit, eng.e, json{{"market_returns", returns}, {"components", 2}, {"seed", 1}}.dump());
        REQUIRE(r.status == RFP_OK);
        CHECK(r.doc["gmm"]["mean"].get<double>() == doctest::Approx(0.0525).epsilon(0.2));
        CHECK(r.doc["preset"].contains("gmm"));
    }
    SUBCASE("vector autoregression on rates") {
        std::normal_distribution<double> noise(0.0, 0.004);
        json rates = json::array();
        double t = 0.04, i = 0.03;
        for (int k = 0; k < 400; ++k) {
            rates.push_back({t, i});
            t = 0.01 + 0.7 * t + 0.05 * i + noise(rng);
            i = 0.01 + 0.6 * i + noise(rng);
        }
        const auto r = call(rfp_fit, eng.e, json{{"rates", rates}}.dump());
        REQUIRE(r.status == RFP_OK);
        CHECK(r.doc["var"]["spectral_radius"].get<double>() < 1.0);
    }
    SUBCASE("nothing to fit") {
        const auto r = call(rfp_fit, eng.e, "{}");
        CHECK(r.status == RFP_INPUT_ERROR);
    }
}

TEST_CASE("server lifecycle") {
    Engine eng;
    rfp_server* s = nullptr;
    REQUIRE(rfp_server_create(eng.e, "{\"port\": 0}", &s) == RFP_OK);
    const int port = rfp_server_port(s);
    CHECK(port > 0);

    rfp_server* dup = nullptr;
    const std::string cfg = json{{"port", port}}.dump();
    CHECK(rfp_server_create(eng.e, cfg.c_str(), &dup) == RFP_SERVICE_ERROR);
    CHECK(dup == nullptr);
    CHECK(rfp_server_create(eng.e, "{\"port\": \"x\"}", &dup) == RFP_INPUT_ERROR);

    rfp_status run_status = RFP_INTERNAL_ERROR;
    std::thread t([&] { run_status = rfp_server_run(s); });
    rfp_server_stop(s);
    t.join();
    CHECK(run_status == RFP_OK);
    rfp_server_destroy(s);
}
