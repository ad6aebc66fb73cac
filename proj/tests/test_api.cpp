#include "doctest.h"
#include "rfp/api_service.hpp"
#include "rfp/errors.hpp"

#include "httplib.h"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

using namespace rfp;
using nlohmann::json;

namespace {

std::shared_ptr<const Environment> shared_env() {
    static const auto e = std::make_shared<const Environment>(load_environment(RFP_DATA_DIR));
    return e;
}

json profile_doc(const char* name) {
    std::ifstream in(std::filesystem::path(RFP_DATA_DIR) / "profiles" / name);
    return json::parse(in);
}

std::string plan_body(const json& profile) { return json{{"profile", profile}}.dump(); }

} // namespace

TEST_CASE("plan endpoint") {
    ApiService api(shared_env(), {});
    SUBCASE("upper profile") {
        const auto r = api.plan(plan_body(profile_doc("upper.json")));
        REQUIRE(r.status == 200);
        CHECK(r.body["status"] == "optimal");
        CHECK(r.body["c"].get<double>() == doctest::Approx(58400.0).epsilon(1e-8));
        CHECK(r.body["tightness"].get<double>() <= 1e-6);
        CHECK(r.body.contains("objective"));
        CHECK(r.body.contains("q"));
        const int T = r.body["horizon"].get<int>();
        CHECK(r.body["years"]["B"].size() == static_cast<std::size_t>(T + 1));
        CHECK(r.body["years"]["rc"].size() == static_cast<std::size_t>(T));
        CHECK(r.body["config"]["profile"]["target_consumption"] == 58400.0);
        CHECK_FALSE(r.body.contains("timing"));
        CHECK(r.seconds < 2.0);
    }
    SUBCASE("negative balance") {
        json p = profile_doc("upper.json");
        p["balances"]["ira"] = -100.0;
        const auto r = api.plan(plan_body(p));
        CHECK(r.status == 422);
        CHECK(r.body["error"] == "validation");
        REQUIRE(r.body["fields"].size() == 1);
        CHECK(r.body["fields"][0]["path"] == "profile.balances.ira");
    }
    SUBCASE("schema violations") {
        CHECK(api.plan("{\"policy\": {}}").status == 422);
        CHECK(api.plan("[1, 2]").status == 422);
        CHECK(api.plan("{not json").status == 400);
        json req{{"profile", profile_doc("upper.json")}, {"output_dir", "/tmp"}};
        CHECK(api.plan(req.dump()).status == 422);
        req = {{"profile", "data/profiles/upper.json"}};
        CHECK(api.plan(req.dump()).status == 422);
        req = {{"profile", profile_doc("upper.json")}, {"policy", {{"forecast", "psychic"}}}};
        const auto r = api.plan(req.dump());
        CHECK(r.status == 422);
        CHECK(r.body["fields"][0]["path"] == "policy.forecast");
    }
    SUBCASE("infeasible plan reports the year") {
        // a liability in the third year that no balance can cover
        json p = profile_doc("lower.json");
        p["target_consumption"] = 1000.0;
        p["liabilities"] = json::array({{{"from_age", 67}, {"to_age", 67}, {"annual", 5e6}}});
        const auto r = api.plan(plan_body(p));
        CHECK(r.status == 409);
        CHECK(r.body["error"] == "infeasible");
        CHECK(r.body["year"] == 3);
    }
    SUBCASE("identical requests give identical responses") {
        const auto a = api.plan(plan_body(profile_doc("lower.json")));
        const auto b = api.plan(plan_body(profile_doc("lower.json")));
        CHECK(a.body.dump() == b.body.dump());
    }
}

TEST_CASE("simulate endpoint") {
    ServiceConfig cfg;
    ApiService api(shared_env(), cfg);
    SUBCASE("count over the cap") {
        const auto r = api.simulate(json{{"profile", profile_doc("upper.json")}, {"count", 2001}}.dump());
        CHECK(r.status == 422);
        CHECK(r.body["fields"][0]["path"] == "count");
        CHECK(api.simulate(json{{"profile", profile_doc("upper.json")}, {"count", 0}}.dump()).status == 422);
    }
    SUBCASE("same seed, same payload") {
        const std::string body = json{{"profile", profile_doc("lower.json")}, {"count", 10}, {"seed", 5}}.dump();
        const auto a = api.simulate(body);
        const auto b = api.simulate(body);
        REQUIRE(a.status == 200);
        CHECK(a.body.dump() == b.body.dump());
        CHECK(a.body["config"]["count"] == 10);
        CHECK(a.body["bands"]["mpc"]["age"].size() > 0);
        CHECK(a.body["trajectory_violations"]["count"] == 0);
    }
    SUBCASE("200 upper-profile scenarios") {
        const auto r = api.simulate(json{{"profile", profile_doc("upper.json")}, {"count", 200}, {"seed", 11}}.dump());
        REQUIRE(r.status == 200);
        CHECK(r.seconds < 30.0);
        const double median = r.body["relative_bequest"]["p50"].get<double>();
        CHECK(median >= 0.95);
        CHECK(median <= 1.15);
    }
    CHECK(api.health()["status"] == "ok");
}

TEST_CASE("busy and degraded health") {
    SUBCASE("a second simulation is refused while one runs") {
        ApiService api(shared_env(), {});
        const std::string body = json{{"profile", profile_doc("upper.json")}, {"count", 60}}.dump();
        ServiceResponse first;
        std::thread t([&] { first = api.simulate(body); });
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
        while (!api.health()["busy"].get<bool>() && std::chrono::steady_clock::now() < deadline)
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        const auto h = api.health();
        CHECK(h["busy"] == true);
        CHECK(h["status"] == "ok");
        CHECK(api.simulate(body).status == 429);
        t.join();
        CHECK(first.status == 200);
        CHECK(api.health()["busy"] == false);
    }
    SUBCASE("a failed run degrades the service") {
        auto env = std::make_shared<Environment>(*shared_env());
        env->models.gmm = {{1.0}, {std::nan("")}, {0.0}};
        ApiService api(env, {});
        CHECK(api.health()["status"] == "ok");
        const auto r = api.simulate(json{{"profile", profile_doc("lower.json")}, {"count", 2}}.dump());
        CHECK(r.status == 500);
        CHECK(api.health()["status"] == "degraded");
        // validation failures do not count
        ApiService other(shared_env(), {});
        other.simulate("{}");
        CHECK(other.health()["status"] == "ok");
    }
}

TEST_CASE("http round trip") {
    ServiceConfig cfg;
    cfg.port = 0;
    ApiService api(shared_env(), cfg);
    api.bind();
    REQUIRE(api.port() > 0);
    std::thread server([&] { api.run(); });

    httplib::Client cli("127.0.0.1", api.port());
    cli.set_read_timeout(30, 0);
    auto health = cli.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body)["status"] == "ok");

    auto plan = cli.Post("/plan", {{"Origin", "http://localhost:5173"}}, plan_body(profile_doc("upper.json")),
                         "application/json");
    REQUIRE(plan);
    CHECK(plan->status == 200);
    CHECK(plan->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
    CHECK(json::parse(plan->body)["c"].get<double>() == doctest::Approx(58400.0));

    auto other = cli.Post("/plan", {{"Origin", "http://evil.example"}}, plan_body(profile_doc("upper.json")),
                          "application/json");
    REQUIRE(other);
    CHECK_FALSE(other->has_header("Access-Control-Allow-Origin"));

    auto preflight = cli.Options("/simulate", {{"Origin", "http://localhost:5173"}});
    REQUIRE(preflight);
    CHECK(preflight->status == 204);
    CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

    auto bad = cli.Post("/simulate", json{{"count", 5}}.dump(), "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 422);

    // the port is taken now
    ServiceConfig same = cfg;
    same.port = api.port();
    ApiService second(shared_env(), same);
    CHECK_THROWS_AS(second.bind(), ServiceError);

    api.stop();
    server.join();
}
