#include "rfp/api_service.hpp"

#include "rfp/errors.hpp"
#include "rfp/requests.hpp"

#include "httplib.h"

#include <chrono>
#include <sstream>
#include <thread>

namespace rfp {

using nlohmann::json;

struct ApiService::Http {
    httplib::Server server;
};

namespace {

ServiceResponse failure(int status, const std::exception& e) {
    return {status, error_document(e), 0.0};
}

// Requests are validated before any work starts, so any other failure is internal.
// A failed simulation run marks the service degraded.
template <class F>
ServiceResponse guarded(const std::string& body, std::atomic<bool>* degraded, F&& handler) {
    const auto t0 = std::chrono::steady_clock::now();
    json request;
    try {
        request = json::parse(body);
    } catch (const json::parse_error& e) {
        return {400, {{"error", "parse"}, {"message", e.what()}}, 0.0};
    }
    ServiceResponse r;
    try {
        r.body = handler(request);
        // timing would make identical requests differ
        r.body.erase("timing");
        r.body.erase("files");
    } catch (const ValidationError& e) {
        return failure(422, e);
    } catch (const InfeasiblePlan& e) {
        return failure(409, e);
    } catch (const std::exception& e) {
        if (degraded) *degraded = true;
        return failure(500, e);
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

} // namespace

ApiService::ApiService(std::shared_ptr<const Environment> env, ServiceConfig cfg)
    : env_(std::move(env)), cfg_(std::move(cfg)), http_(std::make_unique<Http>()) {
    auto& svr = http_->server;
    svr.set_payload_max_length(1 << 20);
    // no SO_REUSEPORT: a second instance on the same port must fail to bind
    svr.set_socket_options([](auto sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    auto cors = [this](const httplib::Request& req, httplib::Response& res) {
        const auto origin = req.get_header_value("Origin");
        if (cfg_.allowed_origin == "*") {
            res.set_header("Access-Control-Allow-Origin", "*");
        } else if (!origin.empty() && origin == cfg_.allowed_origin) {
            res.set_header("Access-Control-Allow-Origin", origin);
            res.set_header("Vary", "Origin");
        }
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
    };
    auto reply = [cors](const httplib::Request& req, httplib::Response& res, const ServiceResponse& r) {
        cors(req, res);
        res.status = r.status;
        std::ostringstream secs;
        secs << r.seconds;
        res.set_header("X-Compute-Seconds", secs.str());
        res.set_content(r.body.dump(), "application/json");
    };

    svr.Post("/plan", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(req, res, plan(req.body));
    });
    svr.Post("/simulate", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(req, res, simulate(req.body));
    });
    svr.Get("/health", [this, cors](const httplib::Request& req, httplib::Response& res) {
        cors(req, res);
        res.set_content(health().dump(), "application/json");
    });
    svr.Options(R"(/.*)", [cors](const httplib::Request& req, httplib::Response& res) {
        cors(req, res);
        res.status = 204;
    });
}

ApiService::~ApiService() { stop(); }

ServiceResponse ApiService::plan(const std::string& body) {
    RequestLimits limits;
    limits.allow_files = false;
    return guarded(body, nullptr, [&](const json& req) { return handle_plan(*env_, req, limits); });
}

ServiceResponse ApiService::simulate(const std::string& body) {
    bool expected = false;
    if (!simulating_.compare_exchange_strong(expected, true)) {
        return {429, {{"error", "busy"}, {"message", "a simulation is already running"}}, 0.0};
    }
    struct Release {
        std::atomic<bool>& flag;
        ~Release() { flag = false; }
    } release{simulating_};
    RequestLimits limits;
    limits.allow_files = false;
    limits.max_scenarios = cfg_.max_scenarios;
    limits.threads = cfg_.threads;
    return guarded(body, &degraded_, [&](const json& req) { return handle_simulate(*env_, req, limits); });
}

json ApiService::health() const {
    return {{"status", degraded_ ? "degraded" : "ok"}, {"busy", simulating_.load()},
            {"max_scenarios", cfg_.max_scenarios}};
}

void ApiService::bind() {
    auto& svr = http_->server;
    int port = cfg_.port;
    if (port == 0) {
        port = svr.bind_to_any_port(cfg_.host);
    } else if (!svr.bind_to_port(cfg_.host, port)) {
        port = -1;
    }
    if (port <= 0) throw ServiceError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    bound_port_ = port;
}

int ApiService::port() const { return bound_port_; }

void ApiService::run() {
    if (bound_port_ <= 0) throw ServiceError("service is not bound");
    run_active_ = true;
    if (stop_requested_) {
        run_active_ = false;
        return;
    }
    const bool ok = http_->server.listen_after_bind();
    run_active_ = false;
    if (!ok && !stop_requested_) throw ServiceError("service stopped with an error");
}

// A stop that arrives before the listener starts would otherwise be lost.
void ApiService::stop() {
    stop_requested_ = true;
    while (run_active_ && !http_->server.is_running()) std::this_thread::yield();
    if (http_->server.is_running()) http_->server.stop();
}

bool ApiService::running() const { return http_->server.is_running(); }

} // namespace rfp
