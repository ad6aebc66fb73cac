#include "rfp/rfp.h"

#include "rfp/api_service.hpp"
#include "rfp/errors.hpp"
#include "rfp/requests.hpp"

#include <cstring>
#include <memory>
#include <string>

struct rfp_engine {
    std::shared_ptr<const rfp::Environment> env;
};

struct rfp_server {
    std::unique_ptr<rfp::ApiService> service;
};

namespace {

thread_local std::string last_error;

rfp_status code_for(const std::exception& e) {
    if (dynamic_cast<const rfp::SolverError*>(&e)) return RFP_SOLVER_ERROR;
    if (dynamic_cast<const rfp::DataError*>(&e)) return RFP_INPUT_ERROR;
    if (dynamic_cast<const nlohmann::json::exception*>(&e)) return RFP_INPUT_ERROR;
    if (dynamic_cast<const rfp::ServiceError*>(&e)) return RFP_SERVICE_ERROR;
    return RFP_INTERNAL_ERROR;
}

char* dup(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p) std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

template <class F>
rfp_status call(const rfp_engine* engine, const char* request, char** response, F&& handler) {
    last_error.clear();
    if (response) *response = nullptr;
    if (!engine || !request || !response) {
        last_error = "null argument";
        return RFP_INPUT_ERROR;
    }
    try {
        const auto req = nlohmann::json::parse(request);
        *response = dup(handler(*engine->env, req).dump(2));
        return RFP_OK;
    } catch (const nlohmann::json::parse_error& e) {
        last_error = std::string("request is not valid JSON: ") + e.what();
        *response = dup(nlohmann::json{{"error", "parse"}, {"message", last_error}}.dump(2));
        return RFP_INPUT_ERROR;
    } catch (const std::exception& e) {
        last_error = e.what();
        *response = dup(rfp::error_document(e).dump(2));
        return code_for(e);
    }
}

} // namespace

extern "C" {

const char* rfp_version(void) { return "1.0.0"; }

const char* rfp_last_error(void) { return last_error.c_str(); }

rfp_status rfp_engine_create(const char* data_dir, const char* preset_path, rfp_engine** out) {
    last_error.clear();
    if (!out) return RFP_INPUT_ERROR;
    *out = nullptr;
    try {
        const auto dir = data_dir && *data_dir ? std::filesystem::path(data_dir) : rfp::default_data_dir();
        auto env = std::make_shared<rfp::Environment>(rfp::load_environment(dir));
        if (preset_path && *preset_path) env->models = rfp::load_market_models(preset_path);
        *out = new rfp_engine{std::move(env)};
        return RFP_OK;
    } catch (const std::exception& e) {
        last_error = e.what();
        return code_for(e);
    }
}

void rfp_engine_destroy(rfp_engine* engine) { delete engine; }

rfp_status rfp_plan(const rfp_engine* engine, const char* request, char** response) {
    return call(engine, request, response,
                [](const rfp::Environment& env, const nlohmann::json& req) { return rfp::handle_plan(env, req); });
}

rfp_status rfp_simulate(const rfp_engine* engine, const char* request, char** response) {
    return call(engine, request, response, [](const rfp::Environment& env, const nlohmann::json& req) {
        return rfp::handle_simulate(env, req);
    });
}

rfp_status rfp_fit(const rfp_engine* engine, const char* request, char** response) {
    return call(engine, request, response,
                [](const rfp::Environment& env, const nlohmann::json& req) { return rfp::handle_fit(env, req); });
}

void rfp_string_free(char* s) { std::free(s); }

rfp_status rfp_server_create(const rfp_engine* engine, const char* config, rfp_server** out) {
    last_error.clear();
    if (!engine || !out) return RFP_INPUT_ERROR;
    *out = nullptr;
    try {
        rfp::ServiceConfig cfg;
        if (config && *config) {
            const auto j = nlohmann::json::parse(config);
            cfg.host = j.value("host", cfg.host);
            cfg.port = j.value("port", cfg.port);
            cfg.max_scenarios = j.value("max_scenarios", cfg.max_scenarios);
            cfg.threads = j.value("threads", cfg.threads);
            cfg.allowed_origin = j.value("allowed_origin", cfg.allowed_origin);
            if (cfg.port < 0 || cfg.port > 65535) throw rfp::DataError("port must lie in [0, 65535]");
            if (cfg.max_scenarios < 1) throw rfp::DataError("max_scenarios must be at least 1");
        }
        auto service = std::make_unique<rfp::ApiService>(engine->env, cfg);
        service->bind();
        *out = new rfp_server{std::move(service)};
        return RFP_OK;
    } catch (const std::exception& e) {
        last_error = e.what();
        return code_for(e);
    }
}

int rfp_server_port(const rfp_server* server) { return server ? server->service->port() : 0; }

rfp_status rfp_server_run(rfp_server* server) {
    last_error.clear();
    if (!server) return RFP_INPUT_ERROR;
    try {
        server->service->run();
        return RFP_OK;
    } catch (const std::exception& e) {
        last_error = e.what();
        return code_for(e);
    }
}

void rfp_server_stop(rfp_server* server) {
    if (server) server->service->stop();
}

void rfp_server_destroy(rfp_server* server) { delete server; }

} // extern "C"
