#pragma once

#include "rfp/profile.hpp"

#include "json.hpp"

#include <atomic>
#include <memory>
#include <string>

namespace rfp {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0: any free port
    int max_scenarios = 2000;
    int threads = 0;  // simulate worker pool; 0: hardware concurrency
    std::string allowed_origin = "http://localhost:5173";  // "*" allows any origin
};

struct ServiceResponse {
    int status = 200;
    nlohmann::json body;
    double seconds = 0.0;
};

// POST /plan, POST /simulate, GET /health. Handlers are usable without a socket.
class ApiService {
public:
    ApiService(std::shared_ptr<const Environment> env, ServiceConfig cfg);
    ~ApiService();
    ApiService(const ApiService&) = delete;
    ApiService& operator=(const ApiService&) = delete;

    ServiceResponse plan(const std::string& body);
    ServiceResponse simulate(const std::string& body);
    nlohmann::json health() const;

    // Throws ServiceError when the address is taken.
    void bind();
    int port() const;
    // Blocks until stop(); bind() first.
    void run();
    void stop();
    bool running() const;

private:
    struct Http;
    std::shared_ptr<const Environment> env_;
    ServiceConfig cfg_;
    std::unique_ptr<Http> http_;
    std::atomic<bool> simulating_{false};
    std::atomic<bool> degraded_{false};
    std::atomic<int> bound_port_{0};
    std::atomic<bool> run_active_{false};
    std::atomic<bool> stop_requested_{false};
};

} // namespace rfp
