#pragma once

#include "rfp/profile.hpp"

#include "json.hpp"

namespace rfp {

// Structured-document front end shared by the C API and the HTTP service.
// Requests are validated field by field; failures throw ValidationError with paths
// such as "profile.balances.ira" or "count".

struct RequestLimits {
    int max_scenarios = 0;       // 0: unlimited
    bool allow_files = true;     // output_dir and file inputs
    int threads = 0;             // default worker count for simulate
};

// Timing fields are reported under "timing" and are the only nondeterministic part.
nlohmann::json handle_plan(const Environment& env, const nlohmann::json& request, const RequestLimits& limits = {});
nlohmann::json handle_simulate(const Environment& env, const nlohmann::json& request,
                               const RequestLimits& limits = {});
nlohmann::json handle_fit(const Environment& env, const nlohmann::json& request, const RequestLimits& limits = {});

// Error document for an exception: kind, message, optional field list and year.
nlohmann::json error_document(const std::exception& e);

} // namespace rfp
