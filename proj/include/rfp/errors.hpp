#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rfp {

// Bad or inconsistent input data: profiles, presets, tables, requests.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Schema violations with one message per offending field.
class ValidationError : public DataError {
public:
    using FieldErrors = std::vector<std::pair<std::string, std::string>>;
    explicit ValidationError(FieldErrors fields) : DataError(summarize(fields)), fields_(std::move(fields)) {}
    const FieldErrors& fields() const noexcept { return fields_; }

private:
    static std::string summarize(const FieldErrors& f) {
        std::string s = "invalid input:";
        for (const auto& [field, msg] : f) s += " " + field + ": " + msg + ";";
        return s;
    }
    FieldErrors fields_;
};

// The optimizer could not produce a usable plan.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Plan is infeasible; `year` is a 1-based best-effort indicator (0 if unknown).
class InfeasiblePlan : public SolverError {
public:
    InfeasiblePlan(const std::string& what, int year) : SolverError(what), year_(year) {}
    int year() const noexcept { return year_; }

private:
    int year_;
};

// The HTTP service could not start or keep running.
class ServiceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace rfp
