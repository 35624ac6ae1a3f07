#ifndef KCT_ERRORS_HPP
#define KCT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kct {

// Error taxonomy for the toolkit. Every throwing operation documents which of
// these it can raise; check-style operations report failures in their result
// struct instead of throwing.

struct NonFiniteResult : std::runtime_error {
    explicit NonFiniteResult(const std::string& what) : std::runtime_error(what) {}
};

struct DivisionByZero : std::runtime_error {
    explicit DivisionByZero(const std::string& what) : std::runtime_error(what) {}
};

struct BudgetExceeded : std::runtime_error {
    explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

struct NotReachable : std::runtime_error {
    explicit NotReachable(const std::string& what) : std::runtime_error(what) {}
};

struct QuadratureFailure : std::runtime_error {
    explicit QuadratureFailure(const std::string& what) : std::runtime_error(what) {}
};

struct MassDeficit : std::runtime_error {
    explicit MassDeficit(const std::string& what) : std::runtime_error(what) {}
};

struct GridMismatch : std::runtime_error {
    explicit GridMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct InsufficientReplications : std::runtime_error {
    explicit InsufficientReplications(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateFit : std::runtime_error {
    explicit DegenerateFit(const std::string& what) : std::runtime_error(what) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kct

#endif  // KCT_ERRORS_HPP
