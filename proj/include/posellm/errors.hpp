#pragma once

#include <stdexcept>
#include <string>

namespace posellm {

// Error taxonomy; the CLI maps these onto exit codes (see tools/).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when training hits a non-finite loss; carries the optimizer step.
struct TrainAbort : std::runtime_error {
    explicit TrainAbort(long long step_, const std::string& what_)
        : std::runtime_error(what_), step(step_) {}
    long long step;
};

}  // namespace posellm
