#pragma once

#include <stdexcept>
#include <string>

namespace mdmlp {

// Shape or size disagreement between operands.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid configuration value (out-of-range hyperparameter, unknown key/mode).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Problem with an input file or dataset (parse failure, segment too short).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Failure during optimization (divergence, non-finite gradient).
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse that violates a documented precondition.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

} // namespace mdmlp
