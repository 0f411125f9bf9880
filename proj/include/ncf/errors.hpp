#pragma once

#include <stdexcept>
#include <string>

namespace ncf {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user-facing configuration: out-of-range tolerance, infeasible
// speed program, malformed config file.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Simulation could not terminate (horizon exceeded without collision,
// standstill or trigger).
class SimError : public Error {
public:
    using Error::Error;
};

}  // namespace ncf
