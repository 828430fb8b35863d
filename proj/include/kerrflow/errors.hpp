#pragma once

#include <stdexcept>
#include <string>

namespace kerrflow {

enum class ErrorKind { InvalidParameter, Config, Numerical, Resource };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error invalid_parameter(const std::string& msg) { return {ErrorKind::InvalidParameter, msg}; }
inline Error config_error(const std::string& msg) { return {ErrorKind::Config, msg}; }
inline Error numerical_error(const std::string& msg) { return {ErrorKind::Numerical, msg}; }
inline Error resource_error(const std::string& msg) { return {ErrorKind::Resource, msg}; }

// Process exit codes used by the command-line driver.
inline int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::InvalidParameter:
        case ErrorKind::Config: return 2;
        case ErrorKind::Numerical: return 3;
        case ErrorKind::Resource: return 4;
    }
    return 3;
}

} // namespace kerrflow
