#pragma once

#include <stdexcept>
#include <string>

namespace mflow {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad numeric parameter or inconsistent dimensions.
class ParameterError : public Error {
public:
    using Error::Error;
};

// Non-finite state while flowing along X*dZ for a jump.
class JumpTransportError : public Error {
public:
    JumpTransportError(const std::string& what, double jump_time)
        : Error(what), time(jump_time) {}
    double time;
};

class IntegrationError : public Error {
public:
    using Error::Error;
};

class BreakdownError : public Error {
public:
    BreakdownError(const std::string& what, double at)
        : Error(what), time(at) {}
    double time;
};

class SpectralSelectionError : public Error {
public:
    SpectralSelectionError(const std::string& what, int reals, int pairs)
        : Error(what), real_count(reals), pair_count(pairs) {}
    int real_count;
    int pair_count;
};

class CascadeBreakdownError : public Error {
public:
    CascadeBreakdownError(const std::string& what, int lvl)
        : Error(what), level(lvl) {}
    int level;
};

class DegeneracyError : public Error {
public:
    DegeneracyError(const std::string& what, double px, double py)
        : Error(what), x(px), y(py) {}
    double x;
    double y;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::string fld, int ln = 0)
        : Error(what), field(std::move(fld)), line(ln) {}
    std::string field;
    int line;
};

}  // namespace mflow
