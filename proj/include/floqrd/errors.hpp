#pragma once

#include <stdexcept>
#include <string>

namespace floqrd {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonConvergence : Error {
    using Error::Error;
};

struct DegenerateOrbit : Error {
    using Error::Error;
};

struct IntegratorFailure : Error {
    using Error::Error;
};

struct NonSimpleNeutralMode : Error {
    using Error::Error;
};

struct GridTooCoarse : Error {
    using Error::Error;
};

struct InsufficientPoints : Error {
    using Error::Error;
};

struct PerturbationTooWide : Error {
    using Error::Error;
};

struct BlowUp : Error {
    double time;
    explicit BlowUp(double t)
        : Error("solution blew up at t = " + std::to_string(t)), time(t) {}
};

struct OutOfTube : Error {
    using Error::Error;
};

struct EmptyWindow : Error {
    using Error::Error;
};

struct UnderResolved : Error {
    using Error::Error;
};

struct ConfigError : Error {
    int line;
    ConfigError(int line_, const std::string& msg)
        : Error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

} // namespace floqrd
