#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hypotube {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Point lies outside the declared domain of validity of a field or model.
struct DomainError : Error {
    using Error::Error;
};

// A trajectory left the model domain at the given time.
struct DomainExit : Error {
    double time;
    explicit DomainExit(double t)
        : Error("trajectory left the model domain at t = " + std::to_string(t)), time(t) {}
};

struct SingularSigma : Error {
    using Error::Error;
};

// The geometric condition on the volatility does not hold at the listed points.
struct H3Violated : Error {
    std::vector<std::pair<double, double>> points;
    explicit H3Violated(std::string msg, std::vector<std::pair<double, double>> pts = {})
        : Error(std::move(msg)), points(std::move(pts)) {}
};

struct SingularFrame : Error {
    using Error::Error;
};

struct RangeError : Error {
    using Error::Error;
};

struct GridTooCoarse : Error {
    using Error::Error;
};

struct StepFailure : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct InsufficientSamples : Error {
    using Error::Error;
};

// Upper tube bound requested outside its regime of validity.
struct ValidityError : Error {
    double R, R_star;
    ValidityError(double r, double r_star)
        : Error("tube upper bound requires R <= R_*: R = " + std::to_string(r) +
                ", R_* = " + std::to_string(r_star)),
          R(r), R_star(r_star) {}
};

struct NewtonFailure : Error {
    using Error::Error;
};

struct Unreachable : Error {
    using Error::Error;
};

}  // namespace hypotube
