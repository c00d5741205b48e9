#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace airm {

// Error hierarchy. The CLI maps ParamError/IoError to exit code 2 and
// NumericError to exit code 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ParamError : public Error {
public:
    explicit ParamError(const std::string& msg) : Error(msg) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg, uint64_t batch_seed = 0)
        : Error(msg), batch_seed(batch_seed) {}
    uint64_t batch_seed;
};

// Mask perturbation could not reach the requested IoU band.
class PerturbError : public Error {
public:
    PerturbError(const std::string& msg, double best_achieved)
        : Error(msg), best_achieved(best_achieved) {}
    double best_achieved;
};

// One-shot diagnostics: emit a warning once per process per tag.
void warn_once(const std::string& tag, const std::string& msg);

}  // namespace airm
