#pragma once

#include <stdexcept>
#include <string>

namespace stabssm {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
    using Error::Error;
};
struct NotPositiveDefinite : Error {
    using Error::Error;
};
struct SingularSystem : Error {
    using Error::Error;
};
struct NumericalFailure : Error {
    using Error::Error;
};
struct RankDeficient : Error {
    using Error::Error;
};
struct CholeskyFailure : Error {
    using Error::Error;
};
struct UnstablePair : Error {
    using Error::Error;
};
struct AsymmetryTooLarge : Error {
    using Error::Error;
};
struct GainConditionViolated : Error {
    using Error::Error;
};
struct NotACertificate : Error {
    using Error::Error;
};
struct DegreesTooSmall : Error {
    using Error::Error;
};
struct MomentUndefined : Error {
    using Error::Error;
};
struct UnsupportedFamily : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct NonFiniteState : Error {
    using Error::Error;
};
struct NonFiniteMoments : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

}  // namespace stabssm
