#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tensormor {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed argument: bad shape, out-of-range index, mode-set misuse.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A parameter point outside the declared parameter box.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Dense materialization would exceed the configured entry cap.
class CapacityError : public Error {
public:
    CapacityError(const std::string& what, std::size_t requested, std::size_t cap)
        : Error(what), requested_(requested), cap_(cap) {}

    std::size_t requested() const noexcept { return requested_; }
    std::size_t cap() const noexcept { return cap_; }

private:
    std::size_t requested_;
    std::size_t cap_;
};

/// Factorization or solve broke down (non-SPD pivot, singular system, ...).
class NumericalBreakdown : public Error {
public:
    explicit NumericalBreakdown(const std::string& what, long pivot = -1, double condition = 0.0)
        : Error(what), pivot_(pivot), condition_(condition) {}

    /// Offending pivot index, -1 when not applicable.
    long pivot() const noexcept { return pivot_; }
    /// Condition estimate, 0 when not computed.
    double condition() const noexcept { return condition_; }

private:
    long pivot_;
    double condition_;
};

/// Iterative solver residual blew up.
class DivergenceError : public NumericalBreakdown {
public:
    using NumericalBreakdown::NumericalBreakdown;
};

/// Greedy/interpolation procedures hitting a linearly dependent candidate.
class DegeneracyError : public NumericalBreakdown {
public:
    DegeneracyError(const std::string& what, std::size_t step)
        : NumericalBreakdown(what, static_cast<long>(step)), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Coefficient function that cannot be used by the requested pathway.
class UnsupportedCoefficient : public Error {
public:
    using Error::Error;
};

}  // namespace tensormor
