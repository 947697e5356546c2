#pragma once

#include <stdexcept>
#include <string>

namespace gausstest {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside an operation's domain (bad cutoff, mismatched dimensions, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Truncation lost more norm than the configured budget allows.
class LeakageError : public Error {
public:
    LeakageError(const std::string& what, double achieved)
        : Error(what), achieved_(achieved) {}
    double achieved() const { return achieved_; }

private:
    double achieved_;
};

// A requested dense object would exceed the dimension budget.
class BudgetError : public Error {
public:
    using Error::Error;
};

// Parameters for which a decision procedure has no valid regime.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

// A precondition on the input state was violated (e.g. nonzero mean).
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Numerical failure (ill-conditioning, sampler envelope blow-up).
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace gausstest
