#pragma once

#include <stdexcept>
#include <string>

namespace chns {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Input to the inverse Neumann Laplacian (or a dual norm) had nonzero mean.
class NotZeroMean : public Error {
public:
    explicit NotZeroMean(double mean)
        : Error("NotZeroMean: input mean " + std::to_string(mean) + " is not zero"), mean_(mean) {}
    double mean() const { return mean_; }

private:
    double mean_;
};

/// An iterative or nonlinear solver failed to reach its tolerance.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double last_residual, int iterations)
        : Error(what + " (residual " + std::to_string(last_residual) + " after " +
                std::to_string(iterations) + " iterations)"),
          last_residual_(last_residual), iterations_(iterations) {}
    double last_residual() const { return last_residual_; }
    int iterations() const { return iterations_; }

private:
    double last_residual_;
    int iterations_;
};

/// The phase field reached the singular set of the logarithmic potential.
class SeparationError : public Error {
public:
    SeparationError(const std::string& what, double separation)
        : Error(what + " (min separation " + std::to_string(separation) + ")"),
          separation_(separation) {}
    double separation() const { return separation_; }

private:
    double separation_;
};

/// Malformed configuration text; carries the 1-based line number (0 when not line-specific).
class ConfigError : public Error {
public:
    ConfigError(int line, const std::string& what)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// File input/output failure.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace chns
