#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ccge {

// Base class for everything thrown by the library. `category()` drives the
// CLI exit-code table.
class Error : public std::runtime_error {
public:
    enum class Category { Config, Data, Convergence, Internal };

    explicit Error(const std::string& what, Category c = Category::Internal)
        : std::runtime_error(what), category_(c) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, Category::Config) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what, Category::Data) {}
};

class DimensionError : public Error {
public:
    DimensionError(const std::string& axis, std::size_t expected, std::size_t got)
        : Error("dimension mismatch on " + axis + ": expected " + std::to_string(expected) +
                    ", got " + std::to_string(got),
                Category::Data),
          axis_(axis) {}

    const std::string& axis() const noexcept { return axis_; }

private:
    std::string axis_;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(what, Category::Config) {}
};

class NumericError : public Error {
public:
    NumericError(const std::string& what, long subject = -1)
        : Error(subject >= 0 ? what + " (subject " + std::to_string(subject) + ")" : what,
                Category::Internal),
          subject_(subject) {}

    long subject() const noexcept { return subject_; }

private:
    long subject_;
};

class SeparationError : public Error {
public:
    explicit SeparationError(const std::string& what) : Error(what, Category::Convergence) {}
};

class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, std::vector<double> last_iterate, double score_norm)
        : Error(what, Category::Convergence),
          last_iterate_(std::move(last_iterate)),
          score_norm_(score_norm) {}

    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
    double score_norm() const noexcept { return score_norm_; }

private:
    std::vector<double> last_iterate_;
    double score_norm_;
};

class CovarianceError : public Error {
public:
    explicit CovarianceError(const std::string& what) : Error(what, Category::Convergence) {}
};

class ExcessiveBootstrapFailure : public Error {
public:
    ExcessiveBootstrapFailure(const std::string& what, std::vector<std::string> diagnostics)
        : Error(what, Category::Convergence), diagnostics_(std::move(diagnostics)) {}

    const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<std::string> diagnostics_;
};

class ScenarioError : public Error {
public:
    explicit ScenarioError(const std::string& what) : Error(what, Category::Config) {}
};

class DegenerateScoreError : public Error {
public:
    explicit DegenerateScoreError(const std::string& what) : Error(what, Category::Data) {}
};

class InsufficientData : public Error {
public:
    explicit InsufficientData(const std::string& what) : Error(what, Category::Data) {}
};

}  // namespace ccge
