#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace twincher {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Caller broke a documented precondition (bad shape, bad dimension, bad
/// option value).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Observation does not lie in the image of the forward process.
class ImageMembershipError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Query budget exhausted.
class BudgetError : public std::runtime_error {
 public:
  BudgetError(std::uint64_t used, std::uint64_t budget)
      : std::runtime_error("query budget exhausted: used " + std::to_string(used) + " of " +
                           std::to_string(budget)),
        used_(used),
        budget_(budget) {}

  std::uint64_t used() const { return used_; }
  std::uint64_t budget() const { return budget_; }

 private:
  std::uint64_t used_;
  std::uint64_t budget_;
};

/// A forward evaluation produced NaN or infinity.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Jacobian of the forward process lost rank.
class DegeneracyError : public std::runtime_error {
 public:
  DegeneracyError(const std::string& what, double sigma_min)
      : std::runtime_error(what + " (sigma_min = " + std::to_string(sigma_min) + ")"),
        sigma_min_(sigma_min) {}
  double sigma_min() const { return sigma_min_; }

 private:
  double sigma_min_;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace twincher
