#pragma once

#include <stdexcept>
#include <string>

namespace bdclt {

/// Invalid chain or observable parameters (probabilities outside (0,1), c >= 1/2, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Partial sums of the reversible weights keep growing under doubling of the truncation.
class DivergentMeasure : public std::runtime_error {
 public:
  DivergentMeasure(const std::string& what, double growth)
      : std::runtime_error(what), growth_(growth) {}
  /// Relative increase of the partial sum over the last doubling.
  double growth() const noexcept { return growth_; }

 private:
  double growth_;
};

class NotInL2 : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotCentered : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ToleranceNotReached : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bdclt
