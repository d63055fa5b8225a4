#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace txfreq {

// Input outside an operation's contract (domain violation, non-positive rho, ...).
class RejectedInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The constraint set {sum x <= c, a.x <= d, x >= gamma} is empty or malformed.
class InfeasibleConstraints : public RejectedInput {
 public:
  using RejectedInput::RejectedInput;
};

// An iterative numerical routine hit its iteration cap.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, std::vector<double> last_iterate)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)) {}

  const std::vector<double>& last_iterate() const { return last_iterate_; }

 private:
  std::vector<double> last_iterate_;
};

// A state-machine precondition was broken by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace txfreq
