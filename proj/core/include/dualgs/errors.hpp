#pragma once

#include <stdexcept>
#include <string>

namespace dualgs {

// Exit-code families for the CLI. Every library exception maps onto one.
enum class ErrorFamily : int {
  Generic = 1,
  Config = 2,
  Infeasible = 3,
  IllPosed = 4,
  Numerical = 5,
  StageDependency = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorFamily family, const std::string& what)
      : std::runtime_error(what), family_(family) {}
  ErrorFamily family() const { return family_; }

 private:
  ErrorFamily family_;
};

#define DUALGS_DEFINE_ERROR(Name, Family)                       \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& what)                      \
        : Error(ErrorFamily::Family, std::string(#Name ": ") + what) {} \
  }

DUALGS_DEFINE_ERROR(ShapeMismatch, Generic);
DUALGS_DEFINE_ERROR(DimensionMismatch, Generic);
DUALGS_DEFINE_ERROR(InvalidMatrix, Generic);
DUALGS_DEFINE_ERROR(SingularBlock, Numerical);
DUALGS_DEFINE_ERROR(SingularMatrix, Numerical);
DUALGS_DEFINE_ERROR(SingularInfo, Numerical);
DUALGS_DEFINE_ERROR(NotPsd, Generic);
DUALGS_DEFINE_ERROR(DomainError, Generic);
DUALGS_DEFINE_ERROR(RankDeficient, Numerical);
DUALGS_DEFINE_ERROR(ZeroDisturbance, Generic);
DUALGS_DEFINE_ERROR(MissingVariable, Generic);
DUALGS_DEFINE_ERROR(AllInfeasible, Infeasible);
DUALGS_DEFINE_ERROR(IllPosedController, IllPosed);
DUALGS_DEFINE_ERROR(CertificationFailed, Numerical);
DUALGS_DEFINE_ERROR(PerformanceViolation, Numerical);
DUALGS_DEFINE_ERROR(ConfigError, Config);
DUALGS_DEFINE_ERROR(StageDependencyError, StageDependency);
DUALGS_DEFINE_ERROR(NumericalFailure, Numerical);

#undef DUALGS_DEFINE_ERROR

}  // namespace dualgs
