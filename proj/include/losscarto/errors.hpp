#pragma once

#include <stdexcept>
#include <string>

namespace losscarto {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LOSSCARTO_DEFINE_ERROR(Name) \
  class Name : public Error {        \
   public:                           \
    using Error::Error;              \
  }

LOSSCARTO_DEFINE_ERROR(IndexError);
LOSSCARTO_DEFINE_ERROR(ShapeError);
LOSSCARTO_DEFINE_ERROR(DegreeError);
LOSSCARTO_DEFINE_ERROR(UnsupportedDivisorError);
LOSSCARTO_DEFINE_ERROR(BudgetError);
LOSSCARTO_DEFINE_ERROR(ZeroPolynomialError);
LOSSCARTO_DEFINE_ERROR(BoundaryError);
LOSSCARTO_DEFINE_ERROR(AdjacencyError);
LOSSCARTO_DEFINE_ERROR(SamplingError);
LOSSCARTO_DEFINE_ERROR(SpuriousKinkError);
LOSSCARTO_DEFINE_ERROR(HarvestError);
LOSSCARTO_DEFINE_ERROR(DegeneracyError);
LOSSCARTO_DEFINE_ERROR(ContaminationError);
LOSSCARTO_DEFINE_ERROR(RecoveryError);
LOSSCARTO_DEFINE_ERROR(ValidationError);
LOSSCARTO_DEFINE_ERROR(IoError);
LOSSCARTO_DEFINE_ERROR(UsageError);

#undef LOSSCARTO_DEFINE_ERROR

/// Raised by a budgeted oracle when the next query would exceed its budget.
class OracleBudgetExhausted : public BudgetError {
 public:
  OracleBudgetExhausted() : BudgetError("oracle query budget exhausted") {}
};

}  // namespace losscarto
