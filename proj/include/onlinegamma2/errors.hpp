#pragma once

#include <stdexcept>
#include <string>

namespace onlinegamma2 {

// Base for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define ONLINEGAMMA2_ERROR(Name)  \
  struct Name : Error {           \
    using Error::Error;           \
  }

ONLINEGAMMA2_ERROR(NumericalFailure);
ONLINEGAMMA2_ERROR(NotPSD);
ONLINEGAMMA2_ERROR(NotPD);
ONLINEGAMMA2_ERROR(NotInSpan);
ONLINEGAMMA2_ERROR(InvalidState);
ONLINEGAMMA2_ERROR(BadInput);
ONLINEGAMMA2_ERROR(BadSpec);
ONLINEGAMMA2_ERROR(ContractViolation);
ONLINEGAMMA2_ERROR(PipelineError);
ONLINEGAMMA2_ERROR(BudgetViolation);
ONLINEGAMMA2_ERROR(AnalystError);
ONLINEGAMMA2_ERROR(ScaleGuard);
ONLINEGAMMA2_ERROR(WalkFailed);

#undef ONLINEGAMMA2_ERROR

}  // namespace onlinegamma2
