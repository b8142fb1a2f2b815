#ifndef CANNIBAL_ERRORS_HPP
#define CANNIBAL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cannibal {

// Root of every error thrown by the library. The CLI maps ConfigError to
// exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CANNIBAL_DEFINE_ERROR(Name)        \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

CANNIBAL_DEFINE_ERROR(EmptyInputError);
CANNIBAL_DEFINE_ERROR(ShapeError);
CANNIBAL_DEFINE_ERROR(ContractError);
CANNIBAL_DEFINE_ERROR(NumericError);
CANNIBAL_DEFINE_ERROR(DegenerateLeafError);
CANNIBAL_DEFINE_ERROR(ConstraintDataError);
CANNIBAL_DEFINE_ERROR(ParseError);
CANNIBAL_DEFINE_ERROR(IntegrityError);
CANNIBAL_DEFINE_ERROR(ConfigError);
CANNIBAL_DEFINE_ERROR(UnknownCategoryError);
CANNIBAL_DEFINE_ERROR(UndefinedMetricError);
CANNIBAL_DEFINE_ERROR(InvalidScenarioError);

#undef CANNIBAL_DEFINE_ERROR

}  // namespace cannibal

#endif  // CANNIBAL_ERRORS_HPP
