#ifndef SADDLELAB_ERRORS_HPP
#define SADDLELAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace saddlelab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define SADDLELAB_DEFINE_ERROR(Name) \
  struct Name : Error {              \
    using Error::Error;              \
  }

SADDLELAB_DEFINE_ERROR(NotHyperbolic);
SADDLELAB_DEFINE_ERROR(NotUnimodular);
SADDLELAB_DEFINE_ERROR(NotDiagonalizable);
SADDLELAB_DEFINE_ERROR(DegeneratePeriod);
SADDLELAB_DEFINE_ERROR(BadGeometry);
SADDLELAB_DEFINE_ERROR(NotHyperbolicLinearPart);
SADDLELAB_DEFINE_ERROR(OverlappingSupports);
SADDLELAB_DEFINE_ERROR(FrameMismatch);
SADDLELAB_DEFINE_ERROR(NotAFixedPoint);
SADDLELAB_DEFINE_ERROR(SurgeryTooLarge);
SADDLELAB_DEFINE_ERROR(ZeroVector);
SADDLELAB_DEFINE_ERROR(ConeEscape);
SADDLELAB_DEFINE_ERROR(StrongConesUncertified);
SADDLELAB_DEFINE_ERROR(ToleranceUnreachable);
SADDLELAB_DEFINE_ERROR(ResolutionTooCoarse);
SADDLELAB_DEFINE_ERROR(BoundaryTooClose);
SADDLELAB_DEFINE_ERROR(UnsupportedDimension);
SADDLELAB_DEFINE_ERROR(DimensionTooLarge);
SADDLELAB_DEFINE_ERROR(InversionFailed);

#undef SADDLELAB_DEFINE_ERROR

struct InfeasiblePlateau : Error {
  InfeasiblePlateau(const std::string& msg, double largest_feasible)
      : Error(msg), largest_feasible_delta(largest_feasible) {}
  double largest_feasible_delta;
};

struct SearchFailed : Error {
  SearchFailed(const std::string& msg, int at_step)
      : Error(msg), step(at_step) {}
  int step;
};

struct ParseError : Error {
  ParseError(const std::string& msg, int at_line) : Error(msg), line(at_line) {}
  int line;
};

}  // namespace saddlelab

#endif
