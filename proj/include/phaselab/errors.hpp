#pragma once

#include <stdexcept>
#include <string>

namespace phaselab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration or input data. The CLI maps these to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

// A computation that could not produce a trustworthy answer. Exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

#define PHASELAB_DEFINE_ERROR(Name, Base)  \
    class Name : public Base {             \
    public:                                \
        using Base::Base;                  \
    };

PHASELAB_DEFINE_ERROR(InvalidArgument, InputError)
PHASELAB_DEFINE_ERROR(ConfigError, InputError)
PHASELAB_DEFINE_ERROR(MalformedRow, InputError)
PHASELAB_DEFINE_ERROR(OutOfRange, InputError)
PHASELAB_DEFINE_ERROR(ReflectivityOutOfRange, InputError)
PHASELAB_DEFINE_ERROR(OutOfCalibration, InputError)
PHASELAB_DEFINE_ERROR(ZeroField, InputError)
PHASELAB_DEFINE_ERROR(DegenerateRates, InputError)
PHASELAB_DEFINE_ERROR(InsufficientPhaseSpan, InputError)

PHASELAB_DEFINE_ERROR(NoBoundMode, NumericalError)
PHASELAB_DEFINE_ERROR(GridTooCoarse, NumericalError)
PHASELAB_DEFINE_ERROR(SingularMatrix, NumericalError)
PHASELAB_DEFINE_ERROR(NonIdentifiable, NumericalError)
PHASELAB_DEFINE_ERROR(NotConverged, NumericalError)
PHASELAB_DEFINE_ERROR(InsufficientFringes, NumericalError)
PHASELAB_DEFINE_ERROR(BranchAmbiguity, NumericalError)
PHASELAB_DEFINE_ERROR(EmptyFeasibleSet, NumericalError)

#undef PHASELAB_DEFINE_ERROR

}  // namespace phaselab
