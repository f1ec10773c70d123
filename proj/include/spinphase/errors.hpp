#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace spinphase {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SPINPHASE_DEFINE_ERROR(Name)          \
    class Name : public Error {               \
    public:                                   \
        using Error::Error;                   \
    }

// spin-core
SPINPHASE_DEFINE_ERROR(RangeError);
SPINPHASE_DEFINE_ERROR(InvalidStateError);
SPINPHASE_DEFINE_ERROR(BlochNormError);
SPINPHASE_DEFINE_ERROR(DimensionError);
SPINPHASE_DEFINE_ERROR(SupportError);
SPINPHASE_DEFINE_ERROR(UnreachableCoherence);

// dynamics
SPINPHASE_DEFINE_ERROR(InvalidChannelError);
SPINPHASE_DEFINE_ERROR(DetailedBalanceError);
SPINPHASE_DEFINE_ERROR(StepCountError);
SPINPHASE_DEFINE_ERROR(BasisError);
SPINPHASE_DEFINE_ERROR(ZeroRateError);

// entropy
SPINPHASE_DEFINE_ERROR(PurityDivergence);
SPINPHASE_DEFINE_ERROR(TemperatureDivergence);

#undef SPINPHASE_DEFINE_ERROR

// Non-fatal diagnostics. They travel with results instead of being thrown.
struct Warning {
    enum class Kind {
        Positivity, // integrator produced a state with a negative eigenvalue below -1e-8
        QFloor,     // quadrature nodes with Q below the floor were dropped
    };
    Kind kind;
    std::string message;
    double magnitude = 0.0; // min eigenvalue, or excluded solid-angle mass
};

using Warnings = std::vector<Warning>;

} // namespace spinphase
