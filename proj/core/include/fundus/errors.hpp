#pragma once

#include <stdexcept>
#include <string>

namespace fundus {

// Base class for everything thrown by this library. Each concrete error
// prefixes its own name so a single what() line identifies the failure.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define FUNDUS_ERROR_TYPE(Name)                                           \
    struct Name : Error {                                                 \
        explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
    }

FUNDUS_ERROR_TYPE(ShapeMismatch);
FUNDUS_ERROR_TYPE(DegenerateOutput);
FUNDUS_ERROR_TYPE(StateMissing);
FUNDUS_ERROR_TYPE(ConfigInvalid);
FUNDUS_ERROR_TYPE(InputTooSmall);
FUNDUS_ERROR_TYPE(LabelInvalid);
FUNDUS_ERROR_TYPE(EmptyDataset);
FUNDUS_ERROR_TYPE(IoFailure);
FUNDUS_ERROR_TYPE(FormatCorrupt);
FUNDUS_ERROR_TYPE(ImageTooSmall);
FUNDUS_ERROR_TYPE(NonSquareRotation);
FUNDUS_ERROR_TYPE(ThresholdInvalid);
FUNDUS_ERROR_TYPE(DegenerateMask);
FUNDUS_ERROR_TYPE(LengthMismatch);
FUNDUS_ERROR_TYPE(Empty);
FUNDUS_ERROR_TYPE(OneClassOnly);
FUNDUS_ERROR_TYPE(IdMismatch);
FUNDUS_ERROR_TYPE(DatasetInvalid);

#undef FUNDUS_ERROR_TYPE

} // namespace fundus
