#pragma once

#include <stdexcept>
#include <string>

namespace ncd {

// Base class for everything this library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ZeroVector : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct NotSymmetric : Error { using Error::Error; };
struct NonFinite : Error { using Error::Error; };
struct ViewMismatch : Error { using Error::Error; };
struct LabelOutOfRange : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };
struct IsolatedPoint : Error { using Error::Error; };
struct CropTooSmall : Error { using Error::Error; };
struct EmptyBatch : Error { using Error::Error; };
struct Malformed : Error { using Error::Error; };
struct PartitionViolation : Error { using Error::Error; };
struct ConfigInvalid : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct CheckpointMissing : Error { using Error::Error; };

} // namespace ncd
