// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace deal {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// numerics
struct NonFiniteValue : Error { using Error::Error; };
struct NonConvergence : Error { using Error::Error; };
struct InvalidOrder : Error { using Error::Error; };

// shapes and ranks
struct ShapeMismatch : Error { using Error::Error; };
struct RankTooLarge : Error { using Error::Error; };
struct RankDeficient : Error { using Error::Error; };
struct RankOutOfRange : Error { using Error::Error; };

// differentiation
struct UnregisteredPrimitive : Error { using Error::Error; };

// training and protocol
struct NonFiniteLoss : Error { using Error::Error; };
struct InvalidPermutation : Error { using Error::Error; };
struct IncompleteMatrix : Error { using Error::Error; };

// persistence and configuration
struct IoFailure : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };
struct ChecksumFailure : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace deal
