// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace qrnn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define QRNN_ERROR_TYPE(NAME)          \
  struct NAME : Error {                \
    using Error::Error;                \
  };

QRNN_ERROR_TYPE(CycleDetected)
QRNN_ERROR_TYPE(TypeConflict)
QRNN_ERROR_TYPE(RewireMismatch)
QRNN_ERROR_TYPE(ParseError)
QRNN_ERROR_TYPE(SchemaVersionError)
QRNN_ERROR_TYPE(InvalidQuantParams)
QRNN_ERROR_TYPE(RangeError)
QRNN_ERROR_TYPE(ShapeMismatch)
QRNN_ERROR_TYPE(ConfigError)
QRNN_ERROR_TYPE(ShapeChainError)
QRNN_ERROR_TYPE(MissingFeed)
QRNN_ERROR_TYPE(UnsupportedOp)
QRNN_ERROR_TYPE(BodySignatureMismatch)
QRNN_ERROR_TYPE(SignatureMismatch)
QRNN_ERROR_TYPE(FixpointNotReached)
QRNN_ERROR_TYPE(UnsupportedActivation)

#undef QRNN_ERROR_TYPE

}  // namespace qrnn
