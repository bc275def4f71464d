#pragma once

#include <stdexcept>
#include <string>

namespace vcmesh {

// Invalid caller-supplied data: bad indices, mismatched shapes, missing files.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed text input; the message carries the offending line number.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally valid input that cannot produce a usable result,
// e.g. an up-sampling radius too small to reach any sampled vertex.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace vcmesh
