#pragma once

#include <stdexcept>
#include <string>

namespace fawn {

/// Invalid argument or inconsistent inputs (bad config, spec mismatch, ...).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Grid specs of paired volumes/fields do not agree.
class SpecMismatchError : public InputError {
public:
    using InputError::InputError;
};

/// File-level failures: unreadable path, bad magic, short payload.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fawn
