#ifndef HFID_ERROR_HPP
#define HFID_ERROR_HPP

#include <stdexcept>
#include <string>

namespace hfid {

enum class ErrorCode {
    InvalidArgument,
    ShapeMismatch,
    Io,
    BadMagic,
    BadVersion,
    Truncated,
    DimOverflow,
    Numeric,
    Config,
    Internal,
};

const char* error_code_name(ErrorCode code);

// All contract violations surface as this exception; the C API maps the
// code onto hfid_status values.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace hfid

#endif
