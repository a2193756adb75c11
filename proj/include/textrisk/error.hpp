#pragma once

#include <stdexcept>
#include <string>

namespace textrisk {

// Failure categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
    config = 2,
    data = 3,
    numeric = 4,
    internal = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, ErrorKind kind, const std::string& what) {
    if (!ok) fail(kind, what);
}

} // namespace textrisk
