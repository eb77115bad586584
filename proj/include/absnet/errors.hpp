#pragma once

#include <stdexcept>
#include <string>

namespace absnet {

// Exit-status class an error maps to at the command line.
enum class ErrorKind { Usage = 1, Data = 2, Numeric = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const noexcept { return kind_; }
    // Stable identifier such as "MalformedXml" or "CorruptCheckpoint".
    const std::string& code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

inline Error usage_error(const std::string& code, const std::string& what) {
    return Error(ErrorKind::Usage, code, what);
}
inline Error data_error(const std::string& code, const std::string& what) {
    return Error(ErrorKind::Data, code, what);
}
inline Error numeric_error(const std::string& code, const std::string& what) {
    return Error(ErrorKind::Numeric, code, what);
}

}  // namespace absnet
