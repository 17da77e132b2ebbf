#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lcm {

struct SourcePos {
    int line = 0;
    int column = 0;
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for any malformed litmus input. The position always refers to the
/// original source text, even when the error is detected during validation.
class ParseError : public Error {
public:
    ParseError(SourcePos pos, std::string message, std::vector<std::string> expected = {})
        : Error(format(pos, message, expected)), pos_(pos), expected_(std::move(expected)) {}

    SourcePos position() const { return pos_; }
    const std::vector<std::string>& expected() const { return expected_; }

private:
    static std::string format(SourcePos pos, const std::string& message,
                              const std::vector<std::string>& expected) {
        std::string out = std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + message;
        if (!expected.empty()) {
            out += " (expected ";
            for (std::size_t i = 0; i < expected.size(); ++i) {
                if (i) out += i + 1 == expected.size() ? " or " : ", ";
                out += expected[i];
            }
            out += ")";
        }
        return out;
    }

    SourcePos pos_;
    std::vector<std::string> expected_;
};

class TimeoutError : public Error {
public:
    TimeoutError() : Error("analysis timed out") {}
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

}  // namespace lcm
