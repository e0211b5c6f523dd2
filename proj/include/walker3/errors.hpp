#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace walker3 {

// Base for everything thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised while building or parsing expressions. `offset` is the byte offset
// into the source text, or npos for errors from programmatic construction.
struct ParseError : Error {
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    ParseError(const std::string& msg, std::size_t offset_ = npos)
        : Error(offset_ == npos ? msg : msg + " (at offset " + std::to_string(offset_) + ")"),
          offset(offset_) {}

    std::size_t offset;
};

// Numeric domain failure during evaluation (log of non-positive value, ...).
// `source_pos` points at the offending node in the original source when known.
struct EvalError : Error {
    EvalError(const std::string& msg, long source_pos_ = -1)
        : Error(source_pos_ < 0 ? msg : msg + " (expression offset " + std::to_string(source_pos_) + ")"),
          source_pos(source_pos_) {}

    long source_pos;
};

// Geometric preconditions: mismatched base points, degenerate induced metric,
// lightlike normals, incompatible causal character.
struct GeometryError : Error {
    using Error::Error;
};

// ODE integration did not reach the requested accuracy or left the domain.
struct IntegrationError : Error {
    using Error::Error;
};

// Scenario/config problems. Carries file, line and key for CLI diagnostics.
struct ConfigError : Error {
    ConfigError(const std::string& msg, std::string file_ = "", int line_ = 0, std::string key_ = "")
        : Error(format(msg, file_, line_, key_)), file(std::move(file_)), line(line_), key(std::move(key_)) {}

    std::string file;
    int line;
    std::string key;

private:
    static std::string format(const std::string& msg, const std::string& file, int line, const std::string& key) {
        std::string out;
        if (!file.empty()) {
            out += file;
            if (line > 0) out += ":" + std::to_string(line);
            out += ": ";
        }
        out += msg;
        if (!key.empty()) out += " (key '" + key + "')";
        return out;
    }
};

}  // namespace walker3
