#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "walker3/errors.hpp"

namespace walker3 {

// Shortest round-trip decimal rendering; identical input bits always yield
// identical text, which is what the byte-stable report contract relies on.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // collapse the two signed zeros
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Ordered key/value tree: keys keep insertion order in both the hierarchical
// text rendering and the JSON output.
class Report {
public:
    Report& child(std::string_view key) {
        auto node = std::make_shared<Report>();
        items_.emplace_back(std::string(key), node);
        return *node;
    }

    void set(std::string_view key, std::string_view value) {
        items_.emplace_back(std::string(key), std::string(value));
    }

    void set(std::string_view key, const char* value) { set(key, std::string_view(value)); }
    void set(std::string_view key, double value) { set(key, format_double(value)); }
    void set(std::string_view key, int value) { set(key, std::to_string(value)); }
    void set(std::string_view key, long value) { set(key, std::to_string(value)); }
    void set(std::string_view key, std::size_t value) { set(key, std::to_string(value)); }
    void set(std::string_view key, bool value) { set(key, value ? "true" : "false"); }

    // Append another report's items at this level (insertion order preserved).
    void merge(const Report& other) {
        for (const auto& item : other.items_) items_.push_back(item);
    }

    std::string to_text(int indent = 0) const {
        std::string out;
        const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
        for (const auto& [key, value] : items_) {
            if (std::holds_alternative<std::string>(value)) {
                out += pad + key + ": " + std::get<std::string>(value) + "\n";
            } else {
                out += pad + key + ":\n";
                out += std::get<std::shared_ptr<Report>>(value)->to_text(indent + 1);
            }
        }
        return out;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& [key, value] : items_) {
            if (std::holds_alternative<std::string>(value))
                j[key] = std::get<std::string>(value);
            else
                j[key] = std::get<std::shared_ptr<Report>>(value)->to_json();
        }
        return j;
    }

private:
    using Value = std::variant<std::string, std::shared_ptr<Report>>;
    std::vector<std::pair<std::string, Value>> items_;
};

// Flat comma-separated table with a header row; one row per grid point.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_string() const {
        std::string out;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out += ",";
            out += header[i];
        }
        out += "\n";
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out += ",";
                out += row[i];
            }
            out += "\n";
        }
        return out;
    }
};

struct OutputFile {
    std::string name;     // relative to the output directory
    std::string content;
};

inline void write_output_files(const std::string& dir, const std::vector<OutputFile>& files) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
    for (const auto& f : files) {
        const fs::path path = fs::path(dir) / f.name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot open '" + path.string() + "' for writing");
        out << f.content;
        if (!out) throw Error("write failed for '" + path.string() + "'");
    }
}

}  // namespace walker3
