#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace reskit {
namespace io {

/// Round-trip-exact decimal form of a double (17 significant digits).
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// CSV writer with a fixed header, LF newlines, and 17-digit numbers.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open output file: " + path);
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
        columns_ = header.size();
    }

    void row(std::initializer_list<double> values) {
        row(std::vector<double>(values));
    }
    void row(const std::vector<double>& values) {
        if (values.size() != columns_)
            throw std::logic_error("CsvWriter: wrong number of columns");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << format_double(values[i]);
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
    std::size_t columns_ = 0;
};

/// Minimal ordered JSON document for reports: insertion-ordered keys and
/// 17-digit doubles, so identical runs serialize byte-identically.
class Json {
public:
    static Json object() { Json j; j.kind_ = Kind::object; return j; }
    static Json array() { Json j; j.kind_ = Kind::array; return j; }
    Json() = default;
    Json(double v) : kind_(Kind::number), num_(v) {}
    Json(int v) : kind_(Kind::integer), int_(v) {}
    Json(long v) : kind_(Kind::integer), int_(v) {}
    Json(bool v) : kind_(Kind::boolean), bool_(v) {}
    Json(const char* v) : kind_(Kind::string), str_(v) {}
    Json(std::string v) : kind_(Kind::string), str_(std::move(v)) {}

    Json& set(const std::string& key, Json value) {
        members_.emplace_back(key, std::move(value));
        return *this;
    }
    Json& push(Json value) {
        items_.push_back(std::move(value));
        return *this;
    }

    std::string dump(int indent = 2) const {
        std::string out;
        write(out, indent, 0);
        out.push_back('\n');
        return out;
    }

private:
    enum class Kind { null, number, integer, boolean, string, object, array };

    static void escape(std::string& out, const std::string& s) {
        out.push_back('"');
        for (char c : s) {
            switch (c) {
                case '"': out += "\\\""; break;
                case '\\': out += "\\\\"; break;
                case '\n': out += "\\n"; break;
                case '\t': out += "\\t"; break;
                default: out.push_back(c);
            }
        }
        out.push_back('"');
    }

    void write(std::string& out, int indent, int depth) const {
        const std::string pad(static_cast<std::size_t>(indent) * (depth + 1), ' ');
        const std::string close_pad(static_cast<std::size_t>(indent) * depth, ' ');
        switch (kind_) {
            case Kind::null: out += "null"; break;
            case Kind::number: out += format_double(num_); break;
            case Kind::integer: out += std::to_string(int_); break;
            case Kind::boolean: out += bool_ ? "true" : "false"; break;
            case Kind::string: escape(out, str_); break;
            case Kind::object: {
                if (members_.empty()) { out += "{}"; break; }
                out += "{\n";
                for (std::size_t i = 0; i < members_.size(); ++i) {
                    out += pad;
                    escape(out, members_[i].first);
                    out += ": ";
                    members_[i].second.write(out, indent, depth + 1);
                    if (i + 1 < members_.size()) out.push_back(',');
                    out.push_back('\n');
                }
                out += close_pad + "}";
                break;
            }
            case Kind::array: {
                if (items_.empty()) { out += "[]"; break; }
                out += "[\n";
                for (std::size_t i = 0; i < items_.size(); ++i) {
                    out += pad;
                    items_[i].write(out, indent, depth + 1);
                    if (i + 1 < items_.size()) out.push_back(',');
                    out.push_back('\n');
                }
                out += close_pad + "]";
                break;
            }
        }
    }

    Kind kind_ = Kind::null;
    double num_ = 0.0;
    long int_ = 0;
    bool bool_ = false;
    std::string str_;
    std::vector<std::pair<std::string, Json>> members_;
    std::vector<Json> items_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << content;
}

/// Worker-pool size: the RESKIT_THREADS environment variable overrides the
/// configured value; zero means hardware concurrency.
inline int worker_count(int configured) {
    if (const char* env = std::getenv("RESKIT_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return configured;
}

}  // namespace io
}  // namespace reskit
