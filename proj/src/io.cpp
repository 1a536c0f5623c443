#include "lkld/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>
#include <unistd.h>

namespace lkld {

std::string format_sig(double value, int digits) {
    char buf[64];
    if (value == 0.0) value = 0.0;  // print -0 as 0
    std::snprintf(buf, sizeof(buf), "%.*g", digits, value);
    return buf;
}

double round_sig(double value, int digits) {
    if (!std::isfinite(value) || value == 0.0) return value;
    return std::strtod(format_sig(value, digits).c_str(), nullptr);
}

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t line_end = pos;
        // find end of the logical line, honoring quotes
        bool quoted = false;
        while (line_end < text.size()) {
            char c = text[line_end];
            if (c == '"') quoted = !quoted;
            else if (c == '\n' && !quoted) break;
            ++line_end;
        }
        std::string_view line = text.substr(pos, line_end - pos);
        pos = line_end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;

        std::vector<std::string> fields;
        std::string field;
        bool in_quotes = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            char c = line[i];
            if (in_quotes) {
                if (c == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        field += '"';
                        ++i;
                    } else {
                        in_quotes = false;
                    }
                } else {
                    field += c;
                }
            } else if (c == '"') {
                in_quotes = true;
            } else if (c == ',') {
                fields.push_back(std::move(field));
                field.clear();
            } else {
                field += c;
            }
        }
        fields.push_back(std::move(field));
        rows.push_back(std::move(fields));
    }
    return rows;
}

double parse_real(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("expected a number, got an empty string");
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || errno == ERANGE)
        throw std::invalid_argument("not a number: '" + text + "'");
    return v;
}

std::vector<double> parse_real_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_real(item));
    return out;
}

std::vector<double> parse_range(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw std::invalid_argument("range must be start:stop:step, got '" + text + "'");
    const double start = parse_real(parts[0]);
    const double stop = parse_real(parts[1]);
    const double step = parse_real(parts[2]);
    if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("range step must be positive");
    if (!(start < stop)) throw std::invalid_argument("range start must be below stop");
    std::vector<double> values;
    for (std::size_t i = 0;; ++i) {
        const double v = start + static_cast<double>(i) * step;
        if (!(v < stop - 1e-12)) break;
        values.push_back(v);
    }
    return values;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    namespace fs = std::filesystem;
    const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            out.close();
            std::error_code ec;
            fs::remove(tmp, ec);
            throw std::runtime_error("write failed for '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignore;
        fs::remove(tmp, ignore);
        throw std::runtime_error("cannot rename into '" + path.string() + "': " + ec.message());
    }
}

}  // namespace lkld
