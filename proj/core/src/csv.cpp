#include "treemfe/csv.hpp"

#include <charconv>
#include <system_error>

#include "treemfe/errors.hpp"

namespace treemfe {

std::string format_double(double v) {
    char buf[64];
    const auto res =
        std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    if (res.ec != std::errc{}) throw IoError("failed to format double");
    return std::string(buf, res.ptr);
}

namespace {

bool needs_quoting(const std::string& s) {
    return s.find_first_of(",\"\n\r") != std::string::npos;
}

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

CsvWriter::CsvWriter(const std::string& path)
    : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoError("cannot open " + path + " for writing");
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << (needs_quoting(cells[i]) ? quoted(cells[i]) : cells[i]);
    }
    out_ << '\n';
}

void CsvWriter::close() {
    out_.flush();
    if (!out_) throw IoError("write failure on " + path_);
    out_.close();
}

}  // namespace treemfe
