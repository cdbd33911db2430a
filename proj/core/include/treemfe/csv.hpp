#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace treemfe {

// Locale-independent decimal form with 17 significant digits ('.' separator),
// enough to round-trip any double.
std::string format_double(double v);

// Comma-separated output with '\n' line endings. Cells containing a comma,
// quote, or newline are quoted RFC-4180 style.
class CsvWriter {
public:
    // Throws IoError when the file cannot be opened.
    explicit CsvWriter(const std::string& path);

    void row(const std::vector<std::string>& cells);

    // Flushes and checks the stream; throws IoError on failure.
    void close();

private:
    std::ofstream out_;
    std::string path_;
};

}  // namespace treemfe
