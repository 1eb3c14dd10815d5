#pragma once

// Minimal CSV emission: header row, '.' decimal point, LF line endings.
// Numeric formatting is fixed so identical runs produce identical bytes.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace estrain::csv {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}
inline std::string num(std::int64_t v) { return std::to_string(v); }
inline std::string num(std::uint64_t v) { return std::to_string(v); }

class File {
public:
    explicit File(const std::filesystem::path& path) : f_(path, std::ios::trunc) {
        if (!f_) throw std::runtime_error("cannot open for writing: " + path.string());
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) f_ << ',';
            f_ << cells[i];
        }
        f_ << '\n';
    }
    void close() { f_.close(); }

private:
    std::ofstream f_;
};

}  // namespace estrain::csv
