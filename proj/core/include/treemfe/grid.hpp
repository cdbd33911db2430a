#pragma once

#include <cstddef>
#include <vector>

namespace treemfe {

// Dense 2-D array of doubles, row-major. Used for per-time-slice tables
// indexed by (stock node or path, common-factor state).
class Grid2 {
public:
    Grid2() = default;
    Grid2(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows) * cols, fill) {}

    double& operator()(int r, int c) { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return v_[static_cast<std::size_t>(r) * cols_ + c]; }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    const std::vector<double>& data() const { return v_; }
    std::vector<double>& data() { return v_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

// Dense 4-D array of doubles. Layout: (stock node or path, y-state, z-state,
// agent type), the innermost index varying fastest.
class Grid4 {
public:
    Grid4() = default;
    Grid4(int ns, int ny, int nz, int nt, double fill = 0.0)
        : ns_(ns), ny_(ny), nz_(nz), nt_(nt),
          v_(static_cast<std::size_t>(ns) * ny * nz * nt, fill) {}

    double& operator()(int s, int y, int z, int t) { return v_[idx(s, y, z, t)]; }
    double operator()(int s, int y, int z, int t) const { return v_[idx(s, y, z, t)]; }

    int ns() const { return ns_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    int nt() const { return nt_; }
    const std::vector<double>& data() const { return v_; }

private:
    std::size_t idx(int s, int y, int z, int t) const {
        return ((static_cast<std::size_t>(s) * ny_ + y) * nz_ + z) * nt_ + t;
    }
    int ns_ = 0, ny_ = 0, nz_ = 0, nt_ = 0;
    std::vector<double> v_;
};

}  // namespace treemfe
