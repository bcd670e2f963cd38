#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace prism {

// Dense row-major f64 matrix. Column vectors are (n x 1), scalars (1 x 1).
struct Array {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Array() = default;
    Array(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {
        if (r < 0 || c < 0) throw std::invalid_argument("Array: negative dimension");
    }
    Array(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {
        if (v.size() != static_cast<size_t>(r) * c)
            throw std::invalid_argument("Array: data size does not match shape");
    }

    static Array scalar(double x) {
        Array a(1, 1);
        a.v[0] = x;
        return a;
    }
    static Array col(std::vector<double> data) {
        const int n = static_cast<int>(data.size());
        return Array(n, 1, std::move(data));
    }

    size_t size() const { return v.size(); }
    bool is_scalar() const { return rows == 1 && cols == 1; }
    bool is_col() const { return cols == 1; }
    bool same_shape(const Array& o) const { return rows == o.rows && cols == o.cols; }

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double l2_norm() const {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "(" << rows << "x" << cols << ")";
        return os.str();
    }
};

inline double dot_flat(const Array& a, const Array& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

}  // namespace prism
