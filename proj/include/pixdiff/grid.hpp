#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pixdiff {

// Contract check used at every public operation boundary.
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

struct Shape {
    int width = 0;
    int height = 0;
    int channels = 1;

    std::size_t size() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(channels);
    }
    bool operator==(const Shape&) const = default;

    void validate() const {
        require(width > 0 && height > 0, "Shape: width and height must be positive");
        require(channels == 1 || channels == 3, "Shape: channels must be 1 or 3");
    }
};

// Dense row-major (channel-interleaved) grid of 64-bit values. Clean images,
// noisy diffusion states, per-pixel schedules and noise draws all share this
// container; value-range invariants are enforced by the operations that
// produce or consume them, not by the container itself.
struct Grid {
    Shape shape;
    std::vector<double> v;

    Grid() = default;
    explicit Grid(Shape s, double fill = 0.0) : shape(s) {
        shape.validate();  // before size(): a negative extent must not reach the allocator
        v.assign(shape.size(), fill);
    }

    std::size_t size() const { return v.size(); }
    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    void fill(double value) { std::fill(v.begin(), v.end(), value); }

    double min() const {
        double m = v.empty() ? 0.0 : v[0];
        for (double x : v)
            if (x < m) m = x;
        return m;
    }
    double max() const {
        double m = v.empty() ? 0.0 : v[0];
        for (double x : v)
            if (x > m) m = x;
        return m;
    }
    double mean() const {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    }
    // Population variance across all elements.
    double variance() const {
        if (v.empty()) return 0.0;
        const double m = mean();
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return s / static_cast<double>(v.size());
    }
};

// A clean normalized image (values in (0,1]) and an unconstrained noise/state
// grid share storage; the aliases document intent at call sites.
using Image = Grid;
using NoiseField = Grid;

inline void require_same_shape(const Grid& a, const Grid& b, const char* what) {
    require(a.shape == b.shape, std::string(what) + ": shape mismatch");
}

// Shift raw [0,1] pixel data by epsilon and clamp at 1 so that every value is
// strictly positive; zero-valued pixels would otherwise make the per-pixel
// schedule degenerate (alpha = 1 exactly, the pixel never diffuses).
inline Image normalize_image(const Grid& raw, double epsilon) {
    require(epsilon > 0.0 && epsilon < 1.0, "normalize_image: epsilon must be in (0,1)");
    for (double x : raw.v)
        require(x >= 0.0 && x <= 1.0, "normalize_image: raw values must lie in [0,1]");
    Image out = raw;
    for (double& x : out.v) {
        x += epsilon;
        if (x > 1.0) x = 1.0;
    }
    return out;
}

inline void require_normalized(const Image& x0, const char* what) {
    for (double x : x0.v)
        require(x > 0.0 && x <= 1.0, std::string(what) + ": image values must lie in (0,1]");
}

}  // namespace pixdiff
