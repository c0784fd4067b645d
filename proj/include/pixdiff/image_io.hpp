#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "pixdiff/grid.hpp"

namespace pixdiff {

// Binary PGM (P5, 1 channel) / PPM (P6, 3 channels) with maxval 255, plus a
// sidecar text file "<path>.meta" recording the exact normalization epsilon,
// so a stored image round-trips to the same normalized values.

namespace detail {
inline int read_pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments, then reads one non-negative integer.
    int c = in.peek();
    while (c == '#' || std::isspace(c)) {
        if (c == '#')
            in.ignore(1 << 20, '\n');
        else
            in.get();
        c = in.peek();
    }
    int value = -1;
    in >> value;
    return value;
}
}  // namespace detail

inline std::string sidecar_path(const std::string& image_path) { return image_path + ".meta"; }

// `grid` holds normalized values; the stored bytes are the de-normalized raw
// pixels so that an 8-bit round trip is lossless at the byte level.
inline void save_image(const std::string& path, const Grid& grid, double epsilon) {
    grid.shape.validate();
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "save_image: cannot open " + path);
    out << (grid.shape.channels == 3 ? "P6" : "P5") << "\n"
        << grid.shape.width << " " << grid.shape.height << "\n255\n";
    for (double v : grid.v) {
        double raw = v - epsilon;
        if (raw < 0.0) raw = 0.0;
        if (raw > 1.0) raw = 1.0;
        const int byte = static_cast<int>(std::lround(raw * 255.0));
        out.put(static_cast<char>(byte));
    }
    require(out.good(), "save_image: write failed for " + path);

    std::ofstream meta(sidecar_path(path));
    require(meta.good(), "save_image: cannot open sidecar for " + path);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", epsilon);
    meta << "epsilon " << buf << "\n";
}

struct LoadedImage {
    Image image;     // normalized values in (0,1]
    double epsilon;  // normalization epsilon from the sidecar (or argument)
};

// Reads a P5/P6 file; epsilon comes from the sidecar when present, otherwise
// from `fallback_epsilon`.
inline LoadedImage load_image(const std::string& path, double fallback_epsilon = 1e-3) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "load_image: cannot open " + path);
    std::string magic;
    in >> magic;
    require(magic == "P5" || magic == "P6", "load_image: unsupported PNM magic in " + path);
    const int channels = (magic == "P6") ? 3 : 1;
    const int w = detail::read_pnm_token(in);
    const int h = detail::read_pnm_token(in);
    const int maxval = detail::read_pnm_token(in);
    require(w > 0 && h > 0, "load_image: bad dimensions in " + path);
    require(maxval == 255, "load_image: only maxval 255 is supported");
    in.get();  // single whitespace after header

    double epsilon = fallback_epsilon;
    std::ifstream meta(sidecar_path(path));
    if (meta.good()) {
        std::string key;
        double value = 0.0;
        if (meta >> key >> value && key == "epsilon") epsilon = value;
    }

    Grid raw(Shape{w, h, channels});
    for (double& v : raw.v) {
        const int c = in.get();
        require(c != EOF, "load_image: truncated pixel data in " + path);
        v = static_cast<double>(c) / 255.0;
    }
    return LoadedImage{normalize_image(raw, epsilon), epsilon};
}

}  // namespace pixdiff
