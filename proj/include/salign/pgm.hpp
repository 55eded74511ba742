#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "salign/error.hpp"
#include "salign/heatmap.hpp"

namespace salign {

namespace detail {

// Reads one PNM header token, skipping whitespace and '#' comments.
inline std::string pnm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (!std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            break;
        }
    }
    while ((c = in.get()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(c));
    if (tok.empty()) throw DataError("pgm: truncated header");
    return tok;
}

inline int pnm_int(std::istream& in, const char* what) {
    std::string tok = pnm_token(in);
    try {
        size_t pos = 0;
        int v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw DataError(std::string("pgm: malformed ") + what + " '" + tok + "'");
    }
}

}  // namespace detail

// 8-bit binary grayscale PGM (magic P5, maxval 255) only.
inline Heatmap load_grayscale(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("pgm: cannot open '" + path + "'");
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != 'P' || m1 != '5')
        throw DataError("pgm: unsupported magic in '" + path + "' (want P5)");
    int w = detail::pnm_int(in, "width");
    int h = detail::pnm_int(in, "height");
    int maxval = detail::pnm_int(in, "maxval");
    if (w <= 0 || h <= 0) throw DataError("pgm: non-positive dimensions in '" + path + "'");
    if (maxval != 255) throw DataError("pgm: maxval must be 255 in '" + path + "'");
    std::vector<uint8_t> raw(static_cast<size_t>(w) * h);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw DataError("pgm: truncated pixel data in '" + path + "'");
    Heatmap hm(w, h);
    for (size_t i = 0; i < raw.size(); ++i) hm.values[i] = static_cast<double>(raw[i]);
    return hm;
}

// Values rounded half-up; header is exactly "P5\n<w> <h>\n255\n".
inline void save_grayscale(const Heatmap& hm, const std::string& path) {
    for (double v : hm.values)
        if (v < 0.0 || v > 255.0) throw DataError("pgm: value out of range [0, 255]");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("pgm: cannot write '" + path + "'");
    out << "P5\n" << hm.width << ' ' << hm.height << "\n255\n";
    std::vector<uint8_t> raw(hm.values.size());
    for (size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<uint8_t>(std::floor(hm.values[i] + 0.5));
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw DataError("pgm: write failed for '" + path + "'");
}

}  // namespace salign
