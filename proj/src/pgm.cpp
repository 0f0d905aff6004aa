#include "posellm/pgm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "posellm/errors.hpp"

namespace posellm {

namespace {

// skips whitespace and '#' comments between header tokens
std::string next_token(std::istream& in) {
    std::string tok;
    while (in) {
        const int c = in.peek();
        if (c == EOF) break;
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        if (c == '#') {
            std::string junk;
            std::getline(in, junk);
            continue;
        }
        in >> tok;
        return tok;
    }
    throw ParseError("pgm: unexpected end of header");
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    const std::string magic = next_token(in);
    if (magic != "P5" && magic != "P2") {
        throw ParseError(path + ": not a PGM file (magic '" + magic + "')");
    }
    GrayImage img;
    try {
        img.w = std::stoi(next_token(in));
        img.h = std::stoi(next_token(in));
        const int maxval = std::stoi(next_token(in));
        if (img.w <= 0 || img.h <= 0 || maxval <= 0 || maxval > 255) {
            throw ParseError(path + ": unsupported PGM dimensions or maxval");
        }
        img.pixels.resize(static_cast<size_t>(img.w) * img.h);
        if (magic == "P5") {
            in.get();  // single whitespace after maxval
            std::vector<uint8_t> buf(img.pixels.size());
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
            if (!in) throw ParseError(path + ": truncated pixel data");
            for (size_t i = 0; i < buf.size(); ++i) {
                img.pixels[i] = static_cast<double>(buf[i]) / maxval;
            }
        } else {
            for (auto& p : img.pixels) {
                int v = 0;
                if (!(in >> v)) throw ParseError(path + ": truncated pixel data");
                p = static_cast<double>(v) / maxval;
            }
        }
    } catch (const std::invalid_argument&) {
        throw ParseError(path + ": malformed PGM header");
    }
    return img;
}

void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "P5\n" << img.w << " " << img.h << "\n255\n";
    for (const double v : img.pixels) {
        const double c = std::min(1.0, std::max(0.0, v));
        out.put(static_cast<char>(std::lround(c * 255.0)));
    }
    out.close();
    if (!out) throw IoError("write failed: " + path);
}

void draw_cross(GrayImage& img, double x_norm, double y_norm, int arm) {
    const int cx = static_cast<int>(std::lround(x_norm * img.w - 0.5));
    const int cy = static_cast<int>(std::lround(y_norm * img.h - 0.5));
    auto flip = [&](int x, int y) {
        if (x < 0 || x >= img.w || y < 0 || y >= img.h) return;
        double& p = img.pixels[static_cast<size_t>(y) * img.w + x];
        p = p > 0.5 ? 0.0 : 1.0;
    };
    for (int d = -arm; d <= arm; ++d) {
        flip(cx + d, cy);
        flip(cx, cy + d);
    }
}

}  // namespace posellm
