#pragma once

#include <string>
#include <vector>

namespace posellm {

struct GrayImage {
    int h{0};
    int w{0};
    std::vector<double> pixels;  // row-major, [0,1]
};

GrayImage read_pgm(const std::string& path);                  // P2 or P5, maxval <= 255
void write_pgm(const std::string& path, const GrayImage& img);  // P5

// Inverted cross marker centered at normalized coordinates.
void draw_cross(GrayImage& img, double x_norm, double y_norm, int arm = 3);

}  // namespace posellm
