// SPDX-License-Identifier: Apache-2.0
//
// Writes the procedural RGB image the test suite trains and evaluates on:
// smooth gradients, hard-edged disks, a frequency sweep and step edges, so
// both interpolation quality and edge handling show up in the metrics.
// Regenerating with the same arguments is byte-identical.

#include <cmath>
#include <iostream>
#include <string>

#include "dbpn/image.hpp"
#include "dbpn/image_io.hpp"

int main(int argc, char** argv) {
    if (argc < 2 || argc > 3) {
        std::cerr << "usage: make_test_image out.png [size]\n";
        return 1;
    }
    const std::string out = argv[1];
    const int n = argc == 3 ? std::stoi(argv[2]) : 128;

    dbpn::ImagePlane img(n, n, 3, dbpn::Colorspace::RGB);
    const double N = n;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double u = x / N, v = y / N;
            // Base: diagonal gradient with mild color separation.
            double r = 0.25 + 0.5 * u;
            double g = 0.25 + 0.5 * v;
            double b = 0.5 + 0.25 * (u - v);
            // Horizontal frequency sweep in the top band (chirp).
            if (v < 0.25) {
                const double s = 0.5 + 0.5 * std::sin(2.0 * 3.14159265358979 *
                                                      (4.0 + 20.0 * u) * u);
                r = g = b = s;
            }
            // Fine checkers on the right (periods 3 and 4 px): texture near
            // and above the downscaled Nyquist rate, the regime the
            // back-projection methods are supposed to help with.
            if (u >= 0.5 && v >= 0.28 && v < 0.8) {
                const int period = v < 0.54 ? 3 : 4;
                const bool on = ((x / period) + (y / period)) % 2 == 0;
                r = g = b = on ? 0.8 : 0.2;
            }
            // Two hard disks.
            const double d1 = std::hypot(u - 0.26, v - 0.5);
            const double d2 = std::hypot(u - 0.3, v - 0.72);
            if (d1 < 0.11) { r = 0.9; g = 0.2; b = 0.15; }
            if (d2 < 0.08) { r = 0.1; g = 0.65; b = 0.9; }
            // Step-edge bars bottom-left.
            if (v > 0.84 && u < 0.5) {
                const bool on = static_cast<int>(u * 16.0) % 2 == 0;
                r = g = b = on ? 0.85 : 0.1;
            }
            img.at(0, y, x) = static_cast<float>(r);
            img.at(1, y, x) = static_cast<float>(g);
            img.at(2, y, x) = static_cast<float>(b);
        }
    dbpn::save_image(img, out);
    std::cout << out << ": " << n << "x" << n << "\n";
    return 0;
}
