#pragma once

#include <string>
#include <vector>

#include "glint/vec.hpp"

namespace glint {

// Linear RGB float image, row-major, origin at the top-left.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<Vec3> texels;

    Image() = default;
    Image(int w, int h, const Vec3& fill = Vec3(0.0f))
        : width(w), height(h), texels(static_cast<size_t>(w) * h, fill) {}

    Vec3& at(int x, int y) { return texels[static_cast<size_t>(y) * width + x]; }
    const Vec3& at(int x, int y) const { return texels[static_cast<size_t>(y) * width + x]; }

    // Bilinear with horizontal wrap and vertical clamp (equirectangular use).
    Vec3 sample_bilinear(float u, float v) const;
};

// Rec.709 luma of linear RGB.
inline float luminance(const Vec3& rgb) {
    return 0.2126f * rgb.x + 0.7152f * rgb.y + 0.0722f * rgb.z;
}

// Radiance RGBE (.hdr) and PFM readers. Throw std::runtime_error on
// unsupported format, malformed header or non-finite/negative texels.
Image load_image(const std::string& path);
Image load_hdr(const std::string& path);
Image load_pfm(const std::string& path);

void write_pfm(const Image& img, const std::string& path);

// 8-bit sRGB PNG; linear values are scaled by 2^exposure_stops first.
void write_png(const Image& img, const std::string& path, float exposure_stops = 0.0f);

float linear_to_srgb(float v);

// Decodes one RGBE byte quadruple; exposed for the decode oracle tests.
Vec3 rgbe_to_rgb(unsigned char r, unsigned char g, unsigned char b, unsigned char e);

}  // namespace glint
