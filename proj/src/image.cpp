#include "glint/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace glint {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_or_throw(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw std::runtime_error("file not found: " + path);
    return f;
}

[[noreturn]] void malformed(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": " + what);
}

void validate_texels(const Image& img, const std::string& path) {
    for (const Vec3& t : img.texels) {
        if (!is_finite(t) || t.x < 0.0f || t.y < 0.0f || t.z < 0.0f)
            malformed(path, "non-finite or negative texel");
    }
}

std::string read_token(FILE* f) {
    std::string tok;
    int c;
    while ((c = std::fgetc(f)) != EOF && std::isspace(c)) {
    }
    if (c == EOF) return tok;
    tok.push_back(static_cast<char>(c));
    while ((c = std::fgetc(f)) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(c));
    return tok;
}

bool host_is_little_endian() {
    const uint16_t one = 1;
    return *reinterpret_cast<const uint8_t*>(&one) == 1;
}

void byteswap_floats(std::vector<float>& data) {
    for (float& v : data) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        bits = __builtin_bswap32(bits);
        std::memcpy(&v, &bits, 4);
    }
}

}  // namespace

Vec3 Image::sample_bilinear(float u, float v) const {
    const float x = u * static_cast<float>(width) - 0.5f;
    const float y = std::clamp(v * static_cast<float>(height) - 0.5f, 0.0f,
                               static_cast<float>(height) - 1.0f);
    const int y0 = static_cast<int>(y);
    const int y1 = std::min(y0 + 1, height - 1);
    const float fy = y - static_cast<float>(y0);
    const int xf = static_cast<int>(std::floor(x));
    const float fx = x - static_cast<float>(xf);
    const int x0 = ((xf % width) + width) % width;
    const int x1 = (x0 + 1) % width;
    const Vec3 a = at(x0, y0) * (1.0f - fx) + at(x1, y0) * fx;
    const Vec3 b = at(x0, y1) * (1.0f - fx) + at(x1, y1) * fx;
    return a * (1.0f - fy) + b * fy;
}

Vec3 rgbe_to_rgb(unsigned char r, unsigned char g, unsigned char b, unsigned char e) {
    if (e == 0) return Vec3(0.0f);
    const float scale = std::ldexp(1.0f, static_cast<int>(e) - 136);
    return {r * scale, g * scale, b * scale};
}

Image load_hdr(const std::string& path) {
    FilePtr f = open_or_throw(path, "rb");
    char line[512];
    if (!std::fgets(line, sizeof(line), f.get())) malformed(path, "empty file");
    if (std::strncmp(line, "#?", 2) != 0) malformed(path, "missing Radiance signature");

    bool format_ok = false;
    while (std::fgets(line, sizeof(line), f.get())) {
        if (line[0] == '\n' || (line[0] == '\r' && line[1] == '\n')) break;
        if (std::strncmp(line, "FORMAT=32-bit_rle_rgbe", 22) == 0) format_ok = true;
    }
    if (!format_ok) malformed(path, "unsupported FORMAT (expected 32-bit_rle_rgbe)");

    int w = 0, h = 0;
    if (!std::fgets(line, sizeof(line), f.get()) ||
        std::sscanf(line, "-Y %d +X %d", &h, &w) != 2 || w <= 0 || h <= 0)
        malformed(path, "unsupported resolution line (expected -Y h +X w)");

    Image img(w, h);
    std::vector<unsigned char> scanline(static_cast<size_t>(w) * 4);
    for (int y = 0; y < h; ++y) {
        unsigned char head[4];
        if (std::fread(head, 1, 4, f.get()) != 4) malformed(path, "truncated scanline");
        if (head[0] == 2 && head[1] == 2 && ((head[2] << 8) | head[3]) == w && w >= 8 &&
            w < 32768) {
            // New-style RLE: four separate component runs.
            for (int comp = 0; comp < 4; ++comp) {
                int x = 0;
                while (x < w) {
                    int code = std::fgetc(f.get());
                    if (code == EOF) malformed(path, "truncated RLE scanline");
                    if (code > 128) {
                        const int count = code - 128;
                        const int value = std::fgetc(f.get());
                        if (value == EOF || x + count > w) malformed(path, "bad RLE run");
                        for (int i = 0; i < count; ++i)
                            scanline[static_cast<size_t>(x++) * 4 + comp] =
                                static_cast<unsigned char>(value);
                    } else {
                        if (x + code > w) malformed(path, "bad RLE run");
                        for (int i = 0; i < code; ++i) {
                            const int value = std::fgetc(f.get());
                            if (value == EOF) malformed(path, "truncated RLE run");
                            scanline[static_cast<size_t>(x++) * 4 + comp] =
                                static_cast<unsigned char>(value);
                        }
                    }
                }
            }
        } else {
            // Flat scanline; the first pixel was already consumed as the header.
            std::memcpy(scanline.data(), head, 4);
            if (w > 1 &&
                std::fread(scanline.data() + 4, 4, static_cast<size_t>(w) - 1, f.get()) !=
                    static_cast<size_t>(w) - 1)
                malformed(path, "truncated scanline");
        }
        for (int x = 0; x < w; ++x) {
            const unsigned char* p = &scanline[static_cast<size_t>(x) * 4];
            img.at(x, y) = rgbe_to_rgb(p[0], p[1], p[2], p[3]);
        }
    }
    validate_texels(img, path);
    return img;
}

Image load_pfm(const std::string& path) {
    FilePtr f = open_or_throw(path, "rb");
    const std::string magic = read_token(f.get());
    if (magic != "PF" && magic != "Pf") malformed(path, "not a PFM file");
    const bool color = magic == "PF";
    const std::string ws = read_token(f.get());
    const std::string hs = read_token(f.get());
    const std::string ss = read_token(f.get());
    int w = 0, h = 0;
    float scale = 0.0f;
    try {
        w = std::stoi(ws);
        h = std::stoi(hs);
        scale = std::stof(ss);
    } catch (...) {
        malformed(path, "malformed PFM header");
    }
    if (w <= 0 || h <= 0 || scale == 0.0f) malformed(path, "malformed PFM header");

    const size_t channels = color ? 3 : 1;
    std::vector<float> data(static_cast<size_t>(w) * h * channels);
    if (std::fread(data.data(), sizeof(float), data.size(), f.get()) != data.size())
        malformed(path, "truncated PFM data");
    const bool file_little = scale < 0.0f;
    if (file_little != host_is_little_endian()) byteswap_floats(data);

    const float mag = std::fabs(scale);
    Image img(w, h);
    // PFM rows are stored bottom-to-top.
    for (int y = 0; y < h; ++y) {
        const size_t row = static_cast<size_t>(h - 1 - y) * w;
        for (int x = 0; x < w; ++x) {
            const float* p = &data[(row + x) * channels];
            img.at(x, y) = color ? Vec3(p[0] * mag, p[1] * mag, p[2] * mag) : Vec3(p[0] * mag);
        }
    }
    validate_texels(img, path);
    return img;
}

Image load_image(const std::string& path) {
    if (path.size() >= 4) {
        const std::string ext = path.substr(path.size() - 4);
        if (ext == ".pfm" || ext == ".PFM") return load_pfm(path);
        if (ext == ".hdr" || ext == ".HDR") return load_hdr(path);
    }
    throw std::runtime_error("unsupported image format (expected .hdr or .pfm): " + path);
}

void write_pfm(const Image& img, const std::string& path) {
    FilePtr f = open_or_throw(path, "wb");
    const float scale = host_is_little_endian() ? -1.0f : 1.0f;
    std::fprintf(f.get(), "PF\n%d %d\n%f\n", img.width, img.height, scale);
    for (int y = img.height - 1; y >= 0; --y) {
        if (std::fwrite(&img.at(0, y), sizeof(Vec3), img.width, f.get()) !=
            static_cast<size_t>(img.width))
            throw std::runtime_error("write failed: " + path);
    }
}

float linear_to_srgb(float v) {
    v = std::clamp(v, 0.0f, 1.0f);
    return v <= 0.0031308f ? 12.92f * v : 1.055f * std::pow(v, 1.0f / 2.4f) - 0.055f;
}

namespace {

void write_png_chunk(FILE* f, const char* type, const unsigned char* data, uint32_t len) {
    unsigned char hdr[8];
    hdr[0] = static_cast<unsigned char>(len >> 24);
    hdr[1] = static_cast<unsigned char>(len >> 16);
    hdr[2] = static_cast<unsigned char>(len >> 8);
    hdr[3] = static_cast<unsigned char>(len);
    std::memcpy(hdr + 4, type, 4);
    std::fwrite(hdr, 1, 8, f);
    if (len > 0) std::fwrite(data, 1, len, f);
    uLong crc = crc32(0L, hdr + 4, 4);
    if (len > 0) crc = crc32(crc, data, len);
    unsigned char crcb[4] = {static_cast<unsigned char>(crc >> 24),
                             static_cast<unsigned char>(crc >> 16),
                             static_cast<unsigned char>(crc >> 8),
                             static_cast<unsigned char>(crc)};
    std::fwrite(crcb, 1, 4, f);
}

}  // namespace

void write_png(const Image& img, const std::string& path, float exposure_stops) {
    const float gain = std::exp2(exposure_stops);
    std::vector<unsigned char> raw(static_cast<size_t>(img.height) *
                                   (1 + static_cast<size_t>(img.width) * 3));
    size_t pos = 0;
    for (int y = 0; y < img.height; ++y) {
        raw[pos++] = 0;  // filter type none
        for (int x = 0; x < img.width; ++x) {
            const Vec3 c = img.at(x, y) * gain;
            raw[pos++] = static_cast<unsigned char>(
                std::lround(linear_to_srgb(c.x) * 255.0f));
            raw[pos++] = static_cast<unsigned char>(
                std::lround(linear_to_srgb(c.y) * 255.0f));
            raw[pos++] = static_cast<unsigned char>(
                std::lround(linear_to_srgb(c.z) * 255.0f));
        }
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("PNG deflate failed");

    FilePtr f = open_or_throw(path, "wb");
    const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::fwrite(sig, 1, 8, f.get());
    unsigned char ihdr[13];
    const uint32_t w = static_cast<uint32_t>(img.width), h = static_cast<uint32_t>(img.height);
    ihdr[0] = static_cast<unsigned char>(w >> 24);
    ihdr[1] = static_cast<unsigned char>(w >> 16);
    ihdr[2] = static_cast<unsigned char>(w >> 8);
    ihdr[3] = static_cast<unsigned char>(w);
    ihdr[4] = static_cast<unsigned char>(h >> 24);
    ihdr[5] = static_cast<unsigned char>(h >> 16);
    ihdr[6] = static_cast<unsigned char>(h >> 8);
    ihdr[7] = static_cast<unsigned char>(h);
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 2;   // RGB
    ihdr[10] = 0;
    ihdr[11] = 0;
    ihdr[12] = 0;
    write_png_chunk(f.get(), "IHDR", ihdr, 13);
    write_png_chunk(f.get(), "IDAT", comp.data(), static_cast<uint32_t>(comp_len));
    write_png_chunk(f.get(), "IEND", nullptr, 0);
}

}  // namespace glint
