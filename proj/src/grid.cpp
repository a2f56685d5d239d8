#include "glint/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "glint/counting.hpp"

namespace glint {

namespace {

constexpr float kPi = std::numbers::pi_v<float>;
constexpr uint64_t kLatticeWrap = 1u << 20;  // bounds integer lattice ranges

float smoothstep01(float t) { return t * t * (3.0f - 2.0f * t); }

uint64_t wrap_coord(int64_t c) {
    return static_cast<uint64_t>(((c % static_cast<int64_t>(kLatticeWrap)) +
                                  static_cast<int64_t>(kLatticeWrap)) %
                                 static_cast<int64_t>(kLatticeWrap));
}

}  // namespace

uint64_t lattice_cell_seed(uint64_t global_seed, int64_t x, int64_t y, int lod) {
    uint64_t seed = hash_combine(global_seed, wrap_coord(x));
    seed = hash_combine(seed, wrap_coord(y));
    return hash_combine(seed, static_cast<uint64_t>(lod + (1 << 20)));
}

Footprint footprint_from_ray(const Vec2& duv_dx, const Vec2& duv_dy) {
    Footprint fp;

    // Closed-form SVD of the 2x2 Jacobian [duv_dx | duv_dy].
    const float a = duv_dx.x, c = duv_dx.y;
    const float b = duv_dy.x, d = duv_dy.y;
    const float e = 0.5f * (a + d);
    const float f = 0.5f * (a - d);
    const float g = 0.5f * (c + b);
    const float h = 0.5f * (c - b);
    const float q = std::sqrt(e * e + h * h);
    const float r = std::sqrt(f * f + g * g);
    const float s1 = q + r;
    const float s2 = std::fabs(q - r);

    const float a1 = std::atan2(g, f);
    const float a2 = std::atan2(h, e);
    fp.orientation = 0.5f * (a2 + a1);

    fp.major_len = std::fmax(s1, 1e-8f);
    fp.minor_len = std::fmax(s2, 1e-8f);
    fp.area = std::clamp(kPi / 4.0f * fp.major_len * fp.minor_len, 1e-12f, 1.0f);
    return fp;
}

std::array<GridVertexDraw, 6> grid_vertices(const Footprint& fp, const SurfaceMaterial& material,
                                            uint64_t global_seed) {
    std::array<GridVertexDraw, 6> out;

    const float expected = material.density_scale * std::exp(material.log_n0) * fp.area;
    const float lod_f = std::log2(std::fmax(fp.major_len, 1e-8f));
    const float lod_floor = std::floor(lod_f);
    const int lod0 = static_cast<int>(lod_floor);
    const float blend = smoothstep01(lod_f - lod_floor);

    int slot = 0;
    for (int li = 0; li < 2; ++li) {
        const int lod = lod0 + li;
        const float lod_weight = li == 0 ? 1.0f - blend : blend;
        const float spacing = std::exp2(static_cast<float>(lod));
        const float gx = fp.center_uv.x / spacing;
        const float gy = fp.center_uv.y / spacing;
        const int64_t ix = static_cast<int64_t>(std::floor(gx));
        const int64_t iy = static_cast<int64_t>(std::floor(gy));
        const float fx = gx - static_cast<float>(ix);
        const float fy = gy - static_cast<float>(iy);

        // Triangle lattice: each square cell splits along the anti-diagonal.
        int64_t vx[3], vy[3];
        float bary[3];
        if (fx + fy < 1.0f) {
            vx[0] = ix; vy[0] = iy; bary[0] = 1.0f - fx - fy;
            vx[1] = ix + 1; vy[1] = iy; bary[1] = fx;
            vx[2] = ix; vy[2] = iy + 1; bary[2] = fy;
        } else {
            vx[0] = ix + 1; vy[0] = iy + 1; bary[0] = fx + fy - 1.0f;
            vx[1] = ix + 1; vy[1] = iy; bary[1] = 1.0f - fy;
            vx[2] = ix; vy[2] = iy + 1; bary[2] = 1.0f - fx;
        }

        for (int v = 0; v < 3; ++v) {
            GridVertexDraw& draw = out[slot++];
            draw.weight = bary[v] * lod_weight;
            draw.seed = lattice_cell_seed(global_seed, vx[v], vy[v], lod);
            draw.count = expected;
        }
    }
    return out;
}

float aggregate_modulation(std::span<const GridVertexDraw> vertices,
                           std::span<const float> level_radiances,
                           std::span<const float> probs, float expected_count) {
    const size_t k = level_radiances.size();
    double rate = 0.0;
    double psum = 0.0;
    for (size_t i = 0; i < k; ++i) {
        rate += static_cast<double>(level_radiances[i]) * probs[i];
        psum += probs[i];
    }
    if (rate <= 0.0 || expected_count <= 0.0f) return 0.0f;

    // K reflecting bins plus the dummy sink absorbing the remainder.
    std::vector<float> bins(k + 1);
    for (size_t i = 0; i < k; ++i) bins[i] = probs[i];
    bins[k] = static_cast<float>(std::fmax(0.0, 1.0 - psum));

    double num = 0.0;
    for (const GridVertexDraw& v : vertices) {
        if (v.weight <= 0.0f) continue;
        const RandomStream stream(v.seed);
        const std::vector<float> counts = sample_multinomial(v.count, bins, stream, 0);
        double lsum = 0.0;
        for (size_t i = 0; i < k; ++i) lsum += static_cast<double>(level_radiances[i]) * counts[i];
        num += static_cast<double>(v.weight) * lsum;
    }
    return static_cast<float>(num / (static_cast<double>(expected_count) * rate));
}

}  // namespace glint
