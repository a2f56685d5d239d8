#include "glint/brdf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "glint/sampling.hpp"

namespace glint {

namespace {

constexpr float kPi = std::numbers::pi_v<float>;
constexpr uint32_t kCacheMagic = 0x4c424947u;  // "GIBL"
constexpr uint32_t kCacheVersion = 1u;

// Inverse of the projected GGX CDF in cos(theta_h).
float ggx_cos_theta(float xi, float alpha) {
    const float a2 = alpha * alpha;
    return std::sqrt(std::fmax(0.0f, (1.0f - xi) / (1.0f + (a2 - 1.0f) * xi)));
}

float smith_lambda(float cos_theta, float alpha) {
    const float c2 = cos_theta * cos_theta;
    const float tan2 = (1.0f - c2) / std::fmax(c2, 1e-12f);
    return 0.5f * (-1.0f + std::sqrt(1.0f + alpha * alpha * tan2));
}

}  // namespace

float ggx_ndf(float cos_theta_h, float alpha) {
    if (cos_theta_h < 0.0f) return 0.0f;
    const float a2 = alpha * alpha;
    const float d = cos_theta_h * cos_theta_h * (a2 - 1.0f) + 1.0f;
    return a2 / (kPi * d * d);
}

float smith_g(float cos_theta_i, float cos_theta_o, float alpha) {
    return 1.0f / (1.0f + smith_lambda(cos_theta_i, alpha) + smith_lambda(cos_theta_o, alpha));
}

Vec3 schlick_fresnel(const Vec3& f0, float cos_theta) {
    const float m = std::clamp(1.0f - cos_theta, 0.0f, 1.0f);
    const float m2 = m * m;
    const float f = m2 * m2 * m;
    return f0 + (Vec3(1.0f) - f0) * f;
}

Vec3 eval_smooth_brdf(const Vec3& wi, const Vec3& wo, const Vec3& n,
                      const SurfaceMaterial& material) {
    const float n_wi = dot(n, wi);
    const float n_wo = dot(n, wo);
    if (n_wi <= 0.0f || n_wo <= 0.0f) return Vec3(0.0f);
    const Vec3 h = normalize(wi + wo);
    const float d = ggx_ndf(dot(n, h), material.alpha);
    const float g = smith_g(n_wi, n_wo, material.alpha);
    const Vec3 f = schlick_fresnel(material.f0, dot(h, wo));
    return f * (d * g / (4.0f * n_wo));
}

Vec3 sample_ggx_half_vector(float xi1, float xi2, float alpha) {
    const float cos_theta = ggx_cos_theta(xi1, alpha);
    const float sin_theta = std::sqrt(std::fmax(0.0f, 1.0f - cos_theta * cos_theta));
    const float phi = 2.0f * kPi * xi2;
    return {sin_theta * std::cos(phi), sin_theta * std::sin(phi), cos_theta};
}

AlbedoTables AlbedoTables::build(int resolution, int quadrature_samples) {
    if (resolution < 16) throw std::invalid_argument("albedo table resolution must be >= 16");
    if (quadrature_samples < (1 << 14))
        throw std::invalid_argument("albedo quadrature needs at least 2^14 samples");

    AlbedoTables t;
    t.resolution_ = resolution;
    t.d_total_.resize(resolution);
    t.d_visible_.resize(static_cast<size_t>(resolution) * resolution);
    t.split_scale_.resize(static_cast<size_t>(resolution) * resolution);
    t.split_bias_.resize(static_cast<size_t>(resolution) * resolution);

    const int n1d = std::max(quadrature_samples, 1 << 18);
    for (int j = 0; j < resolution; ++j) {
        const float sqrt_alpha = (static_cast<float>(j) + 0.5f) / static_cast<float>(resolution);
        const float alpha = sqrt_alpha * sqrt_alpha;
        // D_H = E[1/cos_theta_h] under the projected-NDF density, stratified.
        double sum = 0.0;
        for (int i = 0; i < n1d; ++i) {
            const float xi = (static_cast<float>(i) + 0.5f) / static_cast<float>(n1d);
            sum += 1.0 / std::fmax(ggx_cos_theta(xi, alpha), 1e-8f);
        }
        t.d_total_[j] = static_cast<float>(sum / n1d);
    }

    const uint32_t ns = static_cast<uint32_t>(quadrature_samples);
    for (int ci = 0; ci < resolution; ++ci) {
        const float cos_o =
            std::clamp((static_cast<float>(ci) + 0.5f) / static_cast<float>(resolution), 1e-3f, 1.0f);
        const Vec3 wo(std::sqrt(1.0f - cos_o * cos_o), 0.0f, cos_o);
        for (int j = 0; j < resolution; ++j) {
            const float sqrt_alpha =
                (static_cast<float>(j) + 0.5f) / static_cast<float>(resolution);
            const float alpha = sqrt_alpha * sqrt_alpha;

            double vis = 0.0, scale = 0.0, bias = 0.0;
            for (uint32_t i = 0; i < ns; ++i) {
                const Vec2 xi = hammersley(i, ns);
                const Vec3 h = sample_ggx_half_vector(xi.x, xi.y, alpha);
                const float h_wo = dot(h, wo);
                if (h_wo <= 0.0f) continue;
                const Vec3 wi = reflect(wo, h);
                if (wi.z <= 0.0f) continue;
                vis += 1.0 / std::fmax(h.z, 1e-8f);

                const float g = smith_g(wi.z, wo.z, alpha);
                const float g_vis = g * h_wo / std::fmax(h.z * wo.z, 1e-8f);
                const float m = 1.0f - h_wo;
                const float m2 = m * m;
                const float fc = m2 * m2 * m;
                scale += (1.0f - fc) * g_vis;
                bias += fc * g_vis;
            }
            const size_t idx = static_cast<size_t>(ci) * resolution + j;
            t.d_visible_[idx] = static_cast<float>(vis / ns);
            t.split_scale_[idx] = static_cast<float>(scale / ns);
            t.split_bias_[idx] = static_cast<float>(bias / ns);
            if (!std::isfinite(t.d_visible_[idx]) || !std::isfinite(t.split_scale_[idx]) ||
                !std::isfinite(t.split_bias_[idx]))
                throw std::runtime_error("albedo quadrature produced a non-finite value");
        }
    }
    return t;
}

namespace {

float lerp1(const std::vector<float>& table, int res, float u) {
    const float x = std::clamp(u * static_cast<float>(res) - 0.5f, 0.0f,
                               static_cast<float>(res) - 1.0f);
    const int i0 = static_cast<int>(x);
    const int i1 = std::min(i0 + 1, res - 1);
    const float f = x - static_cast<float>(i0);
    return table[i0] * (1.0f - f) + table[i1] * f;
}

float lerp2(const std::vector<float>& table, int res, float u, float v) {
    const float x = std::clamp(u * static_cast<float>(res) - 0.5f, 0.0f,
                               static_cast<float>(res) - 1.0f);
    const float y = std::clamp(v * static_cast<float>(res) - 0.5f, 0.0f,
                               static_cast<float>(res) - 1.0f);
    const int i0 = static_cast<int>(x);
    const int i1 = std::min(i0 + 1, res - 1);
    const int j0 = static_cast<int>(y);
    const int j1 = std::min(j0 + 1, res - 1);
    const float fx = x - static_cast<float>(i0);
    const float fy = y - static_cast<float>(j0);
    const float a = table[static_cast<size_t>(i0) * res + j0] * (1.0f - fy) +
                    table[static_cast<size_t>(i0) * res + j1] * fy;
    const float b = table[static_cast<size_t>(i1) * res + j0] * (1.0f - fy) +
                    table[static_cast<size_t>(i1) * res + j1] * fy;
    return a * (1.0f - fx) + b * fx;
}

}  // namespace

float AlbedoTables::d_total(float alpha) const {
    return lerp1(d_total_, resolution_, std::sqrt(std::fmax(alpha, 0.0f)));
}

float AlbedoTables::d_visible(float cos_theta_o, float alpha) const {
    return lerp2(d_visible_, resolution_, cos_theta_o, std::sqrt(std::fmax(alpha, 0.0f)));
}

void AlbedoTables::fresnel_split(float cos_theta_o, float alpha, float& scale,
                                 float& bias) const {
    const float sa = std::sqrt(std::fmax(alpha, 0.0f));
    scale = lerp2(split_scale_, resolution_, cos_theta_o, sa);
    bias = lerp2(split_bias_, resolution_, cos_theta_o, sa);
}

bool AlbedoTables::save(const std::string& path) const {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) return false;
    bool ok = true;
    const uint32_t res = static_cast<uint32_t>(resolution_);
    ok &= std::fwrite(&kCacheMagic, 4, 1, f) == 1;
    ok &= std::fwrite(&kCacheVersion, 4, 1, f) == 1;
    ok &= std::fwrite(&res, 4, 1, f) == 1;
    ok &= std::fwrite(&res, 4, 1, f) == 1;
    auto write_vec = [&](const std::vector<float>& v) {
        ok &= std::fwrite(v.data(), sizeof(float), v.size(), f) == v.size();
    };
    write_vec(d_total_);
    write_vec(d_visible_);
    write_vec(split_scale_);
    write_vec(split_bias_);
    std::fclose(f);
    return ok;
}

bool AlbedoTables::load(const std::string& path, AlbedoTables& out) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return false;
    uint32_t magic = 0, version = 0, res0 = 0, res1 = 0;
    bool ok = std::fread(&magic, 4, 1, f) == 1 && std::fread(&version, 4, 1, f) == 1 &&
              std::fread(&res0, 4, 1, f) == 1 && std::fread(&res1, 4, 1, f) == 1;
    if (!ok || magic != kCacheMagic || version != kCacheVersion || res0 != res1 || res0 < 16 ||
        res0 > 4096) {
        std::fclose(f);
        return false;
    }
    out.resolution_ = static_cast<int>(res0);
    out.d_total_.resize(res0);
    out.d_visible_.resize(static_cast<size_t>(res0) * res0);
    out.split_scale_.resize(static_cast<size_t>(res0) * res0);
    out.split_bias_.resize(static_cast<size_t>(res0) * res0);
    auto read_vec = [&](std::vector<float>& v) {
        ok &= std::fread(v.data(), sizeof(float), v.size(), f) == v.size();
    };
    read_vec(out.d_total_);
    read_vec(out.d_visible_);
    read_vec(out.split_scale_);
    read_vec(out.split_bias_);
    std::fclose(f);
    return ok;
}

AlbedoTables AlbedoTables::load_or_build(const std::string& cache_path) {
    AlbedoTables t;
    if (!cache_path.empty() && load(cache_path, t)) return t;
    t = build();
    if (!cache_path.empty()) t.save(cache_path);
    return t;
}

}  // namespace glint
