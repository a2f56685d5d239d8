#include "glint/envmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "glint/brdf.hpp"
#include "glint/counting.hpp"
#include "glint/sampling.hpp"
#include "glint/util.hpp"

namespace glint {

namespace {

constexpr float kPi = std::numbers::pi_v<float>;
constexpr uint32_t kCacheMagic = 0x50424947u;  // "GIBP"
constexpr uint32_t kCacheVersion = 1u;

}  // namespace

Image load_envmap(const std::string& path) {
    Image img = load_image(path);
    if (img.width != 2 * img.height)
        throw std::runtime_error(path + ": not equirectangular 2:1");
    return img;
}

Vec3 equirect_direction(float u, float v) {
    const float phi = 2.0f * kPi * u;
    const float theta = kPi * v;
    const float st = std::sin(theta);
    return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

Vec2 direction_to_equirect(const Vec3& dir) {
    float phi = std::atan2(dir.y, dir.x);
    if (phi < 0.0f) phi += 2.0f * kPi;
    const float theta = std::acos(std::clamp(dir.z, -1.0f, 1.0f));
    return {phi / (2.0f * kPi), theta / kPi};
}

RadianceLevels compute_levels(const Image& env, int k, float clip_floor, WeightSpace space) {
    if (k < 2) throw std::invalid_argument("need at least 2 radiance levels");
    if (clip_floor <= 0.0f) throw std::invalid_argument("clip floor must be positive");

    float min_lum = std::numeric_limits<float>::infinity();
    float max_lum = 0.0f;
    bool any = false;
    for (const Vec3& t : env.texels) {
        const float lum = luminance(t);
        if (!std::isfinite(lum)) continue;
        any = true;
        min_lum = std::fmin(min_lum, lum);
        max_lum = std::fmax(max_lum, lum);
    }
    if (!any) throw std::runtime_error("environment has no finite texels");

    RadianceLevels out;
    out.clip_floor = clip_floor;
    out.space = space;
    out.levels.assign(k, 0.0f);

    const float m = std::fmax(min_lum, clip_floor);
    const float big = max_lum;
    if (big <= m) {
        // Constant or black environment: collapse to two effective levels.
        const float top = big <= clip_floor ? clip_floor : big;
        for (int i = 1; i < k; ++i) out.levels[i] = top;
    } else {
        const float lo = std::log(m), hi = std::log(big);
        for (int i = 1; i < k; ++i) {
            const float t = static_cast<float>(i) / static_cast<float>(k - 1);
            out.levels[i] = std::exp(lo + (hi - lo) * t);
        }
    }
    return out;
}

std::vector<float> fuzzy_weights(float lum, const RadianceLevels& levels) {
    const int k = levels.k_count();
    std::vector<float> w(k, 0.0f);
    lum = std::fmax(lum, 0.0f);
    if (lum >= levels.levels.back()) {
        w.back() = 1.0f;
        return w;
    }
    // Largest j with L_j <= lum; ties resolve to the highest equal level.
    int j = 0;
    for (int i = k - 1; i >= 0; --i) {
        if (levels.levels[i] <= lum) {
            j = i;
            break;
        }
    }
    const float lo = levels.levels[j];
    const float hi = levels.levels[j + 1];
    float t;
    if (levels.space == WeightSpace::Linear) {
        t = (lum - lo) / (hi - lo);
    } else {
        // Level 1 sits at log(clip_floor) since log(0) is undefined.
        const float log_lo = std::log(std::fmax(lo, levels.clip_floor));
        const float log_hi = std::log(std::fmax(hi, levels.clip_floor));
        const float log_lum = std::log(std::clamp(lum, levels.clip_floor, hi));
        t = log_hi > log_lo ? (log_lum - log_lo) / (log_hi - log_lo) : 0.0f;
    }
    t = std::clamp(t, 0.0f, 1.0f);
    w[j] = 1.0f - t;
    w[j + 1] = t;
    return w;
}

namespace {

void accumulate_fuzzy(const RadianceLevels& levels, float lum, float weight,
                      std::vector<double>& acc) {
    const std::vector<float> fw = fuzzy_weights(lum, levels);
    for (size_t i = 0; i < fw.size(); ++i) acc[i] += static_cast<double>(fw[i]) * weight;
}

float quantize_unorm16(float v) {
    return std::round(std::clamp(v, 0.0f, 1.0f) * 65535.0f) / 65535.0f;
}

}  // namespace

PrefilteredEnv prefilter(const Image& env, const RadianceLevels& levels,
                         const PrefilterOptions& options) {
    if (options.mip_count < 2) throw std::invalid_argument("need at least 2 mips");
    const int k = levels.k_count();
    const int threads = options.threads > 0 ? options.threads : default_thread_count();

    PrefilteredEnv out;
    out.k_count = k;
    out.quantized16 = options.quantize16;
    out.levels = levels;
    out.mips.resize(options.mip_count);

    for (int m = 0; m < options.mip_count; ++m) {
        PrefilteredEnv::Mip& mip = out.mips[m];
        mip.height = std::max(env.height >> m, 2);
        mip.width = 2 * mip.height;
        const float t = static_cast<float>(m) / static_cast<float>(options.mip_count - 1);
        mip.alpha = t * t;
        mip.data.assign(static_cast<size_t>(mip.width) * mip.height * (3 + k), 0.0f);

        const int w = mip.width, h = mip.height;
        const uint32_t ns = static_cast<uint32_t>(std::max(options.samples_per_texel, 1));
        const RandomStream scramble(hash_combine(0x70726566u, static_cast<uint64_t>(m)));

        parallel_for(static_cast<int64_t>(w) * h, threads, [&](int64_t idx) {
            const int x = static_cast<int>(idx % w);
            const int y = static_cast<int>(idx / w);
            const float u = (static_cast<float>(x) + 0.5f) / static_cast<float>(w);
            const float v = (static_cast<float>(y) + 0.5f) / static_cast<float>(h);
            float* texel = &mip.data[static_cast<size_t>(idx) * (3 + k)];

            std::vector<double> wacc(k, 0.0);
            Vec3 radiance(0.0f);

            if (mip.alpha < 1e-6f) {
                // Near-Dirac kernel: plain lookup.
                radiance = env.sample_bilinear(u, v);
                accumulate_fuzzy(levels, luminance(radiance), 1.0, wacc);
            } else {
                const Vec3 n = equirect_direction(u, v);
                Vec3 tangent, bitangent;
                build_basis(n, tangent, bitangent);
                // Per-texel Cranley-Patterson rotation keyed by coordinates,
                // so the sequence is independent of execution order.
                const float ox = scramble.uniform(static_cast<uint64_t>(x),
                                                  static_cast<uint64_t>(y), 0);
                const float oy = scramble.uniform(static_cast<uint64_t>(x),
                                                  static_cast<uint64_t>(y), 1);
                double wsum = 0.0;
                Vec3 racc(0.0f);
                for (uint32_t i = 0; i < ns; ++i) {
                    Vec2 xi = hammersley(i, ns);
                    xi.x = xi.x + ox >= 1.0f ? xi.x + ox - 1.0f : xi.x + ox;
                    xi.y = xi.y + oy >= 1.0f ? xi.y + oy - 1.0f : xi.y + oy;
                    const Vec3 hl = sample_ggx_half_vector(xi.x, xi.y, mip.alpha);
                    const Vec3 hv = tangent * hl.x + bitangent * hl.y + n * hl.z;
                    const Vec3 wi = reflect(n, hv);
                    const float wgt = dot(n, wi);
                    if (wgt <= 0.0f) continue;
                    const Vec2 suv = direction_to_equirect(wi);
                    const Vec3 li = env.sample_bilinear(suv.x, suv.y);
                    racc += li * wgt;
                    accumulate_fuzzy(levels, luminance(li), wgt, wacc);
                    wsum += wgt;
                }
                if (wsum > 0.0) {
                    radiance = racc / static_cast<float>(wsum);
                    for (double& a : wacc) a /= wsum;
                } else {
                    radiance = env.sample_bilinear(u, v);
                    accumulate_fuzzy(levels, luminance(radiance), 1.0, wacc);
                }
            }

            texel[0] = radiance.x;
            texel[1] = radiance.y;
            texel[2] = radiance.z;
            for (int i = 0; i < k; ++i) {
                float wv = static_cast<float>(wacc[i]);
                if (options.quantize16) wv = quantize_unorm16(wv);
                texel[3 + i] = wv;
            }
        });
    }
    return out;
}

namespace {

// Bilinear over the packed (3+K)-channel grid: horizontal wrap, vertical clamp.
void mip_bilinear(const PrefilteredEnv& penv, int m, float u, float v, float* out) {
    const PrefilteredEnv::Mip& mip = penv.mips[m];
    const int stride = penv.stride();
    const float x = u * static_cast<float>(mip.width) - 0.5f;
    const float y = std::clamp(v * static_cast<float>(mip.height) - 0.5f, 0.0f,
                               static_cast<float>(mip.height) - 1.0f);
    const int y0 = static_cast<int>(y);
    const int y1 = std::min(y0 + 1, mip.height - 1);
    const float fy = y - static_cast<float>(y0);
    const int xf = static_cast<int>(std::floor(x));
    const float fx = x - static_cast<float>(xf);
    const int x0 = ((xf % mip.width) + mip.width) % mip.width;
    const int x1 = (x0 + 1) % mip.width;
    const float* t00 = penv.texel(m, x0, y0);
    const float* t10 = penv.texel(m, x1, y0);
    const float* t01 = penv.texel(m, x0, y1);
    const float* t11 = penv.texel(m, x1, y1);
    for (int c = 0; c < stride; ++c) {
        const float a = t00[c] * (1.0f - fx) + t10[c] * fx;
        const float b = t01[c] * (1.0f - fx) + t11[c] * fx;
        out[c] = a * (1.0f - fy) + b * fy;
    }
}

}  // namespace

void sample_prefiltered(const PrefilteredEnv& penv, const Vec3& dir, float alpha,
                        Vec3& radiance, std::vector<float>& weights) {
    const Vec2 uv = direction_to_equirect(normalize(dir));
    const int mip_count = static_cast<int>(penv.mips.size());
    const int stride = penv.stride();

    alpha = std::clamp(alpha, penv.mips.front().alpha, penv.mips.back().alpha);
    int m0 = 0;
    while (m0 + 1 < mip_count && penv.mips[m0 + 1].alpha <= alpha) ++m0;
    const int m1 = std::min(m0 + 1, mip_count - 1);
    float blend = 0.0f;
    if (m1 > m0 && penv.mips[m1].alpha > penv.mips[m0].alpha)
        blend = (alpha - penv.mips[m0].alpha) / (penv.mips[m1].alpha - penv.mips[m0].alpha);

    std::vector<float> lo(stride), hi(stride);
    mip_bilinear(penv, m0, uv.x, uv.y, lo.data());
    if (blend > 0.0f) mip_bilinear(penv, m1, uv.x, uv.y, hi.data());

    weights.assign(penv.k_count, 0.0f);
    float sum = 0.0f;
    for (int c = 0; c < stride; ++c) {
        const float v = blend > 0.0f ? lo[c] * (1.0f - blend) + hi[c] * blend : lo[c];
        if (c < 3) {
            (c == 0 ? radiance.x : c == 1 ? radiance.y : radiance.z) = v;
        } else {
            weights[c - 3] = v;
            sum += v;
        }
    }
    if (sum > 0.0f)
        for (float& w : weights) w /= sum;
}

bool save_prefiltered(const PrefilteredEnv& penv, const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) return false;
    bool ok = true;
    const uint32_t k = static_cast<uint32_t>(penv.k_count);
    const uint32_t mc = static_cast<uint32_t>(penv.mips.size());
    ok &= std::fwrite(&kCacheMagic, 4, 1, f) == 1;
    ok &= std::fwrite(&kCacheVersion, 4, 1, f) == 1;
    ok &= std::fwrite(&k, 4, 1, f) == 1;
    ok &= std::fwrite(&mc, 4, 1, f) == 1;
    for (const auto& mip : penv.mips) {
        const uint32_t w = static_cast<uint32_t>(mip.width);
        const uint32_t h = static_cast<uint32_t>(mip.height);
        ok &= std::fwrite(&w, 4, 1, f) == 1;
        ok &= std::fwrite(&h, 4, 1, f) == 1;
        ok &= std::fwrite(&mip.alpha, 4, 1, f) == 1;
    }
    ok &= std::fwrite(penv.levels.levels.data(), 4, k, f) == k;
    ok &= std::fwrite(&penv.levels.clip_floor, 4, 1, f) == 1;
    const uint32_t space = penv.levels.space == WeightSpace::Log ? 1u : 0u;
    const uint32_t quant = penv.quantized16 ? 1u : 0u;
    ok &= std::fwrite(&space, 4, 1, f) == 1;
    ok &= std::fwrite(&quant, 4, 1, f) == 1;
    for (const auto& mip : penv.mips)
        ok &= std::fwrite(mip.data.data(), 4, mip.data.size(), f) == mip.data.size();
    std::fclose(f);
    return ok;
}

bool load_prefiltered(const std::string& path, PrefilteredEnv& out) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return false;
    uint32_t magic = 0, version = 0, k = 0, mc = 0;
    bool ok = std::fread(&magic, 4, 1, f) == 1 && std::fread(&version, 4, 1, f) == 1 &&
              std::fread(&k, 4, 1, f) == 1 && std::fread(&mc, 4, 1, f) == 1;
    if (!ok || magic != kCacheMagic || version != kCacheVersion || k < 2 || k > 64 || mc < 2 ||
        mc > 32) {
        std::fclose(f);
        return false;
    }
    out.k_count = static_cast<int>(k);
    out.mips.resize(mc);
    for (auto& mip : out.mips) {
        uint32_t w = 0, h = 0;
        ok &= std::fread(&w, 4, 1, f) == 1 && std::fread(&h, 4, 1, f) == 1 &&
              std::fread(&mip.alpha, 4, 1, f) == 1;
        if (!ok || w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) {
            std::fclose(f);
            return false;
        }
        mip.width = static_cast<int>(w);
        mip.height = static_cast<int>(h);
    }
    out.levels.levels.resize(k);
    ok &= std::fread(out.levels.levels.data(), 4, k, f) == k;
    ok &= std::fread(&out.levels.clip_floor, 4, 1, f) == 1;
    uint32_t space = 0, quant = 0;
    ok &= std::fread(&space, 4, 1, f) == 1 && std::fread(&quant, 4, 1, f) == 1;
    out.levels.space = space == 1u ? WeightSpace::Log : WeightSpace::Linear;
    out.quantized16 = quant == 1u;
    for (auto& mip : out.mips) {
        mip.data.resize(static_cast<size_t>(mip.width) * mip.height * (3 + k));
        ok &= std::fread(mip.data.data(), 4, mip.data.size(), f) == mip.data.size();
    }
    std::fclose(f);
    return ok;
}

}  // namespace glint
