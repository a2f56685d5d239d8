#pragma once

#include <string>
#include <vector>

#include "glint/image.hpp"
#include "glint/vec.hpp"

namespace glint {

enum class WeightSpace { Linear, Log };

// K discrete luminance levels; L_1 = 0 doubles as the below-horizon sink.
struct RadianceLevels {
    std::vector<float> levels;    // L_1..L_K, L_1 == 0
    float clip_floor = 1e-3f;
    WeightSpace space = WeightSpace::Linear;

    int k_count() const { return static_cast<int>(levels.size()); }
};

// Equirectangular env map; rejects anything but 2:1 linear RGB.
Image load_envmap(const std::string& path);

// Direction convention: u = phi / 2pi, v = theta / pi with theta measured
// from +z, so the top image row maps to the +z pole.
Vec3 equirect_direction(float u, float v);
Vec2 direction_to_equirect(const Vec3& dir);

RadianceLevels compute_levels(const Image& env, int k, float clip_floor,
                              WeightSpace space = WeightSpace::Linear);

// Convex weights assigning a luminance to its two bracketing levels.
// Sums to 1 exactly; one-hot at a level endpoint.
std::vector<float> fuzzy_weights(float lum, const RadianceLevels& levels);

// Roughness mip chain of filtered radiance plus K filtered level weights.
struct PrefilteredEnv {
    struct Mip {
        int width = 0;
        int height = 0;
        float alpha = 0.0f;
        std::vector<float> data;  // per texel: R,G,B then K weights
    };

    int k_count = 0;
    bool quantized16 = false;
    RadianceLevels levels;
    std::vector<Mip> mips;

    int stride() const { return 3 + k_count; }
    const float* texel(int mip, int x, int y) const {
        return &mips[mip].data[(static_cast<size_t>(y) * mips[mip].width + x) * stride()];
    }
};

struct PrefilterOptions {
    int mip_count = 7;
    int samples_per_texel = 1024;
    bool quantize16 = false;
    int threads = 0;  // 0 = hardware concurrency
};

PrefilteredEnv prefilter(const Image& env, const RadianceLevels& levels,
                         const PrefilterOptions& options = {});

// Trilinear lookup; weight vector renormalized to sum exactly 1.
void sample_prefiltered(const PrefilteredEnv& penv, const Vec3& dir, float alpha,
                        Vec3& radiance, std::vector<float>& weights);

// "GIBP" cache: magic, version, K, mip count, per-mip dims + alpha, LE floats.
bool save_prefiltered(const PrefilteredEnv& penv, const std::string& path);
bool load_prefiltered(const std::string& path, PrefilteredEnv& out);

}  // namespace glint
