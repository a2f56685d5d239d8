#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glint/brdf.hpp"
#include "glint/envmap.hpp"
#include "glint/grid.hpp"
#include "glint/image.hpp"
#include "glint/vec.hpp"

namespace glint {

enum class GeometryKind { Sphere, Plane };

struct Camera {
    Vec3 position{0.0f, -3.5f, 0.0f};
    Vec3 look_at{0.0f, 0.0f, 0.0f};
    float fov_deg = 40.0f;
    int width = 128;
    int height = 128;
};

struct Scene {
    GeometryKind geometry = GeometryKind::Sphere;
    Camera camera;
    float env_rotation = 0.0f;  // azimuthal rotation, radians
    SurfaceMaterial material;
    float uv_scale = 1.0f;      // uv lattice cells per unit surface parameter
};

enum class ShadeModeKind { Smooth, GlintOurs, GlintConstP, Reference, Furnace };

struct ShadeMode {
    ShadeModeKind kind = ShadeModeKind::Smooth;
    float gamma_deg = 5.0f;   // cone half-angle for the constant-p baseline
    int realizations = 1;     // reference realization count
};

struct RenderInputs {
    const PrefilteredEnv* penv = nullptr;  // smooth / glint modes
    const Image* env = nullptr;            // reference mode and background
    const AlbedoTables* tables = nullptr;
};

struct Hit {
    bool valid = false;
    Vec3 position;
    Vec3 normal;
    Vec3 wo;          // unit vector toward the camera
    Vec2 uv;          // grid-space uv (uv_scale already applied)
    Vec2 duv_dx, duv_dy;
};

// Primary ray against the analytic scene geometry, with uv derivatives from
// the two adjacent pixel rays.
Hit trace_pixel(const Scene& scene, int px, int py);

Vec3 rotate_z(const Vec3& v, float angle);

// Split-sum shading: (f0*scale + bias) * prefiltered radiance at w_r.
Vec3 shade_smooth(const Hit& hit, const SurfaceMaterial& material, const Scene& scene,
                  const PrefilteredEnv& penv, const AlbedoTables& tables);

// p_k = E_D(n.wo, alpha) * filtered_weight_k(w_r, alpha) / D_H(alpha),
// clamped so the sum stays <= 1.
std::vector<float> reflection_probs(const Hit& hit, const SurfaceMaterial& material,
                                    const Scene& scene, const PrefilteredEnv& penv,
                                    const AlbedoTables& tables);

Vec3 shade_glint(const Hit& hit, const SurfaceMaterial& material, const Scene& scene,
                 const PrefilteredEnv& penv, const AlbedoTables& tables, uint64_t global_seed);

Vec3 shade_const_p(const Hit& hit, const SurfaceMaterial& material, const Scene& scene,
                   const PrefilteredEnv& penv, const AlbedoTables& tables, float gamma_deg,
                   uint64_t global_seed);

// Per-pixel precomputed glint state, so realization averages only repeat the
// multinomial draws.
struct GlintPixel {
    bool foreground = false;
    Vec3 smooth;
    Footprint footprint;
    float expected_count = 0.0f;
    std::vector<float> probs;       // K reflection probabilities
    float const_p = 0.0f;           // single-bin probability for the gamma baseline
};

struct GlintContext {
    int width = 0, height = 0;
    std::vector<float> level_radiances;
    std::vector<GlintPixel> pixels;
};

GlintContext build_glint_context(const Scene& scene, const RenderInputs& inputs,
                                 float gamma_deg = 5.0f, int threads = 0);

float glint_modulation(const GlintContext& ctx, int px, int py, const Scene& scene,
                       uint64_t global_seed);
float const_p_modulation(const GlintContext& ctx, int px, int py, const Scene& scene,
                         uint64_t global_seed);

// Explicit-microfacet ground truth. Half-vectors are sampled proportionally
// to the unprojected NDF via a numeric inverse-CDF in cos(theta_h); refuses
// expected per-pixel counts above 1e4.
class ReferenceShader {
public:
    ReferenceShader(const Scene& scene, const RenderInputs& inputs, int norm_samples = 4096);

    // Deterministic quadrature of E[s] for one hit, the mean env luminance a
    // single microfacet reflects. Expensive; callers cache it per pixel.
    float expected_single_lum(const Hit& hit) const;

    float expected_count(const Hit& hit) const;

    Vec3 shade(const Hit& hit, const Vec3& smooth, float expected_lum,
               uint64_t realization_seed) const;

    float sample_cos_theta(float xi) const;

private:
    const Scene* scene_;
    const RenderInputs* inputs_;
    int norm_samples_;
    std::vector<float> cos_theta_cdf_;
};

Image render(const Scene& scene, const ShadeMode& mode, const RenderInputs& inputs,
             uint64_t seed, int threads = 0);

// PNG (sRGB, exposure applied) or PFM (raw linear), chosen by extension.
void tonemap_write(const Image& img, float exposure_stops, const std::string& path);

}  // namespace glint
