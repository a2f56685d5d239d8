#pragma once

#include <string>
#include <vector>

#include "glint/vec.hpp"

namespace glint {

struct SurfaceMaterial {
    float alpha = 0.25f;          // GGX roughness, (0, 1]
    Vec3 f0 = Vec3(0.04f);        // normal-incidence Fresnel reflectance
    float log_n0 = 14.0f;         // ln of microfacet count per unit uv patch
    float density_scale = 1.0f;   // rho_N, linear multiplier on N0

    static SurfaceMaterial from_sqrt_alpha(float sqrt_alpha) {
        SurfaceMaterial m;
        m.alpha = sqrt_alpha * sqrt_alpha;
        return m;
    }
};

// Isotropic GGX density per steradian; zero for backfacing half-vectors.
float ggx_ndf(float cos_theta_h, float alpha);

// Height-correlated Smith masking-shadowing for GGX.
float smith_g(float cos_theta_i, float cos_theta_o, float alpha);

Vec3 schlick_fresnel(const Vec3& f0, float cos_theta);

// Cook-Torrance F*G*D/(4 (n.wo)(n.wi)) premultiplied with (n.wi).
Vec3 eval_smooth_brdf(const Vec3& wi, const Vec3& wo, const Vec3& n,
                      const SurfaceMaterial& material);

// GGX half-vector importance sample (pdf D(h) cos_theta_h) in the local frame
// where n = +z.
Vec3 sample_ggx_half_vector(float xi1, float xi2, float alpha);

// Precomputed integrated quantities over (cos_theta_o, sqrt(alpha)).
// d_total:   D_H(alpha)          = int_H D(h) dh               (1D in alpha)
// d_visible: E_D(cos_theta_o, a) = int D(h) dh over half-vectors whose
//                                  reflection lies above the horizon
// fresnel_split: split-sum (scale, bias) pair
class AlbedoTables {
public:
    static AlbedoTables build(int resolution = 64, int quadrature_samples = 1 << 14);

    float d_total(float alpha) const;
    float d_visible(float cos_theta_o, float alpha) const;
    void fresnel_split(float cos_theta_o, float alpha, float& scale, float& bias) const;

    int resolution() const { return resolution_; }

    // Binary cache: "GIBL" magic, version, resolutions, row-major LE floats.
    bool save(const std::string& path) const;
    static bool load(const std::string& path, AlbedoTables& out);

    // Cache if present and valid, otherwise build and write.
    static AlbedoTables load_or_build(const std::string& cache_path);

private:
    int resolution_ = 0;
    std::vector<float> d_total_;        // [resolution]
    std::vector<float> d_visible_;      // [resolution * resolution]
    std::vector<float> split_scale_;    // [resolution * resolution]
    std::vector<float> split_bias_;     // [resolution * resolution]
};

}  // namespace glint
