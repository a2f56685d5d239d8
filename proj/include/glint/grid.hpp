#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "glint/brdf.hpp"
#include "glint/vec.hpp"

namespace glint {

// Elliptical pixel footprint in uv space.
struct Footprint {
    Vec2 center_uv;
    float major_len = 0.0f;
    float minor_len = 0.0f;
    float orientation = 0.0f;  // angle of the major axis
    float area = 0.0f;         // pi/4 * major * minor, clamped to (1e-12, 1]
};

// Singular values of the 2x2 uv Jacobian give the footprint axes.
Footprint footprint_from_ray(const Vec2& duv_dx, const Vec2& duv_dy);

struct GridVertexDraw {
    float weight = 0.0f;   // barycentric x LOD blend, sums to 1 over the set
    uint64_t seed = 0;     // deterministic function of lattice coords and LOD
    float count = 0.0f;    // N_i = rho_N * N0 * |P|
};

// Deterministic per-vertex seed from wrapped integer lattice coordinates and
// the LOD index.
uint64_t lattice_cell_seed(uint64_t global_seed, int64_t x, int64_t y, int lod);

// Two dyadic LOD levels bracketing the footprint size, three triangle-lattice
// vertices each. Weights form a partition of unity.
std::array<GridVertexDraw, 6> grid_vertices(const Footprint& fp, const SurfaceMaterial& material,
                                            uint64_t global_seed);

// Weighted multinomial modulation from the boxed glint radiance ratio:
// [sum_i w_i sum_k L_k M_k^(i)] / [E_NP sum_k L_k p_k]; 0 if the denominator
// has no reflecting mass.
float aggregate_modulation(std::span<const GridVertexDraw> vertices,
                           std::span<const float> level_radiances,
                           std::span<const float> probs, float expected_count);

}  // namespace glint
