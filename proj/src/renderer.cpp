#include "glint/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include "glint/counting.hpp"
#include "glint/sampling.hpp"
#include "glint/util.hpp"

namespace glint {

namespace {

constexpr float kPi = std::numbers::pi_v<float>;
constexpr float kReferenceCountCap = 1e4f;

struct CameraFrame {
    Vec3 origin, forward, right, up;
    float tan_half_fov, aspect;
};

CameraFrame camera_frame(const Camera& cam) {
    if (cam.width < 16 || cam.height < 16)
        throw std::invalid_argument("render resolution must be at least 16x16");
    if (!(cam.fov_deg > 1.0f && cam.fov_deg < 179.0f))
        throw std::invalid_argument("vertical fov must lie in (1, 179) degrees");
    CameraFrame f;
    f.origin = cam.position;
    f.forward = normalize(cam.look_at - cam.position);
    Vec3 up_hint = std::fabs(f.forward.z) < 0.999f ? Vec3(0.0f, 0.0f, 1.0f)
                                                   : Vec3(0.0f, 1.0f, 0.0f);
    f.right = normalize(cross(f.forward, up_hint));
    f.up = cross(f.right, f.forward);
    f.tan_half_fov = std::tan(0.5f * cam.fov_deg * kPi / 180.0f);
    f.aspect = static_cast<float>(cam.width) / static_cast<float>(cam.height);
    return f;
}

Vec3 pixel_ray(const CameraFrame& f, const Camera& cam, float px, float py) {
    const float sx = (2.0f * (px + 0.5f) / static_cast<float>(cam.width) - 1.0f) *
                     f.tan_half_fov * f.aspect;
    const float sy = (1.0f - 2.0f * (py + 0.5f) / static_cast<float>(cam.height)) *
                     f.tan_half_fov;
    return normalize(f.forward + f.right * sx + f.up * sy);
}

struct RawHit {
    bool valid = false;
    Vec3 position, normal;
    Vec2 uv;
};

RawHit intersect(const Scene& scene, const Vec3& origin, const Vec3& dir) {
    RawHit h;
    if (scene.geometry == GeometryKind::Sphere) {
        // Unit sphere at the origin.
        const float b = dot(origin, dir);
        const float c = dot(origin, origin) - 1.0f;
        const float disc = b * b - c;
        if (disc < 0.0f) return h;
        const float t = -b - std::sqrt(disc);
        if (t <= 1e-4f) return h;
        h.valid = true;
        h.position = origin + dir * t;
        h.normal = normalize(h.position);
        h.uv = direction_to_equirect(h.normal);
    } else {
        // Ground plane z = 0 with normal +z.
        if (dir.z >= -1e-7f || origin.z <= 0.0f) return h;
        const float t = -origin.z / dir.z;
        if (t <= 1e-4f) return h;
        h.valid = true;
        h.position = origin + dir * t;
        h.normal = Vec3(0.0f, 0.0f, 1.0f);
        h.uv = Vec2(h.position.x, h.position.y);
    }
    h.uv = h.uv * scene.uv_scale;
    return h;
}

// u wraps with period uv_scale on the sphere; pick the short way around.
float wrap_delta(float d, float period, bool wrap) {
    if (!wrap || period <= 0.0f) return d;
    return d - period * std::round(d / period);
}

}  // namespace

Vec3 rotate_z(const Vec3& v, float angle) {
    const float c = std::cos(angle), s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
}

Hit trace_pixel(const Scene& scene, int px, int py) {
    const CameraFrame frame = camera_frame(scene.camera);
    const Vec3 d0 = pixel_ray(frame, scene.camera, static_cast<float>(px),
                              static_cast<float>(py));
    const RawHit h0 = intersect(scene, frame.origin, d0);

    Hit hit;
    if (!h0.valid) return hit;
    hit.valid = true;
    hit.position = h0.position;
    hit.normal = h0.normal;
    hit.wo = -d0;
    hit.uv = h0.uv;

    const bool wrap_u = scene.geometry == GeometryKind::Sphere;
    const float period = scene.uv_scale;
    auto deriv = [&](int dx, int dy, Vec2& out) {
        RawHit hf = intersect(scene, frame.origin,
                              pixel_ray(frame, scene.camera, static_cast<float>(px + dx),
                                        static_cast<float>(py + dy)));
        if (hf.valid) {
            out = Vec2(wrap_delta(hf.uv.x - h0.uv.x, period, wrap_u), hf.uv.y - h0.uv.y);
            return;
        }
        RawHit hb = intersect(scene, frame.origin,
                              pixel_ray(frame, scene.camera, static_cast<float>(px - dx),
                                        static_cast<float>(py - dy)));
        if (hb.valid) {
            out = Vec2(wrap_delta(h0.uv.x - hb.uv.x, period, wrap_u), h0.uv.y - hb.uv.y);
            return;
        }
        // Isolated hit (silhouette sliver): fall back to a pixel-scale patch.
        const float fallback = scene.uv_scale / static_cast<float>(scene.camera.width);
        out = dx != 0 ? Vec2(fallback, 0.0f) : Vec2(0.0f, fallback);
    };
    deriv(1, 0, hit.duv_dx);
    deriv(0, 1, hit.duv_dy);
    return hit;
}

Vec3 shade_smooth(const Hit& hit, const SurfaceMaterial& material, const Scene& scene,
                  const PrefilteredEnv& penv, const AlbedoTables& tables) {
    const float n_wo = dot(hit.normal, hit.wo);
    if (n_wo <= 0.0f) return Vec3(0.0f);
    const Vec3 wr = reflect(hit.wo, hit.normal);
    Vec3 radiance;
    std::vector<float> weights;
    sample_prefiltered(penv, rotate_z(wr, -scene.env_rotation), material.alpha, radiance,
                       weights);
    float scale = 0.0f, bias = 0.0f;
    tables.fresnel_split(n_wo, material.alpha, scale, bias);
    return (material.f0 * scale + Vec3(bias)) * radiance;
}

std::vector<float> reflection_probs(const Hit& hit, const SurfaceMaterial& material,
                                    const Scene& scene, const PrefilteredEnv& penv,
                                    const AlbedoTables& tables) {
    const float n_wo = dot(hit.normal, hit.wo);
    const Vec3 wr = reflect(hit.wo, hit.normal);
    Vec3 radiance;
    std::vector<float> weights;
    sample_prefiltered(penv, rotate_z(wr, -scene.env_rotation), material.alpha, radiance,
                       weights);

    const float e_d = tables.d_visible(std::fmax(n_wo, 0.0f), material.alpha);
    const float d_h = std::fmax(tables.d_total(material.alpha), 1.0f);
    const float ratio = std::clamp(e_d / d_h, 0.0f, 1.0f);

    std::vector<float> probs(weights.size());
    float sum = 0.0f;
    for (size_t k = 0; k < weights.size(); ++k) {
        probs[k] = std::fmax(0.0f, ratio * weights[k]);
        sum += probs[k];
    }
    if (sum > 1.0f)
        for (float& p : probs) p /= sum;
    return probs;
}

GlintContext build_glint_context(const Scene& scene, const RenderInputs& inputs,
                                 float gamma_deg, int threads) {
    if (inputs.penv == nullptr || inputs.tables == nullptr)
        throw std::invalid_argument("glint shading needs a prefiltered env and albedo tables");
    if (!(gamma_deg > 0.0f && gamma_deg <= 90.0f))
        throw std::invalid_argument("cone half-angle must lie in (0, 90] degrees");

    GlintContext ctx;
    ctx.width = scene.camera.width;
    ctx.height = scene.camera.height;
    ctx.level_radiances = inputs.penv->levels.levels;
    ctx.pixels.resize(static_cast<size_t>(ctx.width) * ctx.height);

    // Prior-work probability: GGX half-vector mass inside the gamma cone.
    const float a2 = scene.material.alpha * scene.material.alpha;
    const float cg = std::cos(gamma_deg * kPi / 180.0f);
    const float sg2 = 1.0f - cg * cg;
    const float const_p = std::clamp(sg2 / ((a2 - 1.0f) * cg * cg + 1.0f), 0.0f, 1.0f);

    const int nthreads = threads > 0 ? threads : default_thread_count();
    parallel_for(static_cast<int64_t>(ctx.pixels.size()), nthreads, [&](int64_t i) {
        const int px = static_cast<int>(i % ctx.width);
        const int py = static_cast<int>(i / ctx.width);
        const Hit hit = trace_pixel(scene, px, py);
        GlintPixel& gp = ctx.pixels[i];
        if (!hit.valid || dot(hit.normal, hit.wo) <= 0.0f) return;
        gp.foreground = true;
        gp.smooth = shade_smooth(hit, scene.material, scene, *inputs.penv, *inputs.tables);
        gp.footprint = footprint_from_ray(hit.duv_dx, hit.duv_dy);
        gp.footprint.center_uv = hit.uv;
        gp.expected_count = scene.material.density_scale * std::exp(scene.material.log_n0) *
                            gp.footprint.area;
        gp.probs = reflection_probs(hit, scene.material, scene, *inputs.penv, *inputs.tables);
        gp.const_p = const_p;
    });
    return ctx;
}

float glint_modulation(const GlintContext& ctx, int px, int py, const Scene& scene,
                       uint64_t global_seed) {
    const GlintPixel& gp = ctx.pixels[static_cast<size_t>(py) * ctx.width + px];
    if (!gp.foreground) return 0.0f;
    const auto vertices = grid_vertices(gp.footprint, scene.material, global_seed);
    return aggregate_modulation(vertices, ctx.level_radiances, gp.probs, gp.expected_count);
}

float const_p_modulation(const GlintContext& ctx, int px, int py, const Scene& scene,
                         uint64_t global_seed) {
    const GlintPixel& gp = ctx.pixels[static_cast<size_t>(py) * ctx.width + px];
    if (!gp.foreground || gp.const_p <= 0.0f || gp.expected_count <= 0.0f) return 0.0f;
    const auto vertices = grid_vertices(gp.footprint, scene.material, global_seed);
    double num = 0.0;
    for (const GridVertexDraw& v : vertices) {
        if (v.weight <= 0.0f) continue;
        const RandomStream stream(v.seed);
        const GatingOutcome out =
            dual_gated(v.count, gp.const_p, stream.uniform(0), stream.uniform(1));
        num += static_cast<double>(v.weight) * out.n_pos;
    }
    return static_cast<float>(num / (static_cast<double>(gp.expected_count) * gp.const_p));
}

Vec3 shade_glint(const Hit& hit, const SurfaceMaterial& material, const Scene& scene,
                 const PrefilteredEnv& penv, const AlbedoTables& tables,
                 uint64_t global_seed) {
    if (!hit.valid || dot(hit.normal, hit.wo) <= 0.0f) return Vec3(0.0f);
    const Vec3 smooth = shade_smooth(hit, material, scene, penv, tables);
    Footprint fp = footprint_from_ray(hit.duv_dx, hit.duv_dy);
    fp.center_uv = hit.uv;
    const float e_np = material.density_scale * std::exp(material.log_n0) * fp.area;
    const auto probs = reflection_probs(hit, material, scene, penv, tables);
    const auto vertices = grid_vertices(fp, material, global_seed);
    const float mod =
        aggregate_modulation(vertices, penv.levels.levels, probs, e_np);
    return smooth * mod;
}

Vec3 shade_const_p(const Hit& hit, const SurfaceMaterial& material, const Scene& scene,
                   const PrefilteredEnv& penv, const AlbedoTables& tables, float gamma_deg,
                   uint64_t global_seed) {
    if (!hit.valid || dot(hit.normal, hit.wo) <= 0.0f) return Vec3(0.0f);
    const Vec3 smooth = shade_smooth(hit, material, scene, penv, tables);

    const float a2 = material.alpha * material.alpha;
    const float cg = std::cos(gamma_deg * kPi / 180.0f);
    const float sg2 = 1.0f - cg * cg;
    const float p = std::clamp(sg2 / ((a2 - 1.0f) * cg * cg + 1.0f), 0.0f, 1.0f);
    if (p <= 0.0f) return Vec3(0.0f);

    Footprint fp = footprint_from_ray(hit.duv_dx, hit.duv_dy);
    fp.center_uv = hit.uv;
    const float e_np = material.density_scale * std::exp(material.log_n0) * fp.area;
    if (e_np <= 0.0f) return Vec3(0.0f);
    const auto vertices = grid_vertices(fp, material, global_seed);
    double num = 0.0;
    for (const GridVertexDraw& v : vertices) {
        if (v.weight <= 0.0f) continue;
        const RandomStream stream(v.seed);
        const GatingOutcome out = dual_gated(v.count, p, stream.uniform(0), stream.uniform(1));
        num += static_cast<double>(v.weight) * out.n_pos;
    }
    return smooth * static_cast<float>(num / (static_cast<double>(e_np) * p));
}

ReferenceShader::ReferenceShader(const Scene& scene, const RenderInputs& inputs,
                                 int norm_samples)
    : scene_(&scene), inputs_(&inputs), norm_samples_(std::max(norm_samples, 256)) {
    if (inputs.env == nullptr)
        throw std::invalid_argument("reference shading needs the raw environment map");

    // Tabulated CDF of the unprojected NDF over cos(theta_h); entry i holds
    // cumulative mass through bin i.
    const int res = 2048;
    cos_theta_cdf_.resize(res);
    double acc = 0.0;
    for (int i = 0; i < res; ++i) {
        const float c = (static_cast<float>(i) + 0.5f) / static_cast<float>(res);
        acc += static_cast<double>(ggx_ndf(c, scene.material.alpha));
        cos_theta_cdf_[i] = static_cast<float>(acc);
    }
    const float total = cos_theta_cdf_.back();
    for (float& v : cos_theta_cdf_) v /= total;
}

float ReferenceShader::sample_cos_theta(float xi) const {
    const int res = static_cast<int>(cos_theta_cdf_.size());
    const auto it = std::lower_bound(cos_theta_cdf_.begin(), cos_theta_cdf_.end(), xi);
    const int bin = static_cast<int>(std::min<ptrdiff_t>(it - cos_theta_cdf_.begin(), res - 1));
    const float lo = bin > 0 ? cos_theta_cdf_[bin - 1] : 0.0f;
    const float hi = cos_theta_cdf_[bin];
    const float frac = hi > lo ? std::clamp((xi - lo) / (hi - lo), 0.0f, 1.0f) : 0.5f;
    return (static_cast<float>(bin) + frac) / static_cast<float>(res);
}

float ReferenceShader::expected_count(const Hit& hit) const {
    Footprint fp = footprint_from_ray(hit.duv_dx, hit.duv_dy);
    const SurfaceMaterial& m = scene_->material;
    return m.density_scale * std::exp(m.log_n0) * fp.area;
}

float ReferenceShader::expected_single_lum(const Hit& hit) const {
    Vec3 t, b;
    build_basis(hit.normal, t, b);
    const Image& env = *inputs_->env;
    double sum = 0.0;
    const uint32_t n = static_cast<uint32_t>(norm_samples_);
    for (uint32_t i = 0; i < n; ++i) {
        const Vec2 xi = hammersley(i, n);
        const float c = sample_cos_theta(xi.x);
        const float s = std::sqrt(std::fmax(0.0f, 1.0f - c * c));
        const float phi = 2.0f * kPi * xi.y;
        const Vec3 h = t * (s * std::cos(phi)) + b * (s * std::sin(phi)) + hit.normal * c;
        if (dot(h, hit.wo) <= 0.0f) continue;
        const Vec3 wi = reflect(hit.wo, h);
        if (dot(wi, hit.normal) <= 0.0f) continue;
        const Vec2 uv = direction_to_equirect(rotate_z(wi, -scene_->env_rotation));
        sum += static_cast<double>(luminance(env.sample_bilinear(uv.x, uv.y)));
    }
    return static_cast<float>(sum / n);
}

Vec3 ReferenceShader::shade(const Hit& hit, const Vec3& smooth, float expected_lum,
                            uint64_t realization_seed) const {
    if (!hit.valid || dot(hit.normal, hit.wo) <= 0.0f) return Vec3(0.0f);
    const float e_np = expected_count(hit);
    if (e_np > kReferenceCountCap)
        throw std::runtime_error("expected microfacet count exceeds the per-pixel cap of 1e4");
    const double denom = static_cast<double>(e_np) * expected_lum;
    if (denom <= 0.0) return Vec3(0.0f);

    // Microfacets are instantiated per base-LOD lattice cell, so nearby
    // pixels sharing a cell see the same draw sequence.
    Footprint fp = footprint_from_ray(hit.duv_dx, hit.duv_dy);
    fp.center_uv = hit.uv;
    const int lod = static_cast<int>(std::floor(std::log2(std::fmax(fp.major_len, 1e-8f))));
    const float spacing = std::exp2(static_cast<float>(lod));
    const int64_t ix = static_cast<int64_t>(std::floor(fp.center_uv.x / spacing));
    const int64_t iy = static_cast<int64_t>(std::floor(fp.center_uv.y / spacing));
    const RandomStream stream(lattice_cell_seed(realization_seed, ix, iy, lod));

    const float frac = e_np - std::floor(e_np);
    int64_t count = static_cast<int64_t>(std::floor(e_np));
    if (stream.uniform(0) < frac) ++count;

    Vec3 t, b;
    build_basis(hit.normal, t, b);
    const Image& env = *inputs_->env;
    double sum = 0.0;
    for (int64_t j = 0; j < count; ++j) {
        const float c = sample_cos_theta(stream.uniform(1, static_cast<uint64_t>(j), 0));
        const float s = std::sqrt(std::fmax(0.0f, 1.0f - c * c));
        const float phi = 2.0f * kPi * stream.uniform(1, static_cast<uint64_t>(j), 1);
        const Vec3 h = t * (s * std::cos(phi)) + b * (s * std::sin(phi)) + hit.normal * c;
        if (dot(h, hit.wo) <= 0.0f) continue;
        const Vec3 wi = reflect(hit.wo, h);
        if (dot(wi, hit.normal) <= 0.0f) continue;
        const Vec2 uv = direction_to_equirect(rotate_z(wi, -scene_->env_rotation));
        sum += static_cast<double>(luminance(env.sample_bilinear(uv.x, uv.y)));
    }
    return smooth * static_cast<float>(sum / denom);
}

namespace {

Vec3 background_color(const Scene& scene, const RenderInputs& inputs, const Vec3& dir) {
    const Vec3 env_dir = rotate_z(dir, -scene.env_rotation);
    if (inputs.env != nullptr) {
        const Vec2 uv = direction_to_equirect(env_dir);
        return inputs.env->sample_bilinear(uv.x, uv.y);
    }
    if (inputs.penv != nullptr) {
        Vec3 radiance;
        std::vector<float> weights;
        sample_prefiltered(*inputs.penv, env_dir, 0.0f, radiance, weights);
        return radiance;
    }
    return Vec3(0.0f);
}

}  // namespace

Image render(const Scene& scene, const ShadeMode& mode, const RenderInputs& inputs,
             uint64_t seed, int threads) {
    const int w = scene.camera.width, h = scene.camera.height;
    const CameraFrame frame = camera_frame(scene.camera);
    Image out(w, h);
    const int nthreads = threads > 0 ? threads : default_thread_count();

    const ShadeModeKind kind =
        mode.kind == ShadeModeKind::Furnace ? ShadeModeKind::GlintOurs : mode.kind;

    if (kind == ShadeModeKind::Reference) {
        if (inputs.penv == nullptr || inputs.tables == nullptr)
            throw std::invalid_argument("reference render needs the prefiltered env for the smooth factor");
        const ReferenceShader ref(scene, inputs);
        // The cap must trip before the parallel loop; a throw from a worker
        // thread would terminate.
        for (int py = 0; py < h; ++py) {
            for (int px = 0; px < w; ++px) {
                const Hit hit = trace_pixel(scene, px, py);
                if (hit.valid && ref.expected_count(hit) > kReferenceCountCap)
                    throw std::runtime_error(
                        "expected microfacet count exceeds the per-pixel cap of 1e4");
            }
        }
        const int realizations = std::max(mode.realizations, 1);
        parallel_for(static_cast<int64_t>(w) * h, nthreads, [&](int64_t i) {
            const int px = static_cast<int>(i % w);
            const int py = static_cast<int>(i / w);
            const Hit hit = trace_pixel(scene, px, py);
            if (!hit.valid) {
                out.texels[i] = background_color(scene, inputs,
                                                 pixel_ray(frame, scene.camera,
                                                           static_cast<float>(px),
                                                           static_cast<float>(py)));
                return;
            }
            const Vec3 smooth =
                shade_smooth(hit, scene.material, scene, *inputs.penv, *inputs.tables);
            const float e_lum = ref.expected_single_lum(hit);
            Vec3 acc(0.0f);
            for (int r = 0; r < realizations; ++r)
                acc += ref.shade(hit, smooth, e_lum,
                                 hash_combine(seed, static_cast<uint64_t>(r)));
            out.texels[i] = acc / static_cast<float>(realizations);
        });
        return out;
    }

    const GlintContext ctx = build_glint_context(scene, inputs, mode.gamma_deg, nthreads);
    parallel_for(static_cast<int64_t>(w) * h, nthreads, [&](int64_t i) {
        const int px = static_cast<int>(i % w);
        const int py = static_cast<int>(i / w);
        const GlintPixel& gp = ctx.pixels[i];
        if (!gp.foreground) {
            out.texels[i] = background_color(scene, inputs,
                                             pixel_ray(frame, scene.camera,
                                                       static_cast<float>(px),
                                                       static_cast<float>(py)));
            return;
        }
        switch (kind) {
            case ShadeModeKind::Smooth:
                out.texels[i] = gp.smooth;
                break;
            case ShadeModeKind::GlintOurs:
                out.texels[i] = gp.smooth * glint_modulation(ctx, px, py, scene, seed);
                break;
            case ShadeModeKind::GlintConstP:
                out.texels[i] = gp.smooth * const_p_modulation(ctx, px, py, scene, seed);
                break;
            default:
                break;
        }
    });
    return out;
}

void tonemap_write(const Image& img, float exposure_stops, const std::string& path) {
    const bool pfm = path.size() >= 4 && path.compare(path.size() - 4, 4, ".pfm") == 0;
    if (pfm)
        write_pfm(img, path);
    else
        write_png(img, path, exposure_stops);
}

}  // namespace glint
