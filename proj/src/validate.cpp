#include "glint/validate.hpp"

#include <quadmath.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>

#include "glint/counting.hpp"
#include "glint/renderer.hpp"
#include "glint/util.hpp"

namespace glint {

void ValidationReport::add_max(const std::string& name, const std::string& metric,
                               double value, double threshold) {
    entries.push_back({name, metric, value, threshold, std::isfinite(value) && value <= threshold});
}

void ValidationReport::add_min(const std::string& name, const std::string& metric,
                               double value, double threshold) {
    entries.push_back({name, metric, value, threshold, std::isfinite(value) && value >= threshold});
}

bool ValidationReport::all_pass() const {
    for (const Entry& e : entries)
        if (!e.pass) return false;
    return true;
}

void ValidationReport::print(std::ostream& os) const {
    for (const std::string& line : header_lines) os << "# " << line << "\n";
    char buf[256];
    for (const Entry& e : entries) {
        std::snprintf(buf, sizeof(buf), "%s %s %.6g %.6g %s\n", e.name.c_str(),
                      e.metric.c_str(), e.value, e.threshold, e.pass ? "PASS" : "FAIL");
        os << buf;
    }
}

Pipeline build_pipeline(const RunConfig& cfg, int threads) {
    Pipeline p;
    const bool constant_env = cfg.envmap.path.empty() || cfg.mode.kind == ShadeModeKind::Furnace;
    if (constant_env)
        p.env = Image(32, 16, Vec3(cfg.envmap.constant));
    else
        p.env = load_envmap(cfg.envmap.path);

    p.levels = compute_levels(p.env, cfg.envmap.levels, cfg.envmap.clip_floor, cfg.envmap.space);

    bool loaded = false;
    if (!cfg.envmap.cache.empty() && load_prefiltered(cfg.envmap.cache, p.penv))
        loaded = p.penv.k_count == cfg.envmap.levels;
    if (!loaded) {
        PrefilterOptions opts;
        opts.mip_count = cfg.envmap.mips;
        opts.samples_per_texel = cfg.envmap.samples;
        opts.quantize16 = cfg.envmap.quantize16;
        opts.threads = threads;
        p.penv = prefilter(p.env, p.levels, opts);
        if (!cfg.envmap.cache.empty()) save_prefiltered(p.penv, cfg.envmap.cache);
    }
    p.tables = AlbedoTables::load_or_build(cfg.albedo_cache);
    return p;
}

namespace {

double binomial_pmf(int n, int k, double p) {
    double c = 1.0;
    for (int i = 0; i < k; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
    return c * std::pow(p, k) * std::pow(1.0 - p, n - k);
}

// TV distance between an empirical integer histogram and an exact binomial.
double tv_vs_binomial(const std::vector<int64_t>& hist, int64_t draws, int n, double p) {
    double tv = 0.0;
    for (int k = 0; k < static_cast<int>(hist.size()); ++k) {
        const double emp = static_cast<double>(hist[k]) / static_cast<double>(draws);
        tv += std::fabs(emp - binomial_pmf(n, k, p));
    }
    return 0.5 * tv;
}

double tv_between(const std::vector<int64_t>& a, const std::vector<int64_t>& b,
                  int64_t draws) {
    double tv = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        tv += std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])) /
              static_cast<double>(draws);
    return 0.5 * tv;
}

}  // namespace

ValidationReport validate_counting(int64_t draws, uint64_t seed) {
    if (draws < 100000) throw std::invalid_argument("validate-counting needs at least 1e5 draws");
    ValidationReport report;
    report.header_lines.push_back("counting validation, draws=" + std::to_string(draws) +
                                  " seed=" + std::to_string(seed));
    const RandomStream stream(seed);
    char name[128];

    // Small-N exactness of the dual-gated draw vs the exact binomial pmf.
    for (int n = 0; n <= 2; ++n) {
        for (const double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            std::vector<int64_t> hist(static_cast<size_t>(n) + 1, 0);
            for (int64_t d = 0; d < draws; ++d) {
                const uint64_t tag = static_cast<uint64_t>(n * 100 + static_cast<int>(p * 10));
                const GatingOutcome out =
                    dual_gated(static_cast<float>(n), static_cast<float>(p),
                               stream.uniform(tag, static_cast<uint64_t>(d), 0),
                               stream.uniform(tag, static_cast<uint64_t>(d), 1));
                const int k = std::clamp(static_cast<int>(std::lround(out.n_pos)), 0, n);
                ++hist[k];
            }
            std::snprintf(name, sizeof(name), "dual_exact_n%d_p%.1f", n, p);
            report.add_max(name, "tv", tv_vs_binomial(hist, draws, n, p), 0.005);
        }
    }

    // Symmetry: n_pos at p is distributed like n_neg at 1-p. Integer-width
    // bins keep the empirical TV noise floor below the threshold.
    int sym_case = 0;
    for (const double n : {0.5, 1.5, 3.0, 10.0, 100.0}) {
        for (const double p : {0.1, 0.5}) {
            const int bins = static_cast<int>(std::ceil(n)) + 2;
            std::vector<int64_t> ha(bins, 0), hb(bins, 0);
            const uint64_t ta = 900 + static_cast<uint64_t>(2 * sym_case);
            const uint64_t tb = ta + 1;
            for (int64_t d = 0; d < draws; ++d) {
                const GatingOutcome a =
                    dual_gated(static_cast<float>(n), static_cast<float>(p),
                               stream.uniform(ta, static_cast<uint64_t>(d), 0),
                               stream.uniform(ta, static_cast<uint64_t>(d), 1));
                const GatingOutcome b =
                    dual_gated(static_cast<float>(n), static_cast<float>(1.0 - p),
                               stream.uniform(tb, static_cast<uint64_t>(d), 0),
                               stream.uniform(tb, static_cast<uint64_t>(d), 1));
                ++ha[std::clamp(static_cast<int>(std::lround(a.n_pos)), 0, bins - 1)];
                ++hb[std::clamp(static_cast<int>(std::lround(b.n_neg)), 0, bins - 1)];
            }
            std::snprintf(name, sizeof(name), "dual_symmetry_n%g_p%.1f", n, p);
            report.add_max(name, "tv", tv_between(ha, hb, draws), 0.005);
            ++sym_case;
        }
    }

    // Single gating is known to be asymmetric for small N > 1; require that
    // the asymmetry is actually visible. (At exactly N=1 the generalized
    // single gate degenerates to a Bernoulli draw and is symmetric.)
    {
        const float n = 1.5f;
        const double p = 0.3;
        const int bins = 31;
        std::vector<int64_t> ha(bins, 0), hb(bins, 0);
        for (int64_t d = 0; d < draws; ++d) {
            const float a = single_gated(n, static_cast<float>(p),
                                         stream.uniform(910, static_cast<uint64_t>(d), 0),
                                         stream.uniform(910, static_cast<uint64_t>(d), 1));
            const float b = single_gated(n, static_cast<float>(1.0 - p),
                                         stream.uniform(911, static_cast<uint64_t>(d), 0),
                                         stream.uniform(911, static_cast<uint64_t>(d), 1));
            ++ha[std::clamp(static_cast<int>(std::lround(a * 10.0f)), 0, bins - 1)];
            ++hb[std::clamp(static_cast<int>(std::lround((n - b) * 10.0f)), 0, bins - 1)];
        }
        report.add_min("single_asymmetry", "tv", tv_between(ha, hb, draws), 0.01);
    }

    // Mass conservation for integer N above the dithered region.
    for (const int n : {3, 7, 10}) {
        double max_err = 0.0;
        const int64_t nd = std::min<int64_t>(draws, 200000);
        for (int64_t d = 0; d < nd; ++d) {
            const GatingOutcome out =
                dual_gated(static_cast<float>(n), 0.4f,
                           stream.uniform(920 + static_cast<uint64_t>(n),
                                          static_cast<uint64_t>(d), 0),
                           stream.uniform(920 + static_cast<uint64_t>(n),
                                          static_cast<uint64_t>(d), 1));
            max_err = std::fmax(max_err,
                                std::fabs(static_cast<double>(out.n_pos) + out.n_neg - n));
        }
        std::snprintf(name, sizeof(name), "conservation_n%d", n);
        report.add_max(name, "max_abs", max_err, 1e-3);
    }

    // Gate probabilities: P(n=N) = p^N and P(n_bar=N) = (1-p)^N within 3
    // binomial sigma.
    for (const int n : {3, 10}) {
        for (const double p : {0.3, 0.7}) {
            int64_t pos_all = 0, neg_all = 0;
            for (int64_t d = 0; d < draws; ++d) {
                const uint64_t tag = 940 + static_cast<uint64_t>(n * 10 + static_cast<int>(p * 10));
                const GatingOutcome out =
                    dual_gated(static_cast<float>(n), static_cast<float>(p),
                               stream.uniform(tag, static_cast<uint64_t>(d), 0),
                               stream.uniform(tag, static_cast<uint64_t>(d), 1));
                if (out.n_pos > static_cast<float>(n) - 0.5f) ++pos_all;
                if (out.n_neg > static_cast<float>(n) - 0.5f) ++neg_all;
            }
            const double q_pos = std::pow(p, n);
            const double q_neg = std::pow(1.0 - p, n);
            const double s_pos = 3.0 * std::sqrt(q_pos * (1.0 - q_pos) / draws);
            const double s_neg = 3.0 * std::sqrt(q_neg * (1.0 - q_neg) / draws);
            std::snprintf(name, sizeof(name), "gate_pos_n%d_p%.1f", n, p);
            report.add_max(name, "abs_dev",
                           std::fabs(static_cast<double>(pos_all) / draws - q_pos),
                           std::fmax(s_pos, 1e-5));
            std::snprintf(name, sizeof(name), "gate_neg_n%d_p%.1f", n, p);
            report.add_max(name, "abs_dev",
                           std::fabs(static_cast<double>(neg_all) / draws - q_neg),
                           std::fmax(s_neg, 1e-5));
        }
    }

    // Gate identity: min(N*p, 1-(1-p)^N) picks N*p below N=1 and the
    // complement probability above, with 64-bit evaluation.
    {
        std::mt19937_64 rng(hash_mix(seed ^ 0xabcdefULL));
        std::uniform_real_distribution<double> up(0.0, 1.0);
        int64_t violations = 0;
        for (int64_t d = 0; d < 100000; ++d) {
            const double n = std::exp(std::log(1e-2) + up(rng) * std::log(1e4));
            const double p = up(rng);
            const double comp = 1.0 - std::exp(n * std::log1p(-p));
            const double lhs = std::fmin(n * p, comp);
            const double expected = n <= 1.0 ? n * p : comp;
            if (std::fabs(lhs - expected) > 1e-12) ++violations;
        }
        report.add_max("gate_identity", "violations", static_cast<double>(violations), 0.0);
    }

    // Multinomial: exact conservation for integer N and 3% marginal means.
    for (const int n : {10, 100}) {
        std::mt19937_64 rng(hash_mix(seed ^ static_cast<uint64_t>(n)));
        std::uniform_real_distribution<double> up(0.05, 1.0);
        std::vector<float> probs(5);
        double s = 0.0;
        for (int k = 0; k < 4; ++k) {
            probs[k] = static_cast<float>(up(rng));
            s += probs[k];
        }
        for (int k = 0; k < 4; ++k) probs[k] = static_cast<float>(probs[k] / s * 0.8);
        probs[4] = 0.2f;

        const int64_t nd = std::min<int64_t>(draws, 100000);
        std::vector<double> mean(5, 0.0);
        double max_sum_err = 0.0;
        for (int64_t d = 0; d < nd; ++d) {
            const RandomStream local(hash_combine(seed, 0x6d6e0000ULL + static_cast<uint64_t>(d) +
                                                            static_cast<uint64_t>(n) * 0x100000ULL));
            const std::vector<float> counts =
                sample_multinomial(static_cast<float>(n), probs, local, 0);
            double sum = 0.0;
            for (int k = 0; k < 5; ++k) {
                sum += counts[k];
                mean[k] += counts[k];
            }
            max_sum_err = std::fmax(max_sum_err, std::fabs(sum - n));
        }
        std::snprintf(name, sizeof(name), "multinomial_sum_n%d", n);
        report.add_max(name, "max_abs", max_sum_err, 1e-3);
        double worst = 0.0;
        for (int k = 0; k < 5; ++k) {
            const double expect = static_cast<double>(n) * probs[k];
            worst = std::fmax(worst, std::fabs(mean[k] / nd - expect) / expect);
        }
        std::snprintf(name, sizeof(name), "multinomial_marginals_n%d", n);
        report.add_max(name, "max_rel", worst, 0.03);
    }

    // Mean-ratio text map over (p, log10 N): '9' means the empirical mean is
    // within 1% of N*p, lower digits are further off.
    report.header_lines.push_back("mean ratio map, rows log10(N)=0..2, cols p=0.05..0.95");
    for (int row = 0; row <= 8; ++row) {
        const double n = std::pow(10.0, 2.0 * row / 8.0);
        std::string line;
        for (int col = 0; col <= 8; ++col) {
            const double p = 0.05 + 0.9 * col / 8.0;
            double acc = 0.0;
            const int64_t nd = 4000;
            for (int64_t d = 0; d < nd; ++d) {
                const uint64_t tag = 0x68690000ULL + static_cast<uint64_t>(row * 16 + col);
                acc += dual_gated(static_cast<float>(n), static_cast<float>(p),
                                  stream.uniform(tag, static_cast<uint64_t>(d), 0),
                                  stream.uniform(tag, static_cast<uint64_t>(d), 1))
                           .n_pos;
            }
            const double rel = std::fabs(acc / nd - n * p) / (n * p);
            const int digit = std::clamp(9 - static_cast<int>(rel * 100.0), 0, 9);
            line += static_cast<char>('0' + digit);
        }
        report.header_lines.push_back(line);
    }
    return report;
}

ValidationReport validate_pow(const std::string& out_prefix) {
    ValidationReport report;
    report.header_lines.push_back("oracle: exp(N*log1p(-p)) evaluated in 128-bit binary float");

    const int res = 33;
    Image naive_map(res, res), stable_map(res, res);
    double naive_max = 0.0, stable_max = 0.0, naive_region_max = 0.0;
    for (int j = 0; j < res; ++j) {
        const double en = 16.0 * j / (res - 1);  // log10 N in [0, 16]
        const double n = std::pow(10.0, en);
        for (int i = 0; i < res; ++i) {
            const double ep = -16.0 + 16.0 * i / (res - 1);  // log10 p in [-16, 0]
            const double p = std::pow(10.0, ep);
            const __float128 oracle_q = expq(static_cast<__float128>(n) *
                                             log1pq(-static_cast<__float128>(p)));
            const double oracle = static_cast<double>(oracle_q);
            const double e_naive =
                std::fabs(naive_pow_one_minus(static_cast<float>(p), static_cast<float>(n)) -
                          oracle);
            const double e_stable =
                std::fabs(stable_pow_one_minus(static_cast<float>(p), static_cast<float>(n)) -
                          oracle);
            naive_map.at(i, res - 1 - j) = Vec3(static_cast<float>(e_naive));
            stable_map.at(i, res - 1 - j) = Vec3(static_cast<float>(e_stable));
            naive_max = std::fmax(naive_max, e_naive);
            stable_max = std::fmax(stable_max, e_stable);
            if (p < std::pow(10.0, -7.525) && n > 1.0 / p)
                naive_region_max = std::fmax(naive_region_max, e_naive);
        }
    }
    report.add_min("naive_pow_failure_region", "max_abs", naive_region_max, 0.9);
    report.add_max("stable_pow_grid", "max_abs", stable_max, 1e-3);
    report.add_max("stable_pow_at_zero_exponent", "abs",
                   std::fabs(stable_pow_one_minus(0.5f, 0.0f) - 1.0), 0.0);
    if (!out_prefix.empty()) {
        write_pfm(naive_map, out_prefix + "_naive_err.pfm");
        write_pfm(stable_map, out_prefix + "_stable_err.pfm");
    }
    return report;
}

ValidationReport run_furnace(int resolution, float sqrt_alpha,
                             const std::vector<float>& densities, int realizations,
                             uint64_t seed, int threads, const std::string& out_prefix,
                             const std::string& albedo_cache, float log_n0) {
    if (realizations < 256) throw std::invalid_argument("furnace needs at least 256 realizations");
    ValidationReport report;
    report.header_lines.push_back("white furnace, resolution=" + std::to_string(resolution) +
                                  " realizations=" + std::to_string(realizations));

    RunConfig cfg;
    cfg.scene.camera.width = resolution;
    cfg.scene.camera.height = resolution;
    cfg.scene.material = SurfaceMaterial::from_sqrt_alpha(sqrt_alpha);
    cfg.scene.material.f0 = Vec3(1.0f);
    cfg.scene.material.log_n0 = log_n0;
    cfg.mode.kind = ShadeModeKind::Furnace;
    cfg.envmap.levels = 4;
    cfg.albedo_cache = albedo_cache;
    const int nthreads = threads > 0 ? threads : default_thread_count();
    const Pipeline pipe = build_pipeline(cfg, nthreads);

    RenderInputs inputs;
    inputs.penv = &pipe.penv;
    inputs.env = &pipe.env;
    inputs.tables = &pipe.tables;

    // Smooth furnace luminance must reproduce the scale+bias of the Fresnel
    // table, since the prefiltered radiance of a unit env is 1.
    GlintContext base_ctx;
    {
        Scene scene = cfg.scene;
        base_ctx = build_glint_context(scene, inputs, 5.0f, nthreads);
        double worst = 0.0;
        for (int py = 0; py < resolution; ++py) {
            for (int px = 0; px < resolution; ++px) {
                const GlintPixel& gp = base_ctx.pixels[static_cast<size_t>(py) * resolution + px];
                if (!gp.foreground) continue;
                const Hit hit = trace_pixel(scene, px, py);
                float scale = 0.0f, bias = 0.0f;
                pipe.tables.fresnel_split(dot(hit.normal, hit.wo), scene.material.alpha, scale,
                                          bias);
                const float expect = scale + bias;
                if (expect > 0.01f)
                    worst = std::fmax(worst,
                                      std::fabs(luminance(gp.smooth) - expect) / expect);
            }
        }
        report.add_max("furnace_smooth_vs_lut", "max_rel", worst, 0.01);
        double count_sum = 0.0, prob_sum = 0.0;
        int64_t fg = 0;
        for (const GlintPixel& gp : base_ctx.pixels) {
            if (!gp.foreground) continue;
            ++fg;
            count_sum += gp.expected_count;
            for (float p : gp.probs) prob_sum += p;
        }
        if (fg > 0)
            report.header_lines.push_back(
                "mean expected count = " + std::to_string(count_sum / fg) +
                ", mean reflect prob = " + std::to_string(prob_sum / fg) +
                ", threads = " + std::to_string(nthreads));
        if (!out_prefix.empty()) {
            Image smooth_img(resolution, resolution);
            for (size_t i = 0; i < base_ctx.pixels.size(); ++i)
                smooth_img.texels[i] = base_ctx.pixels[i].smooth;
            write_png(smooth_img, out_prefix + "_smooth.png");
        }
    }

    char name[128];
    for (size_t di = 0; di < densities.size(); ++di) {
        Scene scene = cfg.scene;
        scene.material.density_scale = densities[di];
        const GlintContext ctx = build_glint_context(scene, inputs, 5.0f, nthreads);

        std::vector<double> mean(ctx.pixels.size(), 0.0);
        parallel_for(static_cast<int64_t>(ctx.pixels.size()), nthreads, [&](int64_t i) {
            const int px = static_cast<int>(i % resolution);
            const int py = static_cast<int>(i / resolution);
            if (!ctx.pixels[i].foreground) return;
            double acc = 0.0;
            for (int r = 0; r < realizations; ++r)
                acc += glint_modulation(ctx, px, py, scene,
                                        hash_combine(seed, static_cast<uint64_t>(r)));
            mean[i] = acc / realizations;
        });

        double err_sum = 0.0;
        int64_t count = 0;
        int64_t bright = 0, fg = 0;
        for (size_t i = 0; i < ctx.pixels.size(); ++i) {
            const GlintPixel& gp = ctx.pixels[i];
            if (!gp.foreground) continue;
            ++fg;
            const float lum = luminance(gp.smooth);
            if (lum > 0.01f) {
                err_sum += std::fabs(mean[i] - 1.0);
                ++count;
            }
            const int px = static_cast<int>(i % resolution);
            const int py = static_cast<int>(i / resolution);
            const float single =
                glint_modulation(ctx, px, py, scene, hash_combine(seed, 0));
            if (single > 2.0f) ++bright;
        }
        std::snprintf(name, sizeof(name), "furnace_mean_rel_density_%zu", di);
        report.add_max(name, "mean_rel", count > 0 ? err_sum / count : 1.0, 0.03);
        std::snprintf(name, sizeof(name), "furnace_bright_fraction_density_%zu", di);
        report.header_lines.push_back(
            std::string(name) + " = " +
            std::to_string(fg > 0 ? static_cast<double>(bright) / fg : 0.0));

        if (!out_prefix.empty()) {
            Image glint_img(resolution, resolution);
            for (size_t i = 0; i < ctx.pixels.size(); ++i) {
                const int px = static_cast<int>(i % resolution);
                const int py = static_cast<int>(i / resolution);
                glint_img.texels[i] =
                    ctx.pixels[i].smooth *
                    glint_modulation(ctx, px, py, scene, hash_combine(seed, 0));
            }
            std::snprintf(name, sizeof(name), "_glint_density_%zu.png", di);
            write_png(glint_img, out_prefix + name);
        }
    }

    // Sparser surfaces produce fewer but brighter glints; require >1% of
    // foreground pixels above 2x smooth at the lowest density.
    if (densities.size() >= 2) {
        auto bright_fraction = [&](float density) {
            Scene scene = cfg.scene;
            scene.material.density_scale = density;
            const GlintContext ctx = build_glint_context(scene, inputs, 5.0f, nthreads);
            int64_t bright = 0, fg = 0;
            for (size_t i = 0; i < ctx.pixels.size(); ++i) {
                if (!ctx.pixels[i].foreground) continue;
                ++fg;
                const int px = static_cast<int>(i % resolution);
                const int py = static_cast<int>(i / resolution);
                if (glint_modulation(ctx, px, py, scene, hash_combine(seed, 0)) > 2.0f) ++bright;
            }
            return fg > 0 ? static_cast<double>(bright) / fg : 0.0;
        };
        const float lo = *std::min_element(densities.begin(), densities.end());
        const float hi = *std::max_element(densities.begin(), densities.end());
        const double frac_lo = bright_fraction(lo);
        const double frac_hi = bright_fraction(hi);
        report.add_min("furnace_sparse_bright_fraction", "fraction", frac_lo, 0.01);
        report.add_min("furnace_sparsity_tradeoff", "fraction_gap", frac_lo - frac_hi, 1e-9);
    }
    return report;
}

CompareStats compare_stats(const Image& a, const Image& b, float lum_floor) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("compare: image dimensions differ");
    CompareStats stats;
    double sum = 0.0;
    for (size_t i = 0; i < a.texels.size(); ++i) {
        const double la = luminance(a.texels[i]);
        const double lb = luminance(b.texels[i]);
        const double lo = std::fmin(la, lb);
        if (!(lo > lum_floor)) continue;
        const double rel = std::fabs(la - lb) / lo;
        sum += rel;
        stats.max_rel = std::fmax(stats.max_rel, rel);
        ++stats.pixels;
    }
    stats.mean_rel = stats.pixels > 0 ? sum / stats.pixels : 0.0;
    return stats;
}

ValidationReport compare_images(const std::string& path_a, const std::string& path_b,
                                float threshold_mean_rel, float lum_floor) {
    const Image a = load_image(path_a);
    const Image b = load_image(path_b);
    const CompareStats stats = compare_stats(a, b, lum_floor);
    ValidationReport report;
    report.header_lines.push_back("compare " + path_a + " vs " + path_b + " over " +
                                  std::to_string(stats.pixels) + " pixels");
    report.add_max("compare_mean", "mean_rel", stats.mean_rel, threshold_mean_rel);
    report.header_lines.push_back("max_rel = " + std::to_string(stats.max_rel));
    return report;
}

}  // namespace glint
