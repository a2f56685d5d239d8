#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "glint/config.hpp"
#include "glint/renderer.hpp"
#include "glint/util.hpp"
#include "glint/validate.hpp"

namespace {

int cmd_prefilter(const std::string& env_path, int k, float clip_floor,
                  const std::string& space, const std::string& out_path, int threads) {
    if (!std::filesystem::exists(env_path)) {
        std::cerr << "error: file not found: " << env_path << "\n";
        return 1;
    }
    glint::RunConfig cfg;
    cfg.envmap.path = env_path;
    cfg.envmap.levels = k;
    cfg.envmap.clip_floor = clip_floor;
    cfg.envmap.space = space == "log" ? glint::WeightSpace::Log : glint::WeightSpace::Linear;
    cfg.envmap.cache = out_path;
    cfg.albedo_cache = "";

    const glint::Image env = glint::load_envmap(env_path);
    const glint::RadianceLevels levels =
        glint::compute_levels(env, k, clip_floor, cfg.envmap.space);
    glint::PrefilterOptions opts;
    opts.threads = threads;
    const glint::PrefilteredEnv penv = glint::prefilter(env, levels, opts);
    if (!glint::save_prefiltered(penv, out_path)) {
        std::cerr << "error: cannot write " << out_path << "\n";
        return 1;
    }
    for (size_t i = 0; i < levels.levels.size(); ++i)
        std::cout << "level " << i + 1 << " = " << levels.levels[i] << "\n";
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_render(glint::RunConfig cfg, const std::vector<std::string>& overrides,
               uint64_t seed, bool seed_set, int threads) {
    for (const std::string& o : overrides) glint::apply_override(cfg, o);
    if (seed_set) cfg.seed = seed;
    std::cout << glint::dump_config(cfg);

    const glint::Pipeline pipe = glint::build_pipeline(cfg, threads);
    glint::RenderInputs inputs;
    inputs.penv = &pipe.penv;
    inputs.env = &pipe.env;
    inputs.tables = &pipe.tables;
    const glint::Image img = glint::render(cfg.scene, cfg.mode, inputs, cfg.seed, threads);
    if (!cfg.output.png.empty())
        glint::tonemap_write(img, cfg.output.exposure_stops, cfg.output.png);
    if (!cfg.output.pfm.empty()) glint::tonemap_write(img, 0.0f, cfg.output.pfm);
    if (cfg.output.png.empty() && cfg.output.pfm.empty())
        std::cout << "no output path configured; render completed\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"image-based lighting of glints: rendering and validation"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may appear after the subcommand name

    uint64_t seed = 0;
    int threads = 0;
    std::string config_path;
    auto* seed_opt = app.add_option("--seed", seed, "global random seed")->envname("GLINT_SEED");
    app.add_option("--threads", threads, "worker thread count, 0 = hardware")
        ->envname("GLINT_THREADS");
    app.add_option("--config", config_path, "config file path")->envname("GLINT_CONFIG");

    auto* pre = app.add_subcommand("prefilter", "prefilter an environment map");
    std::string env_path, out_path = "env.gibp", space = "linear";
    int k = 8;
    float clip_floor = 1e-3f;
    pre->add_option("--env", env_path, "environment map (.hdr or .pfm)")->required();
    pre->add_option("--levels", k, "number of radiance levels");
    pre->add_option("--clip-floor", clip_floor, "lower luminance clip");
    pre->add_option("--space", space, "weight interpolation space: linear|log");
    pre->add_option("--out", out_path, "output cache path");

    auto* ren = app.add_subcommand("render", "render a configured scene");
    std::vector<std::string> overrides;
    ren->add_option("overrides", overrides, "section.key=value config overrides");

    auto* vc = app.add_subcommand("validate-counting", "statistical counting checks");
    int64_t draws = 1000000;
    vc->add_option("--draws", draws, "draws per check");

    auto* vp = app.add_subcommand("validate-pow", "pow stabilization error maps");
    std::string pow_prefix = "pow";
    vp->add_option("--out-prefix", pow_prefix, "error map output prefix");

    auto* fur = app.add_subcommand("furnace", "white furnace validation");
    int resolution = 128, realizations = 256;
    float sqrt_alpha = 0.4f;
    std::vector<float> densities;
    std::string furnace_prefix = "furnace", albedo_cache = "albedo.gibl";
    fur->add_option("--resolution", resolution, "square image resolution");
    fur->add_option("--sqrt-alpha", sqrt_alpha, "sqrt of GGX roughness");
    fur->add_option("--density", densities, "density multipliers rho_N");
    fur->add_option("--realizations", realizations, "realizations to average");
    fur->add_option("--out-prefix", furnace_prefix, "image output prefix");
    fur->add_option("--albedo-cache", albedo_cache, "albedo table cache path");
    float log_n0 = 12.0f;
    fur->add_option("--log-n0", log_n0, "ln of base microfacet density");

    auto* cmp = app.add_subcommand("compare", "relative image comparison");
    std::string img_a, img_b;
    float cmp_threshold = 0.05f, cmp_floor = 0.01f;
    cmp->add_option("a", img_a, "first image")->required();
    cmp->add_option("b", img_b, "second image")->required();
    cmp->add_option("--threshold", cmp_threshold, "mean relative error threshold");
    cmp->add_option("--floor", cmp_floor, "luminance floor");

    CLI11_PARSE(app, argc, argv);

    try {
        if (pre->parsed())
            return cmd_prefilter(env_path, k, clip_floor, space, out_path, threads);
        if (ren->parsed()) {
            glint::RunConfig cfg;
            if (!config_path.empty()) cfg = glint::parse_config(config_path);
            return cmd_render(cfg, overrides, seed, seed_opt->count() > 0, threads);
        }
        if (vc->parsed()) {
            const glint::ValidationReport report = glint::validate_counting(draws, seed);
            report.print(std::cout);
            return report.exit_code();
        }
        if (vp->parsed()) {
            const glint::ValidationReport report = glint::validate_pow(pow_prefix);
            report.print(std::cout);
            return report.exit_code();
        }
        if (fur->parsed()) {
            if (densities.empty())
                densities = {std::exp(-2.0f), 1.0f, std::exp(2.0f)};
            const glint::ValidationReport report =
                glint::run_furnace(resolution, sqrt_alpha, densities, realizations, seed,
                                   threads, furnace_prefix, albedo_cache, log_n0);
            report.print(std::cout);
            return report.exit_code();
        }
        if (cmp->parsed()) {
            const glint::ValidationReport report =
                glint::compare_images(img_a, img_b, cmp_threshold, cmp_floor);
            report.print(std::cout);
            return report.exit_code();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
