#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "glint/config.hpp"
#include "glint/image.hpp"

namespace glint {

// Line-oriented pass/fail report: "name metric value threshold PASS|FAIL".
struct ValidationReport {
    struct Entry {
        std::string name;
        std::string metric;
        double value = 0.0;
        double threshold = 0.0;
        bool pass = false;
    };

    std::vector<std::string> header_lines;
    std::vector<Entry> entries;

    void add_max(const std::string& name, const std::string& metric, double value,
                 double threshold);  // pass iff value <= threshold
    void add_min(const std::string& name, const std::string& metric, double value,
                 double threshold);  // pass iff value >= threshold
    bool all_pass() const;
    void print(std::ostream& os) const;
    int exit_code() const { return all_pass() ? 0 : 1; }
};

// Loaded inputs shared by the render-like commands.
struct Pipeline {
    Image env;
    RadianceLevels levels;
    PrefilteredEnv penv;
    AlbedoTables tables;
};

Pipeline build_pipeline(const RunConfig& cfg, int threads);

// Statistical checks of the gated counting core: small-N exactness against
// the exact binomial, positive/negative symmetry, mass conservation, gate
// probabilities, the min(N*p, P) gate identity, multinomial marginals.
ValidationReport validate_counting(int64_t draws, uint64_t seed);

// 33x33 log-grid comparison of the naive and stabilized 32-bit pow against a
// 128-bit oracle; error maps written as PFM when out_prefix is nonempty.
ValidationReport validate_pow(const std::string& out_prefix);

// White furnace: sphere under a constant unit environment, glint realization
// means against the smooth render.
ValidationReport run_furnace(int resolution, float sqrt_alpha,
                             const std::vector<float>& densities, int realizations,
                             uint64_t seed, int threads, const std::string& out_prefix,
                             const std::string& albedo_cache, float log_n0 = 12.0f);

struct CompareStats {
    double mean_rel = 0.0;
    double max_rel = 0.0;
    int64_t pixels = 0;
};

// Relative error against the smaller of the two luminances, restricted to
// pixels where both exceed the floor.
CompareStats compare_stats(const Image& a, const Image& b, float lum_floor);

ValidationReport compare_images(const std::string& path_a, const std::string& path_b,
                                float threshold_mean_rel, float lum_floor);

}  // namespace glint
