#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glint/envmap.hpp"
#include "glint/renderer.hpp"

namespace glint {

struct EnvmapConfig {
    std::string path;           // empty means a constant furnace environment
    float constant = 1.0f;      // radiance of the constant environment
    int levels = 8;
    float clip_floor = 1e-3f;
    WeightSpace space = WeightSpace::Linear;
    int mips = 7;
    int samples = 1024;
    bool quantize16 = false;
    std::string cache;          // optional prefilter cache path
};

struct OutputConfig {
    std::string png;
    std::string pfm;
    float exposure_stops = 0.0f;
};

struct RunConfig {
    Scene scene;
    ShadeMode mode;
    EnvmapConfig envmap;
    OutputConfig output;
    uint64_t seed = 0;
    std::string albedo_cache;
};

// Plain-text config: [section] headers, key = value lines, '#' comments.
// Sections: scene, material, envmap, mode, seed, output. Unknown keys and
// malformed values raise std::runtime_error naming the offending key.
RunConfig parse_config(const std::string& path);

// Applies one "section.key=value" assignment, same validation as the parser.
void apply_override(RunConfig& cfg, const std::string& assignment);

// The resolved configuration echoed back in parseable form.
std::string dump_config(const RunConfig& cfg);

}  // namespace glint
