#include "glint/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace glint {

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw std::runtime_error("config: bad value '" + value + "' for key '" + key + "'");
}

float to_float(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const float f = std::stof(v, &pos);
        if (pos != v.size()) bad_value(key, v);
        return f;
    } catch (const std::logic_error&) {
        bad_value(key, v);
    }
}

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const int i = std::stoi(v, &pos);
        if (pos != v.size()) bad_value(key, v);
        return i;
    } catch (const std::logic_error&) {
        bad_value(key, v);
    }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const uint64_t i = std::stoull(v, &pos);
        if (pos != v.size()) bad_value(key, v);
        return i;
    } catch (const std::logic_error&) {
        bad_value(key, v);
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_value(key, v);
}

Vec3 to_vec3(const std::string& key, const std::string& v) {
    std::istringstream ss(v);
    Vec3 out;
    if (!(ss >> out.x >> out.y >> out.z)) bad_value(key, v);
    std::string rest;
    if (ss >> rest) bad_value(key, v);
    return out;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    constexpr float kDegToRad = std::numbers::pi_v<float> / 180.0f;
    if (key == "scene.geometry") {
        if (value == "sphere") cfg.scene.geometry = GeometryKind::Sphere;
        else if (value == "plane") cfg.scene.geometry = GeometryKind::Plane;
        else bad_value(key, value);
    } else if (key == "scene.camera_position") {
        cfg.scene.camera.position = to_vec3(key, value);
    } else if (key == "scene.look_at") {
        cfg.scene.camera.look_at = to_vec3(key, value);
    } else if (key == "scene.fov_deg") {
        cfg.scene.camera.fov_deg = to_float(key, value);
    } else if (key == "scene.width") {
        cfg.scene.camera.width = to_int(key, value);
    } else if (key == "scene.height") {
        cfg.scene.camera.height = to_int(key, value);
    } else if (key == "scene.env_rotation_deg") {
        cfg.scene.env_rotation = to_float(key, value) * kDegToRad;
    } else if (key == "scene.uv_scale") {
        cfg.scene.uv_scale = to_float(key, value);
    } else if (key == "material.alpha") {
        cfg.scene.material.alpha = to_float(key, value);
    } else if (key == "material.sqrt_alpha") {
        const float sa = to_float(key, value);
        cfg.scene.material.alpha = sa * sa;
    } else if (key == "material.f0") {
        cfg.scene.material.f0 = to_vec3(key, value);
    } else if (key == "material.log_n0") {
        cfg.scene.material.log_n0 = to_float(key, value);
    } else if (key == "material.density_scale") {
        cfg.scene.material.density_scale = to_float(key, value);
    } else if (key == "envmap.path") {
        cfg.envmap.path = value;
    } else if (key == "envmap.constant") {
        cfg.envmap.constant = to_float(key, value);
    } else if (key == "envmap.levels") {
        cfg.envmap.levels = to_int(key, value);
    } else if (key == "envmap.clip_floor") {
        cfg.envmap.clip_floor = to_float(key, value);
    } else if (key == "envmap.space") {
        if (value == "linear") cfg.envmap.space = WeightSpace::Linear;
        else if (value == "log") cfg.envmap.space = WeightSpace::Log;
        else bad_value(key, value);
    } else if (key == "envmap.mips") {
        cfg.envmap.mips = to_int(key, value);
    } else if (key == "envmap.samples") {
        cfg.envmap.samples = to_int(key, value);
    } else if (key == "envmap.quantize16") {
        cfg.envmap.quantize16 = to_bool(key, value);
    } else if (key == "envmap.cache") {
        cfg.envmap.cache = value;
    } else if (key == "mode.kind") {
        if (value == "smooth") cfg.mode.kind = ShadeModeKind::Smooth;
        else if (value == "glint") cfg.mode.kind = ShadeModeKind::GlintOurs;
        else if (value == "const_p") cfg.mode.kind = ShadeModeKind::GlintConstP;
        else if (value == "reference") cfg.mode.kind = ShadeModeKind::Reference;
        else if (value == "furnace") cfg.mode.kind = ShadeModeKind::Furnace;
        else bad_value(key, value);
    } else if (key == "mode.gamma_deg") {
        cfg.mode.gamma_deg = to_float(key, value);
    } else if (key == "mode.realizations") {
        cfg.mode.realizations = to_int(key, value);
    } else if (key == "seed.value") {
        cfg.seed = to_u64(key, value);
    } else if (key == "output.png") {
        cfg.output.png = value;
    } else if (key == "output.pfm") {
        cfg.output.pfm = value;
    } else if (key == "output.exposure_stops") {
        cfg.output.exposure_stops = to_float(key, value);
    } else if (key == "output.albedo_cache") {
        cfg.albedo_cache = value;
    } else {
        throw std::runtime_error("config: unknown key '" + key + "'");
    }
}

}  // namespace

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    RunConfig cfg;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config: malformed section header at line " +
                                         std::to_string(line_no));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: missing '=' at line " + std::to_string(line_no));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw std::runtime_error("config: key '" + key + "' appears before any section");
        set_key(cfg, section + "." + key, value);
    }
    return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw std::runtime_error("config: override '" + assignment + "' is not key=value");
    set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string dump_config(const RunConfig& cfg) {
    std::ostringstream out;
    const float rad_to_deg = 180.0f / std::numbers::pi_v<float>;
    out << "[scene]\n";
    out << "geometry = " << (cfg.scene.geometry == GeometryKind::Sphere ? "sphere" : "plane")
        << "\n";
    const Vec3& cp = cfg.scene.camera.position;
    const Vec3& la = cfg.scene.camera.look_at;
    out << "camera_position = " << cp.x << " " << cp.y << " " << cp.z << "\n";
    out << "look_at = " << la.x << " " << la.y << " " << la.z << "\n";
    out << "fov_deg = " << cfg.scene.camera.fov_deg << "\n";
    out << "width = " << cfg.scene.camera.width << "\n";
    out << "height = " << cfg.scene.camera.height << "\n";
    out << "env_rotation_deg = " << cfg.scene.env_rotation * rad_to_deg << "\n";
    out << "uv_scale = " << cfg.scene.uv_scale << "\n";
    out << "[material]\n";
    out << "alpha = " << cfg.scene.material.alpha << "\n";
    const Vec3& f0 = cfg.scene.material.f0;
    out << "f0 = " << f0.x << " " << f0.y << " " << f0.z << "\n";
    out << "log_n0 = " << cfg.scene.material.log_n0 << "\n";
    out << "density_scale = " << cfg.scene.material.density_scale << "\n";
    out << "[envmap]\n";
    if (!cfg.envmap.path.empty()) out << "path = " << cfg.envmap.path << "\n";
    else out << "constant = " << cfg.envmap.constant << "\n";
    out << "levels = " << cfg.envmap.levels << "\n";
    out << "clip_floor = " << cfg.envmap.clip_floor << "\n";
    out << "space = " << (cfg.envmap.space == WeightSpace::Linear ? "linear" : "log") << "\n";
    out << "mips = " << cfg.envmap.mips << "\n";
    out << "samples = " << cfg.envmap.samples << "\n";
    out << "quantize16 = " << (cfg.envmap.quantize16 ? "true" : "false") << "\n";
    if (!cfg.envmap.cache.empty()) out << "cache = " << cfg.envmap.cache << "\n";
    out << "[mode]\n";
    const char* kind = "smooth";
    switch (cfg.mode.kind) {
        case ShadeModeKind::Smooth: kind = "smooth"; break;
        case ShadeModeKind::GlintOurs: kind = "glint"; break;
        case ShadeModeKind::GlintConstP: kind = "const_p"; break;
        case ShadeModeKind::Reference: kind = "reference"; break;
        case ShadeModeKind::Furnace: kind = "furnace"; break;
    }
    out << "kind = " << kind << "\n";
    out << "gamma_deg = " << cfg.mode.gamma_deg << "\n";
    out << "realizations = " << cfg.mode.realizations << "\n";
    out << "[seed]\n";
    out << "value = " << cfg.seed << "\n";
    out << "[output]\n";
    if (!cfg.output.png.empty()) out << "png = " << cfg.output.png << "\n";
    if (!cfg.output.pfm.empty()) out << "pfm = " << cfg.output.pfm << "\n";
    out << "exposure_stops = " << cfg.output.exposure_stops << "\n";
    return out.str();
}

}  // namespace glint
