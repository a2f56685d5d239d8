#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <vector>

#include "doctest.h"
#include "glint/counting.hpp"
#include "glint/envmap.hpp"
#include "glint/image.hpp"

using glint::compute_levels;
using glint::direction_to_equirect;
using glint::equirect_direction;
using glint::fuzzy_weights;
using glint::Image;
using glint::load_envmap;
using glint::load_pfm;
using glint::luminance;
using glint::prefilter;
using glint::PrefilteredEnv;
using glint::PrefilterOptions;
using glint::RadianceLevels;
using glint::RandomStream;
using glint::rgbe_to_rgb;
using glint::sample_prefiltered;
using glint::Vec2;
using glint::Vec3;
using glint::WeightSpace;
using glint::write_pfm;

namespace {

PrefilterOptions fast_options(int mips = 4, int samples = 256) {
    PrefilterOptions o;
    o.mip_count = mips;
    o.samples_per_texel = samples;
    o.threads = 2;
    return o;
}

void check_partition_of_unity(const PrefilteredEnv& penv) {
    for (size_t m = 0; m < penv.mips.size(); ++m) {
        const auto& mip = penv.mips[m];
        for (int y = 0; y < mip.height; ++y) {
            for (int x = 0; x < mip.width; ++x) {
                const float* t = penv.texel(static_cast<int>(m), x, y);
                float sum = 0.0f;
                for (int k = 0; k < penv.k_count; ++k) sum += t[3 + k];
                REQUIRE(std::abs(sum - 1.0f) <= 1e-3f);
            }
        }
    }
}

}  // namespace

TEST_CASE("rgbe decode oracle") {
    // mantissa * 2^(e-136): 128 * 2^(129-136) = 1.
    const Vec3 v = rgbe_to_rgb(128, 128, 128, 129);
    CHECK(v.x == doctest::Approx(1.0));
    CHECK(v.y == doctest::Approx(1.0));
    CHECK(v.z == doctest::Approx(1.0));
    CHECK(rgbe_to_rgb(255, 0, 64, 128).x == doctest::Approx(255.0 / 256.0));
    CHECK(rgbe_to_rgb(255, 0, 64, 128).y == doctest::Approx(0.0));
    CHECK(rgbe_to_rgb(255, 0, 64, 128).z == doctest::Approx(0.25));
    // Zero exponent byte means black regardless of mantissas.
    CHECK(rgbe_to_rgb(10, 20, 30, 0).x == 0.0f);
}

TEST_CASE("hdr flat scanline load") {
    const std::string path = "flat_test.hdr";
    {
        std::ofstream out(path, std::ios::binary);
        out << "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 2\n";
        const unsigned char px[8] = {128, 128, 128, 129, 64, 128, 255, 130};
        out.write(reinterpret_cast<const char*>(px), 8);
    }
    const Image img = load_envmap(path);
    REQUIRE(img.width == 2);
    REQUIRE(img.height == 1);
    CHECK(img.at(0, 0).x == doctest::Approx(1.0));
    CHECK(img.at(1, 0).x == doctest::Approx(rgbe_to_rgb(64, 128, 255, 130).x));
    CHECK(img.at(1, 0).z == doctest::Approx(rgbe_to_rgb(64, 128, 255, 130).z));
    std::remove(path.c_str());
}

TEST_CASE("pfm round trip is bit exact") {
    const RandomStream s(9);
    Image img(8, 4);
    for (size_t i = 0; i < img.texels.size(); ++i)
        img.texels[i] = Vec3(s.uniform(i, 0) * 100.0f, s.uniform(i, 1), s.uniform(i, 2) * 1e-4f);
    const std::string path = "roundtrip_test.pfm";
    write_pfm(img, path);
    const Image back = load_pfm(path);
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    for (size_t i = 0; i < img.texels.size(); ++i) {
        CHECK(back.texels[i].x == img.texels[i].x);
        CHECK(back.texels[i].y == img.texels[i].y);
        CHECK(back.texels[i].z == img.texels[i].z);
    }
    std::remove(path.c_str());
}

TEST_CASE("envmap loader rejects non 2:1 aspect") {
    const std::string path = "square_test.pfm";
    write_pfm(Image(4, 4, Vec3(1.0f)), path);
    CHECK_THROWS_WITH_AS(load_envmap(path), doctest::Contains("not equirectangular 2:1"),
                         std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("equirect mapping round trip") {
    CHECK(equirect_direction(0.0f, 0.0f).z == doctest::Approx(1.0));
    CHECK(equirect_direction(0.0f, 1.0f).z == doctest::Approx(-1.0));
    const RandomStream s(15);
    for (int i = 0; i < 1000; ++i) {
        const float u = s.uniform(i, 0);
        const float v = 0.01f + 0.98f * s.uniform(i, 1);
        const Vec2 uv = direction_to_equirect(equirect_direction(u, v));
        CHECK(std::abs(uv.x - u) < 1e-4f);
        CHECK(std::abs(uv.y - v) < 1e-4f);
    }
}

TEST_CASE("luminance coefficients") {
    CHECK(luminance(Vec3(1.0f, 1.0f, 1.0f)) == doctest::Approx(1.0));
    CHECK(luminance(Vec3(1.0f, 0.0f, 0.0f)) == doctest::Approx(0.2126));
    CHECK(luminance(Vec3(0.0f)) == 0.0f);
}

TEST_CASE("radiance levels: log-spaced ladder") {
    Image env(2, 1);
    env.at(0, 0) = Vec3(std::exp(-5.0f));
    env.at(1, 0) = Vec3(std::exp(5.0f));
    const RadianceLevels lv = compute_levels(env, 4, 1e-3f);
    REQUIRE(lv.k_count() == 4);
    CHECK(lv.levels[0] == 0.0f);
    CHECK(lv.levels[1] == doctest::Approx(std::exp(-5.0 / 3.0)).epsilon(1e-4));
    CHECK(lv.levels[2] == doctest::Approx(std::exp(5.0 / 3.0)).epsilon(1e-4));
    CHECK(lv.levels[3] == doctest::Approx(std::exp(5.0)).epsilon(1e-4));

    const RadianceLevels two = compute_levels(env, 2, 1e-3f);
    CHECK(two.levels[0] == 0.0f);
    CHECK(two.levels[1] == doctest::Approx(std::exp(5.0)).epsilon(1e-4));
}

TEST_CASE("radiance levels: degenerate environments") {
    const RadianceLevels flat = compute_levels(Image(4, 2, Vec3(1.0f)), 4, 1e-3f);
    CHECK(flat.levels[0] == 0.0f);
    CHECK(flat.levels[1] == 1.0f);
    CHECK(flat.levels[2] == 1.0f);
    CHECK(flat.levels[3] == 1.0f);

    const RadianceLevels black = compute_levels(Image(4, 2, Vec3(0.0f)), 4, 1e-3f);
    for (int i = 1; i < 4; ++i) CHECK(black.levels[i] == 1e-3f);
    const std::vector<float> w = fuzzy_weights(0.0f, black);
    CHECK(w[0] == 1.0f);
}

TEST_CASE("fuzzy weights") {
    RadianceLevels lv;
    lv.levels = {0.0f, 2.0f};
    const std::vector<float> w = fuzzy_weights(0.5f, lv);
    CHECK(w[0] == doctest::Approx(0.75));
    CHECK(w[1] == doctest::Approx(0.25));

    RadianceLevels lv4;
    lv4.levels = {0.0f, 0.5f, 2.0f, 8.0f};
    // Exact level endpoint: one-hot.
    CHECK(fuzzy_weights(0.5f, lv4)[1] == 1.0f);
    CHECK(fuzzy_weights(8.0f, lv4)[3] == 1.0f);
    // Above the top level: one-hot at K.
    CHECK(fuzzy_weights(100.0f, lv4)[3] == 1.0f);

    const RandomStream s(21);
    for (int i = 0; i < 10000; ++i) {
        const float lum = 10.0f * s.uniform(i);
        const std::vector<float> fw = fuzzy_weights(lum, lv4);
        float sum = 0.0f;
        int nonzero = 0;
        float recon = 0.0f;
        for (int k = 0; k < 4; ++k) {
            CHECK(fw[k] >= 0.0f);
            sum += fw[k];
            nonzero += fw[k] > 0.0f;
            recon += fw[k] * lv4.levels[k];
        }
        CHECK(sum == 1.0f);
        CHECK(nonzero <= 2);
        // Linear space reconstructs the clamped luminance exactly.
        CHECK(recon == doctest::Approx(std::fmin(lum, 8.0f)).epsilon(1e-5));
    }
}

TEST_CASE("prefilter: constant environment") {
    const Image env(32, 16, Vec3(0.7f));
    const RadianceLevels lv = compute_levels(env, 4, 1e-3f);
    const PrefilteredEnv penv = prefilter(env, lv, fast_options());
    check_partition_of_unity(penv);
    for (size_t m = 0; m < penv.mips.size(); ++m) {
        const auto& mip = penv.mips[m];
        for (int y = 0; y < mip.height; ++y) {
            for (int x = 0; x < mip.width; ++x) {
                const float* t = penv.texel(static_cast<int>(m), x, y);
                CHECK(t[0] == doctest::Approx(0.7).epsilon(1e-3));
                // Constant luminance sits exactly on the collapsed top level.
                CHECK(t[3 + 3] == doctest::Approx(1.0).epsilon(1e-3));
            }
        }
    }

    Vec3 radiance;
    std::vector<float> weights;
    sample_prefiltered(penv, glint::normalize(Vec3(0.3f, -0.5f, 0.8f)), 0.37f, radiance, weights);
    CHECK(radiance.x == doctest::Approx(0.7).epsilon(1e-3));
    float sum = 0.0f;
    for (float w : weights) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("prefilter: mip zero is a near-identity") {
    // Smooth vertical gradient so bilinear error stays tiny.
    Image env(64, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 64; ++x)
            env.at(x, y) = Vec3(0.2f + 0.05f * y, 0.1f + 0.02f * y, 1.0f);
    const RadianceLevels lv = compute_levels(env, 4, 1e-3f);
    const PrefilteredEnv penv = prefilter(env, lv, fast_options(4, 256));
    check_partition_of_unity(penv);

    Vec3 radiance;
    std::vector<float> weights;
    for (int y = 2; y < 30; ++y) {
        for (int x = 0; x < 64; x += 7) {
            const Vec3 dir = equirect_direction((x + 0.5f) / 64.0f, (y + 0.5f) / 32.0f);
            sample_prefiltered(penv, dir, 0.0f, radiance, weights);
            const Vec3 src = env.sample_bilinear((x + 0.5f) / 64.0f, (y + 0.5f) / 32.0f);
            CHECK(radiance.x == doctest::Approx(src.x).epsilon(0.01));
            CHECK(radiance.y == doctest::Approx(src.y).epsilon(0.01));
        }
    }
}

TEST_CASE("prefilter: single bright texel smooths out with mip index") {
    Image env(32, 16, Vec3(0.01f));
    env.at(8, 8) = Vec3(500.0f);
    const RadianceLevels lv = compute_levels(env, 4, 1e-3f);
    const PrefilteredEnv penv = prefilter(env, lv, fast_options(5, 1024));
    check_partition_of_unity(penv);

    const Vec3 dir = equirect_direction(8.5f / 32.0f, 8.5f / 16.0f);
    Vec3 radiance;
    std::vector<float> weights;
    float prev = std::numeric_limits<float>::infinity();
    for (size_t m = 1; m < penv.mips.size(); ++m) {
        // Coarsest mips drop below the kernel width; skip the resolution
        // artifacts and compare only where the grid still resolves the peak.
        if (penv.mips[m].height < 4) break;
        sample_prefiltered(penv, dir, penv.mips[m].alpha, radiance, weights);
        CHECK(luminance(radiance) < prev);
        prev = luminance(radiance);
    }
}

TEST_CASE("sample at an exact mip roughness hits that mip's texels") {
    Image env(32, 16);
    const RandomStream s(27);
    for (size_t i = 0; i < env.texels.size(); ++i)
        env.texels[i] = Vec3(0.1f + s.uniform(i, 0), 0.1f + s.uniform(i, 1), 0.2f);
    const RadianceLevels lv = compute_levels(env, 4, 1e-3f);
    const PrefilteredEnv penv = prefilter(env, lv, fast_options(4, 128));

    const int m = 2;
    const auto& mip = penv.mips[m];
    Vec3 radiance;
    std::vector<float> weights;
    for (int y = 1; y + 1 < mip.height; y += 2) {
        for (int x = 0; x < mip.width; x += 3) {
            const Vec3 dir =
                equirect_direction((x + 0.5f) / mip.width, (y + 0.5f) / mip.height);
            sample_prefiltered(penv, dir, mip.alpha, radiance, weights);
            const float* t = penv.texel(m, x, y);
            CHECK(radiance.x == doctest::Approx(t[0]).epsilon(1e-4));
            CHECK(radiance.y == doctest::Approx(t[1]).epsilon(1e-4));
        }
    }
}

TEST_CASE("prefilter linearity under radiance scaling") {
    Image env(16, 8);
    const RandomStream s(33);
    for (size_t i = 0; i < env.texels.size(); ++i)
        env.texels[i] = Vec3(0.05f + 3.0f * s.uniform(i, 0));
    Image scaled = env;
    for (Vec3& t : scaled.texels) t *= 2.0f;

    const RadianceLevels lv = compute_levels(env, 4, 1e-3f);
    const RadianceLevels lv2 = compute_levels(scaled, 4, 2e-3f);
    const PrefilteredEnv a = prefilter(env, lv, fast_options(3, 64));
    const PrefilteredEnv b = prefilter(scaled, lv2, fast_options(3, 64));
    for (size_t m = 0; m < a.mips.size(); ++m) {
        for (size_t i = 0; i < a.mips[m].data.size(); ++i) {
            const size_t stride = 3 + 4;
            if (i % stride < 3)
                CHECK(b.mips[m].data[i] == doctest::Approx(2.0f * a.mips[m].data[i]).epsilon(1e-4));
            else
                CHECK(b.mips[m].data[i] == doctest::Approx(a.mips[m].data[i]).epsilon(1e-4));
        }
    }
}

TEST_CASE("prefiltered cache round trip") {
    Image env(16, 8);
    const RandomStream s(39);
    for (size_t i = 0; i < env.texels.size(); ++i)
        env.texels[i] = Vec3(s.uniform(i, 0), s.uniform(i, 1), s.uniform(i, 2));
    const RadianceLevels lv = compute_levels(env, 3, 1e-3f);
    const PrefilteredEnv penv = prefilter(env, lv, fast_options(3, 64));

    const std::string path = "penv_test.gibp";
    REQUIRE(glint::save_prefiltered(penv, path));
    PrefilteredEnv back;
    REQUIRE(glint::load_prefiltered(path, back));
    REQUIRE(back.mips.size() == penv.mips.size());
    CHECK(back.k_count == penv.k_count);
    for (size_t m = 0; m < penv.mips.size(); ++m) {
        CHECK(back.mips[m].alpha == penv.mips[m].alpha);
        REQUIRE(back.mips[m].data.size() == penv.mips[m].data.size());
        for (size_t i = 0; i < penv.mips[m].data.size(); ++i)
            CHECK(back.mips[m].data[i] == penv.mips[m].data[i]);
    }
    PrefilteredEnv missing;
    CHECK(!glint::load_prefiltered("no_such_file.gibp", missing));
    std::remove(path.c_str());
}
