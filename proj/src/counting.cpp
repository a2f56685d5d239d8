#include "glint/counting.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace glint {

uint64_t hash_mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t hash_combine(uint64_t a, uint64_t b) {
    return hash_mix(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

float RandomStream::uniform(uint64_t i0, uint64_t i1, uint64_t i2) const {
    uint64_t h = hash_mix(seed_);
    h = hash_combine(h, i0);
    h = hash_combine(h, i1);
    h = hash_combine(h, i2);
    // Top 24 bits: the largest value that maps to a float strictly below 1.
    return static_cast<float>(h >> 40) * 0x1p-24f;
}

float naive_pow_one_minus(float p, float n) {
    if (n <= 0.0f) return 1.0f;
    return std::pow(1.0f - p, n);
}

float stable_pow_one_minus(float p, float n) {
    if (n <= 0.0f) return 1.0f;
    if (p <= 0.0f) return 1.0f;
    if (p >= 1.0f) return 0.0f;
    const float eps = static_cast<float>(kStablePowEpsilon);
    const float c = std::fmax(1.0f, eps / p);
    return std::pow(1.0f - c * p, n / c);
}

double inverse_normal_cdf(double xi, double mu, double sigma2) {
    if (sigma2 <= 0.0) return mu;

    // Acklam's rational approximation of the standard normal quantile.
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    const double p = std::clamp(xi, 1e-12, 1.0 - 1e-12);
    double z;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        z = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        z = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        z = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    return mu + std::sqrt(sigma2) * z;
}

int64_t sample_binomial_exact(int64_t n, double p, const RandomStream& stream,
                              uint64_t draw_index) {
    if (n <= 0) return 0;
    if (p <= 0.0) return 0;
    if (p >= 1.0) return n;
    if (n <= 64) {
        int64_t count = 0;
        for (int64_t i = 0; i < n; ++i)
            count += stream.uniform(draw_index, static_cast<uint64_t>(i)) < p ? 1 : 0;
        return count;
    }
    std::mt19937_64 rng(hash_combine(hash_mix(stream.seed()), draw_index));
    std::binomial_distribution<int64_t> dist(n, p);
    return dist(rng);
}

float single_gated(float n, float p, float xi1, float xi2) {
    if (n <= 0.0f || p <= 0.0f) return 0.0f;
    const float gate = std::fmin(n * p, 1.0f - stable_pow_one_minus(p, n));
    if (!(xi1 < gate)) return 0.0f;
    const float n_ge1 = std::fmax(n, 1.0f);
    const float mu = 1.0f + (n - 1.0f) * p;
    const float sigma2 = std::fmax(0.0f, (n - 1.0f) * p * (1.0f - p));
    const float g = static_cast<float>(inverse_normal_cdf(xi2, mu, sigma2));
    return std::clamp(g, 1.0f, n_ge1);
}

GatingOutcome dual_gated(float n, float p, float xi1, float xi2) {
    GatingOutcome out;
    if (n <= 0.0f) return out;
    p = std::clamp(p, 0.0f, 1.0f);

    const float n2 = std::fmax(2.0f, n);
    const float cl = std::clamp(n - 1.0f, 0.0f, 1.0f);
    const float tri = std::fmax(0.0f, 1.0f - std::fabs(1.0f - n));

    const float p_pos_n = cl * std::pow(p, n2);
    const float p_neg_n = cl * stable_pow_one_minus(p, n2);
    const float p_pos_1 = tri * p;
    const float p_neg_1 = tri * (1.0f - p);

    const float m_pos_n = xi1 < p_pos_n ? 1.0f : 0.0f;
    const float m_pos_1n = xi1 < p_pos_n + p_pos_1 ? 1.0f : 0.0f;
    const float m_neg_n = 1.0f - p_neg_n <= xi1 ? 1.0f : 0.0f;
    const float m_neg_1n = 1.0f - p_neg_n - p_neg_1 <= xi1 ? 1.0f : 0.0f;
    const float m_gauss = (n > 1.0f ? 1.0f : 0.0f) * (1.0f - m_pos_1n) * (1.0f - m_neg_1n);

    const float mu = 1.0f + (n2 - 2.0f) * p;
    const float sigma2 = (n2 - 2.0f) * p * (1.0f - p);
    const float g =
        std::clamp(static_cast<float>(inverse_normal_cdf(xi2, mu, sigma2)), 1.0f, n2 - 1.0f);
    const float g_bar = n2 - g;

    out.n_pos = m_pos_n * (n2 - 1.0f) + m_pos_1n + m_gauss * g;
    out.n_neg = m_neg_n * (n2 - 1.0f) + m_neg_1n + m_gauss * g_bar;
    return out;
}

namespace {

bool is_integral_count(float n) {
    return std::fabs(n - std::round(n)) < 1e-5f * std::fmax(1.0f, std::fabs(n));
}

struct TreeSampler {
    std::span<const float> probs;
    const RandomStream& stream;
    uint64_t node_id_base;
    std::vector<float>& out;

    void split(size_t lo, size_t hi, float count, uint64_t node_id) const {
        if (count <= 0.0f) return;
        if (hi - lo == 1) {
            out[lo] += count;
            return;
        }
        const size_t mid = lo + (hi - lo) / 2;
        double a = 0.0, b = 0.0;
        for (size_t i = lo; i < mid; ++i) a += probs[i];
        for (size_t i = mid; i < hi; ++i) b += probs[i];
        if (a + b <= 0.0) return;
        // Zero-mass subtrees get 0 without consuming randomness.
        if (a <= 0.0) {
            split(mid, hi, count, 2 * node_id + 2);
            return;
        }
        if (b <= 0.0) {
            split(lo, mid, count, 2 * node_id + 1);
            return;
        }
        const float p = static_cast<float>(a / (a + b));
        const float xi1 = stream.uniform(node_id_base + node_id, 0);
        const float xi2 = stream.uniform(node_id_base + node_id, 1);
        GatingOutcome o = dual_gated(count, p, xi1, xi2);
        if (is_integral_count(count)) {
            // Conserve mass: stochastically round the Gaussian branch so that
            // integer trial counts stay integer down the whole tree.
            const float n_floor = std::floor(o.n_pos);
            const float frac = o.n_pos - n_floor;
            if (frac > 0.0f) {
                const float xi3 = stream.uniform(node_id_base + node_id, 2);
                o.n_pos = n_floor + (xi3 < frac ? 1.0f : 0.0f);
                o.n_neg = std::round(count) - o.n_pos;
            }
        }
        split(lo, mid, o.n_pos, 2 * node_id + 1);
        split(mid, hi, o.n_neg, 2 * node_id + 2);
    }
};

}  // namespace

std::vector<float> sample_multinomial(float n, std::span<const float> probs,
                                      const RandomStream& stream, uint64_t node_id_base) {
    std::vector<float> out(probs.size(), 0.0f);
    if (probs.empty() || n <= 0.0f) return out;

    // The trailing dummy bin absorbs any slack so the vector sums to 1.
    std::vector<float> q(probs.begin(), probs.end());
    double sum = 0.0;
    for (float v : q) sum += v;
    q.back() = std::fmax(0.0f, q.back() + static_cast<float>(1.0 - sum));
    sum = 0.0;
    for (float v : q) sum += v;
    if (sum <= 0.0) return out;
    for (float& v : q) v = static_cast<float>(v / sum);

    TreeSampler sampler{q, stream, node_id_base, out};
    sampler.split(0, q.size(), n, 0);
    return out;
}

}  // namespace glint
