#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace glint {

// Real-valued outcome of a dual-gated binomial draw. Positive and negative
// counts are tracked separately because the dithered small-N cases may not
// sum to N.
struct GatingOutcome {
    float n_pos = 0.0f;
    float n_neg = 0.0f;
};

// Stateless counter-based uniform generator. The same (seed, indices) always
// yields the same value, independent of call order or thread scheduling.
class RandomStream {
public:
    explicit RandomStream(uint64_t seed) : seed_(seed) {}

    // Uniform in [0,1) from up to three stream coordinates.
    float uniform(uint64_t i0, uint64_t i1 = 0, uint64_t i2 = 0) const;

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
};

// Avalanche-quality 64-bit finalizer (splitmix64).
uint64_t hash_mix(uint64_t x);
uint64_t hash_combine(uint64_t a, uint64_t b);

// (1-p)^N evaluated entirely in 32-bit arithmetic, stabilized against the
// catastrophic rounding of (1-p) for small p by rescaling the base:
// (1-p)^N ~= (1 - c*p)^(N/c) with c = max(1, eps/p), eps = 10^-3.54.
float stable_pow_one_minus(float p, float n);

// Naive 32-bit evaluation, kept for the error-map comparison.
float naive_pow_one_minus(float p, float n);

inline constexpr double kStablePowEpsilon = 2.8840315031266057e-4;  // 10^-3.54

// mu + sqrt(sigma2) * Phi^-1(xi) via the Acklam rational approximation
// (max abs error of the standard normal quantile < 1.2e-9).
double inverse_normal_cdf(double xi, double mu, double sigma2);

// Exact binomial sampler, used as oracle. Bernoulli loop for small N,
// inversion by cumulative search for large N.
int64_t sample_binomial_exact(int64_t n, double p, const RandomStream& stream,
                              uint64_t draw_index);

// Single-gated Gaussian generalized to real-valued N >= 0. Returns a
// real-valued count; 0 when the gate fails.
float single_gated(float n, float p, float xi1, float xi2);

// Dual-gated Gaussian: gates on both "at least one positive" and "at least
// one negative" sample, exact for N <= 2, branch-free mask arithmetic.
GatingOutcome dual_gated(float n, float p, float xi1, float xi2);

// Hierarchical multinomial over K bins plus a trailing dummy bin that absorbs
// probability slack. Balanced binary tree of dual-gated binomial splits; the
// stream index of each internal node is node_id_base + node offset.
// For integer trial counts the bins sum to N exactly on every draw.
std::vector<float> sample_multinomial(float n, std::span<const float> probs,
                                      const RandomStream& stream,
                                      uint64_t node_id_base);

}  // namespace glint
