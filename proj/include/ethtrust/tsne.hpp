#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ethtrust/dataset.hpp"

namespace ethtrust::tsne {

struct TsneConfig {
    int output_dims = 2;  // 2 or 3
    double perplexity = 30.0;
    double learning_rate = 200.0;
    int iterations = 1000;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 250;  // also the momentum switch point
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    // Features span ~10 orders of magnitude, so distances are computed on
    // z-scored columns unless disabled.
    bool standardize = true;
    std::uint64_t seed = 0;

    void validate() const;  // throws InvalidConfig
};

struct Affinities {
    std::size_t n = 0;
    // Row-stochastic conditional p_{j|i}; diagonal 0.
    std::vector<double> conditional;
    // Symmetrized joint (p_{j|i} + p_{i|j}) / (2n); sums to 1.
    std::vector<double> joint;
};

struct TsneEmbedding {
    int dims = 2;
    std::vector<double> coordinates;  // row-major, n x dims, input row order
    std::vector<std::optional<Flag>> flags;
    double final_kl = 0.0;
    std::vector<double> kl_trace;  // KL against the plain (unexaggerated) P
};

// Row-major feature matrix; optionally z-scored per column (constant columns
// become all zero).
std::vector<double> feature_matrix(const Dataset& dataset, bool standardize);

// Per-row Gaussian bandwidths by bisection until the conditional perplexity
// is within 1e-5 of the target (at most 50 steps). Throws TooFewRows (n < 4)
// and PerplexityTooLarge (perplexity >= (n-1)/3).
Affinities compute_affinities(const std::vector<double>& points, std::size_t n, std::size_t dims,
                              double perplexity);
Affinities compute_affinities(const Dataset& dataset, double perplexity);

// KL(P||Q) with the Student-t kernel Q of the embedding y (n x dims), and its
// gradient. Exposed so tests can check the gradient against finite
// differences.
double kl_divergence(const std::vector<double>& joint_p, const std::vector<double>& y,
                     std::size_t n, int dims);
std::vector<double> kl_gradient(const std::vector<double>& joint_p, const std::vector<double>& y,
                                std::size_t n, int dims);

TsneEmbedding embed(const Dataset& dataset, const TsneConfig& config);

}  // namespace ethtrust::tsne
