#include "ethtrust/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ethtrust/errors.hpp"
#include "ethtrust/rng.hpp"

namespace ethtrust::tsne {

void TsneConfig::validate() const {
    if (output_dims != 2 && output_dims != 3)
        throw InvalidConfig("output_dims must be 2 or 3, got " + std::to_string(output_dims));
    if (perplexity <= 0) throw InvalidConfig("perplexity must be positive");
    if (learning_rate <= 0) throw InvalidConfig("learning_rate must be positive");
    if (iterations <= 0) throw InvalidConfig("iterations must be positive");
    if (early_exaggeration < 1) throw InvalidConfig("early_exaggeration must be at least 1");
    if (exaggeration_iters < 0) throw InvalidConfig("exaggeration_iters must be non-negative");
}

std::vector<double> feature_matrix(const Dataset& dataset, bool standardize) {
    const std::size_t n = dataset.n_rows();
    const std::size_t d = dataset.n_features();
    std::vector<double> matrix(n * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) matrix[i * d + j] = dataset.row(i).values[j];
    if (!standardize || n == 0) return matrix;

    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += matrix[i * d + j];
        const double mu = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = matrix[i * d + j] - mu;
            ss += c * c;
        }
        const double sigma = std::sqrt(ss / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            matrix[i * d + j] = sigma > 0 ? (matrix[i * d + j] - mu) / sigma : 0.0;
    }
    return matrix;
}

namespace {

std::vector<double> squared_distances(const std::vector<double>& points, std::size_t n,
                                      std::size_t dims) {
    std::vector<double> d2(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < dims; ++k) {
                const double diff = points[i * dims + k] - points[j * dims + k];
                acc += diff * diff;
            }
            d2[i * n + j] = acc;
            d2[j * n + i] = acc;
        }
    return d2;
}

}  // namespace

Affinities compute_affinities(const std::vector<double>& points, std::size_t n, std::size_t dims,
                              double perplexity) {
    if (n < 4) throw TooFewRows("t-SNE needs at least 4 rows, got " + std::to_string(n));
    if (points.size() != n * dims)
        throw DimensionMismatch("points size " + std::to_string(points.size()) + " != " +
                                std::to_string(n) + " x " + std::to_string(dims));
    if (perplexity <= 0) throw InvalidConfig("perplexity must be positive");
    if (perplexity >= (static_cast<double>(n) - 1.0) / 3.0)
        throw PerplexityTooLarge("perplexity " + std::to_string(perplexity) +
                                 " needs more than " + std::to_string(3 * perplexity + 1) +
                                 " rows, got " + std::to_string(n));

    const std::vector<double> d2 = squared_distances(points, n, dims);
    const double target_entropy = std::log(perplexity);  // nats

    Affinities aff;
    aff.n = n;
    aff.conditional.assign(n * n, 0.0);

    std::vector<double> row_p(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Shift distances so exp() stays in range; the distribution is
        // shift-invariant after normalization.
        double d2_min = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) d2_min = std::min(d2_min, d2[i * n + j]);

        double beta = 1.0;
        double beta_lo = 0.0;
        double beta_hi = std::numeric_limits<double>::infinity();
        for (int step = 0; step < 50; ++step) {
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                row_p[j] = j == i ? 0.0 : std::exp(-beta * (d2[i * n + j] - d2_min));
                sum += row_p[j];
            }
            double entropy = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (row_p[j] <= 0.0) continue;
                const double p = row_p[j] / sum;
                entropy -= p * std::log(p);
            }
            if (std::fabs(std::exp(entropy) - perplexity) <= 1e-5) break;
            if (entropy > target_entropy) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : (beta + beta_hi) / 2.0;
            } else {
                beta_hi = beta;
                beta = (beta + beta_lo) / 2.0;
            }
        }

        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row_p[j] = j == i ? 0.0 : std::exp(-beta * (d2[i * n + j] - d2_min));
            sum += row_p[j];
        }
        for (std::size_t j = 0; j < n; ++j) aff.conditional[i * n + j] = row_p[j] / sum;
    }

    aff.joint.assign(n * n, 0.0);
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            aff.joint[i * n + j] =
                (aff.conditional[i * n + j] + aff.conditional[j * n + i]) * scale;
    return aff;
}

Affinities compute_affinities(const Dataset& dataset, double perplexity) {
    return compute_affinities(feature_matrix(dataset, false), dataset.n_rows(),
                              dataset.n_features(), perplexity);
}

double kl_divergence(const std::vector<double>& joint_p, const std::vector<double>& y,
                     std::size_t n, int dims) {
    const auto d = static_cast<std::size_t>(dims);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = y[i * d + k] - y[j * d + k];
                acc += diff * diff;
            }
            z += 2.0 / (1.0 + acc);
        }

    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double p = joint_p[i * n + j];
            if (p <= 0.0) continue;
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = y[i * d + k] - y[j * d + k];
                acc += diff * diff;
            }
            const double q = (1.0 / (1.0 + acc)) / z;
            kl += 2.0 * p * std::log(p / q);
        }
    return kl;
}

std::vector<double> kl_gradient(const std::vector<double>& joint_p, const std::vector<double>& y,
                                std::size_t n, int dims) {
    const auto d = static_cast<std::size_t>(dims);
    std::vector<double> num(n * n, 0.0);  // Student-t kernel (1 + d2)^-1
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = y[i * d + k] - y[j * d + k];
                acc += diff * diff;
            }
            const double kernel = 1.0 / (1.0 + acc);
            num[i * n + j] = kernel;
            num[j * n + i] = kernel;
            z += 2.0 * kernel;
        }

    std::vector<double> grad(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double kernel = num[i * n + j];
            const double coeff = 4.0 * (joint_p[i * n + j] - kernel / z) * kernel;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = y[i * d + k] - y[j * d + k];
                grad[i * d + k] += coeff * diff;
                grad[j * d + k] -= coeff * diff;
            }
        }
    return grad;
}

TsneEmbedding embed(const Dataset& dataset, const TsneConfig& config) {
    config.validate();
    const std::size_t n = dataset.n_rows();
    const auto d = static_cast<std::size_t>(config.output_dims);

    const std::vector<double> x = feature_matrix(dataset, config.standardize);
    const Affinities aff = compute_affinities(x, n, dataset.n_features(), config.perplexity);

    std::vector<double> p_plain = aff.joint;
    std::vector<double> p_active = p_plain;
    const bool exaggerating = config.exaggeration_iters > 0 && config.early_exaggeration > 1.0;
    if (exaggerating)
        for (double& v : p_active) v *= config.early_exaggeration;

    TsneEmbedding result;
    result.dims = config.output_dims;
    result.flags.reserve(n);
    for (std::size_t i = 0; i < n; ++i) result.flags.push_back(dataset.row(i).flag);

    Rng rng = Rng::stream(config.seed, 0);
    std::vector<double> y(n * d);
    for (double& v : y) v = rng.next_normal() * 1e-4;

    std::vector<double> velocity(n * d, 0.0);
    std::vector<double> gains(n * d, 1.0);
    result.kl_trace.reserve(static_cast<std::size_t>(config.iterations));

    for (int iter = 0; iter < config.iterations; ++iter) {
        if (exaggerating && iter == config.exaggeration_iters) p_active = p_plain;
        const double momentum =
            iter < config.exaggeration_iters ? config.momentum_initial : config.momentum_final;

        result.kl_trace.push_back(kl_divergence(p_plain, y, n, config.output_dims));
        const std::vector<double> grad = kl_gradient(p_active, y, n, config.output_dims);

        for (std::size_t idx = 0; idx < n * d; ++idx) {
            const bool same_direction = (grad[idx] > 0.0) == (velocity[idx] > 0.0);
            gains[idx] = same_direction ? std::max(gains[idx] * 0.8, 0.01) : gains[idx] + 0.2;
            velocity[idx] = momentum * velocity[idx] - config.learning_rate * gains[idx] * grad[idx];
            y[idx] += velocity[idx];
        }
        // Keep the embedding centered; KL is translation invariant.
        for (std::size_t k = 0; k < d; ++k) {
            double mu = 0.0;
            for (std::size_t i = 0; i < n; ++i) mu += y[i * d + k];
            mu /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) y[i * d + k] -= mu;
        }
    }

    result.final_kl = kl_divergence(p_plain, y, n, config.output_dims);
    result.coordinates = std::move(y);
    return result;
}

}  // namespace ethtrust::tsne
