#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "cdac/types.hpp"

namespace cdac {

enum class Mode { Train, Eval };

// Clustering layer g(e) = W2^T Dropout(tanh(W1 e)), applied row-wise:
//   I = Dropout(tanh(E W1^T)) W2
// with W1: H x H, W2: H x k and no bias terms.
struct ClusterNetParams {
    Matrix w1;
    Matrix w2;
    double dropout_rate = 0.1;
    Mode mode = Mode::Eval;
    // Bumped by every optimizer step; forward caches remember it.
    std::uint64_t generation = 0;

    Index input_dim() const { return static_cast<Index>(w1.rows()); }
    Index clusters() const { return static_cast<Index>(w2.cols()); }
};

// Glorot-uniform weights, bound sqrt(6 / (fan_in + fan_out)).
ClusterNetParams init_params(Index input_dim, Index clusters, std::uint64_t seed,
                             double dropout_rate = 0.1);

struct ForwardCache {
    Matrix input;       // n x H
    Matrix activation;  // tanh(E W1^T), n x H
    Matrix mask;        // inverted-dropout scale per activation; empty in eval mode
    std::uint64_t generation = 0;
};

struct ForwardResult {
    Matrix intent;  // n x k
    ForwardCache cache;
};

ForwardResult forward(const ClusterNetParams& params, const Matrix& embeddings,
                      std::uint64_t dropout_seed);

// Eval-mode forward without a cache.
Matrix represent(const ClusterNetParams& params, const Matrix& embeddings);

struct Gradients {
    Matrix w1;
    Matrix w2;
    Matrix input;  // dL/dE, diagnostics only
};

Gradients backward(const ClusterNetParams& params, const ForwardCache& cache, const Matrix& d_intent);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Moment accumulators for one parameter matrix.
struct AdamSlot {
    Matrix m;
    Matrix v;
    std::uint64_t steps = 0;
};

void adam_update(Matrix& param, AdamSlot& slot, const Matrix& grad, const AdamConfig& cfg);

struct OptimizerState {
    AdamConfig config;
    AdamSlot w1;
    AdamSlot w2;
};

OptimizerState make_optimizer(const ClusterNetParams& params, double learning_rate);

// Throws NumericalError naming `phase` on non-finite gradients or parameters.
void step(ClusterNetParams& params, OptimizerState& opt, const Gradients& grads,
          const std::string& phase);

// "CDAC", u32 H, u32 k, u32 centroid rows (0 or k), then W1, W2, lambda and
// centroids as little-endian f64, row-major.
struct Checkpoint {
    Matrix w1;
    Matrix w2;
    double lambda = 0.0;
    std::optional<Matrix> centroids;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cdac
