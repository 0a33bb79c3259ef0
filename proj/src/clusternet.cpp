#include "cdac/clusternet.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "binary_io.hpp"

namespace cdac {

namespace {

Matrix glorot(Index rows, Index cols, Index fan_in, Index fan_out, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

}  // namespace

ClusterNetParams init_params(Index input_dim, Index clusters, std::uint64_t seed, double dropout_rate) {
    if (input_dim < 1) throw InputError("init_params: input dimension must be >= 1");
    if (clusters < 2) throw InputError("init_params: cluster count must be >= 2");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw InputError("init_params: dropout rate must be in [0, 1)");
    }
    std::mt19937_64 rng(seed);
    ClusterNetParams p;
    p.w1 = glorot(input_dim, input_dim, input_dim, input_dim, rng);
    p.w2 = glorot(input_dim, clusters, input_dim, clusters, rng);
    p.dropout_rate = dropout_rate;
    return p;
}

ForwardResult forward(const ClusterNetParams& params, const Matrix& embeddings,
                      std::uint64_t dropout_seed) {
    if (static_cast<Index>(embeddings.cols()) != params.input_dim()) {
        throw InputError("forward: embedding width " + std::to_string(embeddings.cols()) +
                         " does not match layer input " + std::to_string(params.input_dim()));
    }
    ForwardResult out;
    auto& cache = out.cache;
    cache.input = embeddings;
    cache.generation = params.generation;
    cache.activation = (embeddings * params.w1.transpose()).array().tanh().matrix();

    if (params.mode == Mode::Train && params.dropout_rate > 0.0) {
        std::mt19937_64 rng(dropout_seed);
        std::bernoulli_distribution keep(1.0 - params.dropout_rate);
        const double scale = 1.0 / (1.0 - params.dropout_rate);
        cache.mask.resize(cache.activation.rows(), cache.activation.cols());
        for (Eigen::Index i = 0; i < cache.mask.size(); ++i) {
            cache.mask.data()[i] = keep(rng) ? scale : 0.0;
        }
        out.intent = cache.activation.cwiseProduct(cache.mask) * params.w2;
    } else {
        out.intent = cache.activation * params.w2;
    }
    return out;
}

Matrix represent(const ClusterNetParams& params, const Matrix& embeddings) {
    auto eval = params;
    eval.mode = Mode::Eval;
    return forward(eval, embeddings, 0).intent;
}

Gradients backward(const ClusterNetParams& params, const ForwardCache& cache, const Matrix& d_intent) {
    if (cache.generation != params.generation) {
        throw InputError("backward: cache is stale (parameters changed since forward)");
    }
    if (d_intent.rows() != cache.activation.rows() ||
        static_cast<Index>(d_intent.cols()) != params.clusters() ||
        cache.activation.cols() != params.w2.rows()) {
        throw InputError("backward: gradient shape does not match cached forward pass");
    }
    const bool masked = cache.mask.size() > 0;
    const Matrix dropped = masked ? Matrix(cache.activation.cwiseProduct(cache.mask)) : cache.activation;

    Gradients g;
    g.w2 = dropped.transpose() * d_intent;
    Matrix d_act = d_intent * params.w2.transpose();
    if (masked) d_act = d_act.cwiseProduct(cache.mask);
    const Matrix d_pre =
        d_act.cwiseProduct((1.0 - cache.activation.array().square()).matrix());
    g.w1 = d_pre.transpose() * cache.input;
    g.input = d_pre * params.w1;
    return g;
}

void adam_update(Matrix& param, AdamSlot& slot, const Matrix& grad, const AdamConfig& cfg) {
    if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
        throw InputError("adam_update: gradient shape does not match parameter");
    }
    if (slot.m.size() == 0) {
        slot.m = Matrix::Zero(param.rows(), param.cols());
        slot.v = Matrix::Zero(param.rows(), param.cols());
    }
    ++slot.steps;
    slot.m = cfg.beta1 * slot.m + (1.0 - cfg.beta1) * grad;
    slot.v = cfg.beta2 * slot.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
    const double t = static_cast<double>(slot.steps);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    param.array() -= cfg.learning_rate * (slot.m.array() / c1) /
                     ((slot.v.array() / c2).sqrt() + cfg.epsilon);
}

OptimizerState make_optimizer(const ClusterNetParams& params, double learning_rate) {
    if (!(learning_rate >= 0.0)) throw InputError("learning rate must be >= 0");
    OptimizerState opt;
    opt.config.learning_rate = learning_rate;
    opt.w1.m = Matrix::Zero(params.w1.rows(), params.w1.cols());
    opt.w1.v = opt.w1.m;
    opt.w2.m = Matrix::Zero(params.w2.rows(), params.w2.cols());
    opt.w2.v = opt.w2.m;
    return opt;
}

void step(ClusterNetParams& params, OptimizerState& opt, const Gradients& grads,
          const std::string& phase) {
    if (!grads.w1.allFinite() || !grads.w2.allFinite()) {
        throw NumericalError(phase, "non-finite gradient in clustering layer");
    }
    adam_update(params.w1, opt.w1, grads.w1, opt.config);
    adam_update(params.w2, opt.w2, grads.w2, opt.config);
    ++params.generation;
    if (!params.w1.allFinite() || !params.w2.allFinite()) {
        throw NumericalError(phase, "non-finite clustering-layer parameters after update");
    }
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kCkptMagic[] = "CDAC";

void put_matrix(std::ostream& out, const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) io::put_f64(out, m(r, c));
    }
}

Matrix get_matrix(std::istream& in, Index rows, Index cols) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (!io::get_f64(in, m.data()[i])) throw InputError("checkpoint: truncated matrix");
    }
    return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto h = static_cast<Index>(ckpt.w1.rows());
    const auto k = static_cast<Index>(ckpt.w2.cols());
    if (ckpt.w1.cols() != ckpt.w1.rows() || static_cast<Index>(ckpt.w2.rows()) != h) {
        throw InputError("checkpoint: inconsistent layer shapes");
    }
    if (ckpt.centroids && (static_cast<Index>(ckpt.centroids->rows()) != k ||
                           static_cast<Index>(ckpt.centroids->cols()) != k)) {
        throw InputError("checkpoint: centroids must be k x k");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(kCkptMagic, 4);
    io::put_u32(out, static_cast<std::uint32_t>(h));
    io::put_u32(out, static_cast<std::uint32_t>(k));
    io::put_u32(out, ckpt.centroids ? static_cast<std::uint32_t>(k) : 0u);
    put_matrix(out, ckpt.w1);
    put_matrix(out, ckpt.w2);
    io::put_f64(out, ckpt.lambda);
    if (ckpt.centroids) put_matrix(out, *ckpt.centroids);
    if (!out) throw InputError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::string magic;
    if (!io::get_magic(in, magic) || magic != kCkptMagic) {
        throw InputError("checkpoint: bad magic in " + path.string());
    }
    std::uint32_t h = 0, k = 0, c = 0;
    if (!io::get_u32(in, h) || !io::get_u32(in, k) || !io::get_u32(in, c)) {
        throw InputError("checkpoint: truncated header");
    }
    if (c != 0 && c != k) throw InputError("checkpoint: centroid rows must be 0 or k");
    Checkpoint ckpt;
    ckpt.w1 = get_matrix(in, h, h);
    ckpt.w2 = get_matrix(in, h, k);
    if (!io::get_f64(in, ckpt.lambda)) throw InputError("checkpoint: missing lambda");
    if (c != 0) ckpt.centroids = get_matrix(in, k, k);
    return ckpt;
}

}  // namespace cdac
