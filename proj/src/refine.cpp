#include "cdac/refine.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <set>

#include "cdac/seed.hpp"

namespace cdac {

namespace {

constexpr double kMinFrequency = 1e-12;

Matrix squared_distances(const Matrix& x, const Matrix& centroids) {
    Matrix d(x.rows(), centroids.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
            d(i, j) = (x.row(i) - centroids.row(j)).squaredNorm();
        }
    }
    return d;
}

Assignments argmin_rows(const Matrix& m, Vector* best = nullptr) {
    Assignments out(static_cast<Index>(m.rows()));
    if (best) best->resize(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Eigen::Index j = 0;
        m.row(i).minCoeff(&j);
        out[static_cast<Index>(i)] = static_cast<int>(j);
        if (best) (*best)[i] = m(i, j);
    }
    return out;
}

Matrix seed_plus_plus(const Matrix& x, Index k, std::mt19937_64& rng) {
    const auto m = static_cast<Index>(x.rows());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix centroids(static_cast<Eigen::Index>(k), x.cols());

    std::uniform_int_distribution<Index> pick(0, m - 1);
    centroids.row(0) = x.row(static_cast<Eigen::Index>(pick(rng)));
    Vector closest = (x.rowwise() - centroids.row(0)).rowwise().squaredNorm();

    for (Index c = 1; c < k; ++c) {
        const double total = closest.sum();
        Index chosen = 0;
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double acc = 0.0;
            chosen = m - 1;
            for (Index i = 0; i < m; ++i) {
                acc += closest[static_cast<Eigen::Index>(i)];
                if (acc > target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        centroids.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(chosen));
        const Vector d = (x.rowwise() - centroids.row(static_cast<Eigen::Index>(c))).rowwise().squaredNorm();
        closest = closest.cwiseMin(d);
    }
    return centroids;
}

KMeansResult lloyd(const Matrix& x, Index k, std::uint64_t seed, int max_iters) {
    std::mt19937_64 rng(seed);
    KMeansResult res;
    res.centroids = seed_plus_plus(x, k, rng);
    const auto m = static_cast<Index>(x.rows());

    Assignments previous;
    Vector best;
    for (int it = 1; it <= max_iters; ++it) {
        res.assignments = argmin_rows(squared_distances(x, res.centroids), &best);
        res.iterations = it;
        if (res.assignments == previous) break;

        Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), x.cols());
        std::vector<Index> counts(k, 0);
        for (Index i = 0; i < m; ++i) {
            const auto c = static_cast<Index>(res.assignments[i]);
            sums.row(static_cast<Eigen::Index>(c)) += x.row(static_cast<Eigen::Index>(i));
            ++counts[c];
        }
        std::set<Index> taken;
        for (Index c = 0; c < k; ++c) {
            const auto cc = static_cast<Eigen::Index>(c);
            if (counts[c] > 0) {
                res.centroids.row(cc) = sums.row(cc) / static_cast<double>(counts[c]);
                continue;
            }
            // Re-seed from the point worst served by its centroid.
            Index far = 0;
            double far_d = -1.0;
            for (Index i = 0; i < m; ++i) {
                if (!taken.count(i) && best[static_cast<Eigen::Index>(i)] > far_d) {
                    far_d = best[static_cast<Eigen::Index>(i)];
                    far = i;
                }
            }
            taken.insert(far);
            res.centroids.row(cc) = x.row(static_cast<Eigen::Index>(far));
        }
        previous = res.assignments;
    }
    res.inertia = squared_distances(x, res.centroids).rowwise().minCoeff().sum();
    res.assignments = nearest_centroid(x, res.centroids);
    return res;
}

}  // namespace

KMeansResult kmeans(const Matrix& x, Index k, std::uint64_t seed, int max_iters, int restarts) {
    if (k < 1) throw InputError("kmeans: k must be >= 1");
    if (static_cast<Index>(x.rows()) < k) {
        throw InputError("kmeans: " + std::to_string(x.rows()) + " points cannot form " +
                         std::to_string(k) + " clusters");
    }
    if (max_iters < 1 || restarts < 1) throw InputError("kmeans: max_iters and restarts must be >= 1");

    KMeansResult best;
    for (int r = 0; r < restarts; ++r) {
        const std::uint64_t s = r == 0 ? seed : derive_seed(seed, {static_cast<std::uint64_t>(r)});
        auto res = lloyd(x, k, s, max_iters);
        if (r == 0 || res.inertia < best.inertia) best = std::move(res);
    }
    return best;
}

Assignments nearest_centroid(const Matrix& x, const Matrix& centroids) {
    return argmin_rows(squared_distances(x, centroids));
}

Matrix soft_assign(const Matrix& intent, const Matrix& centroids) {
    if (intent.cols() != centroids.cols()) throw InputError("soft_assign: dimension mismatch");
    Matrix q = (1.0 + squared_distances(intent, centroids).array()).inverse().matrix();
    const Vector z = q.rowwise().sum();
    return z.cwiseInverse().asDiagonal() * q;
}

SoftAssignGradient soft_assign_backward(const Matrix& intent, const Matrix& centroids,
                                        const Matrix& q, const Matrix& d_q) {
    const Matrix kernel = (1.0 + squared_distances(intent, centroids).array()).inverse().matrix();
    const Vector z = kernel.rowwise().sum();
    const Vector inner = d_q.cwiseProduct(q).rowwise().sum();
    // dL/dK_ij = (g_ij - <g_i, q_i>) / Z_i;  dK/dd = -K^2.
    const Matrix d_dist =
        -(z.cwiseInverse().asDiagonal() * (d_q.colwise() - inner)).cwiseProduct(kernel.cwiseAbs2());

    SoftAssignGradient g;
    // d(dist_ij)/dI_i = 2 (I_i - U_j), d(dist_ij)/dU_j = -2 (I_i - U_j).
    const Vector row_w = d_dist.rowwise().sum();
    const Vector col_w = d_dist.colwise().sum().transpose();
    g.intent = 2.0 * (row_w.asDiagonal() * intent - d_dist * centroids);
    g.centroids = 2.0 * (col_w.asDiagonal() * centroids - d_dist.transpose() * intent);
    return g;
}

Matrix target_distribution(const Matrix& q, TargetNormalization norm) {
    Matrix p = q.cwiseAbs2();
    if (norm == TargetNormalization::ClusterFrequency) {
        const RowVector freq = q.colwise().sum().cwiseMax(kMinFrequency);
        p.array().rowwise() /= freq.array();
    }
    const Vector z = p.rowwise().sum();
    return z.cwiseInverse().asDiagonal() * p;
}

KldLoss kld_loss(const Matrix& p, const Matrix& q) {
    if (p.rows() != q.rows() || p.cols() != q.cols()) throw InputError("kld_loss: shape mismatch");
    // Summed as p ln(p/q) - p + q: identical for normalised rows, but every
    // term is non-negative, so round-off cannot push the total below zero.
    KldLoss out;
    out.d_q = Matrix::Ones(q.rows(), q.cols());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double pv = p.data()[i];
        const double qv = q.data()[i];
        const double term = pv > 0.0 ? pv * std::log(pv / qv) - pv + qv : qv;
        out.loss += std::max(term, 0.0);
        out.d_q.data()[i] -= pv / qv;
    }
    return out;
}

std::string to_string(TargetNormalization n) {
    return n == TargetNormalization::ClusterFrequency ? "cluster-frequency" : "uniform";
}

std::optional<TargetNormalization> parse_target_normalization(const std::string& name) {
    if (name == "cluster-frequency") return TargetNormalization::ClusterFrequency;
    if (name == "uniform") return TargetNormalization::Uniform;
    return std::nullopt;
}

Assignments argmax_rows(const Matrix& m) {
    Assignments out(static_cast<Index>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < m.cols(); ++j) {
            if (m(i, j) > m(i, best)) best = j;
        }
        out[static_cast<Index>(i)] = static_cast<int>(best);
    }
    return out;
}

Assignments infer(const Matrix& intent, const Matrix& centroids) {
    return argmax_rows(soft_assign(intent, centroids));
}

Index occupied_clusters(const Assignments& a) {
    return std::set<int>(a.begin(), a.end()).size();
}

RefinementState init_refinement(const EmbeddedDataset& ds, std::span<const Index> rows,
                                const ClusterNetParams& params, std::uint64_t seed,
                                int kmeans_restarts, double delta_label) {
    if (!(delta_label > 0.0 && delta_label < 1.0)) throw InputError("delta_label must be in (0, 1)");
    const Matrix intent = represent(params, ds.gather(rows));
    auto km = kmeans(intent, params.clusters(), seed, 300, kmeans_restarts);
    RefinementState st;
    st.centroids = std::move(km.centroids);
    st.previous_assignments = std::move(km.assignments);
    st.delta_label = delta_label;
    return st;
}

namespace {

double changed_fraction(const Assignments& a, const Assignments& b) {
    if (a.size() != b.size() || a.empty()) return 1.0;
    Index changed = 0;
    for (Index i = 0; i < a.size(); ++i) changed += a[i] != b[i] ? 1 : 0;
    return static_cast<double>(changed) / static_cast<double>(a.size());
}

}  // namespace

RefineLog run_refinement(const EmbeddedDataset& ds, std::span<const Index> rows,
                         ClusterNetParams& params, OptimizerState& opt, RefinementState& state,
                         const RefineConfig& config) {
    if (config.batch_size < 1) throw InputError("refinement batch_size must be >= 1");
    const Index k = params.clusters();
    if (static_cast<Index>(state.centroids.rows()) != k ||
        static_cast<Index>(state.centroids.cols()) != k) {
        throw InputError("refinement centroids must be k x k");
    }
    params.mode = Mode::Eval;
    const Matrix x = ds.gather(rows);
    // Position lookup so minibatches can index P by row position.
    std::vector<Index> positions(rows.size());
    for (Index i = 0; i < positions.size(); ++i) positions[i] = i;

    RefineLog log;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const Matrix q = soft_assign(represent(params, x), state.centroids);
        const Matrix p = target_distribution(q, config.target);
        const Assignments current = argmax_rows(q);

        RefineEpoch rec;
        rec.epoch = epoch;
        rec.kld_loss = kld_loss(p, q).loss / static_cast<double>(rows.size());
        rec.changed_fraction = changed_fraction(current, state.previous_assignments);
        rec.occupied_clusters = occupied_clusters(current);
        log.epochs.push_back(rec);

        // The first epoch always trains; afterwards stop once assignments settle.
        if (epoch > 1 && rec.changed_fraction < state.delta_label) {
            log.converged = true;
            state.previous_assignments = current;
            break;
        }
        state.previous_assignments = current;

        const auto batches = iter_batches(positions, std::max<Index>(config.batch_size, 2),
                                          derive_seed(config.seed, {static_cast<std::uint64_t>(epoch), 5}));
        for (const auto& batch : batches) {
            Matrix xb(static_cast<Eigen::Index>(batch.size()), x.cols());
            Matrix pb(static_cast<Eigen::Index>(batch.size()), p.cols());
            for (Index i = 0; i < batch.size(); ++i) {
                xb.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(batch.indices[i]));
                pb.row(static_cast<Eigen::Index>(i)) = p.row(static_cast<Eigen::Index>(batch.indices[i]));
            }
            auto fwd = forward(params, xb, 0);
            const Matrix qb = soft_assign(fwd.intent, state.centroids);
            auto loss = kld_loss(pb, qb);
            loss.d_q /= static_cast<double>(batch.size());
            const auto g = soft_assign_backward(fwd.intent, state.centroids, qb, loss.d_q);
            if (!g.centroids.allFinite()) {
                throw NumericalError("refinement", "non-finite centroid gradient");
            }
            step(params, opt, backward(params, fwd.cache, g.intent), "refinement");
            adam_update(state.centroids, state.centroid_slot, g.centroids, opt.config);
            if (!state.centroids.allFinite()) {
                throw NumericalError("refinement", "non-finite centroids after update");
            }
        }
        ++log.trained_epochs;
    }
    return log;
}

void write_refine_log(std::ostream& out, const RefineLog& log) {
    out << "epoch,kld_loss,changed_fraction,occupied_clusters\n";
    const auto old = out.precision(10);
    for (const auto& e : log.epochs) {
        out << e.epoch << ',' << e.kld_loss << ',' << e.changed_fraction << ','
            << e.occupied_clusters << '\n';
    }
    out.precision(old);
}

}  // namespace cdac
