// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>

#include "cdac/clusternet.hpp"
#include "cdac/metrics.hpp"
#include "cdac/pairwise.hpp"
#include "cdac/pipeline.hpp"
#include "cdac/refine.hpp"
#include "oracles.hpp"

using namespace cdac;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = limit_s <= 0 || secs < limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.2fs", secs);
    std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << name << "  [" << o.detail
              << "; " << timing;
    if (limit_s > 0) std::cout << " of " << limit_s << "s" << (in_time ? "" : " EXCEEDED");
    std::cout << "]" << std::endl;
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// ---- 1: gradients -----------------------------------------------------------

Outcome gradient_correctness() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> n_d(2, 4), h_d(1, 8), k_d(2, 4);
    double worst = 0.0;
    int checked = 0;
    int sim_instances = 0, kld_instances = 0;
    while (sim_instances < 50 || kld_instances < 50) {
        const Index n = static_cast<Index>(n_d(rng)), h = static_cast<Index>(h_d(rng)), k = static_cast<Index>(k_d(rng));
        auto params = init_params(h, k, rng());
        const Matrix e = oracle::random_matrix(n, h, rng, -2, 2);

        if (sim_instances < 50) {
            PairLabels r(n);
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < n; ++j) r(i, j) = static_cast<PairLabel>(static_cast<int>(rng() % 3) - 1);
            r(0, 1) = PairLabel::Similar;
            auto loss_of = [&](const ClusterNetParams& p) {
                return similarity_loss(similarity_matrix(forward(p, e, 0).intent), r).loss;
            };
            auto fwd = forward(params, e, 0);
            const auto sl = similarity_loss(similarity_matrix(fwd.intent), r);
            const auto g = backward(params, fwd.cache, similarity_backward(fwd.intent, sl.d_similarity));
            auto n1 = oracle::central_difference(
                [&](const Matrix& w) { auto p = params; p.w1 = w; return loss_of(p); }, params.w1);
            auto n2 = oracle::central_difference(
                [&](const Matrix& w) { auto p = params; p.w2 = w; return loss_of(p); }, params.w2);
            worst = std::max({worst, oracle::relative_error(g.w1, n1), oracle::relative_error(g.w2, n2)});
            checked += 2;
            ++sim_instances;
        }

        if (kld_instances < 50) {
            Matrix u = oracle::random_matrix(k, k, rng, -1, 1);
            Matrix p_target = oracle::random_matrix(n, k, rng, 0.01, 1.0);
            for (Eigen::Index i = 0; i < p_target.rows(); ++i) p_target.row(i) /= p_target.row(i).sum();
            auto loss_of = [&](const ClusterNetParams& p, const Matrix& cent) {
                return kld_loss(p_target, soft_assign(forward(p, e, 0).intent, cent)).loss;
            };
            auto fwd = forward(params, e, 0);
            const Matrix q = soft_assign(fwd.intent, u);
            const auto kl = kld_loss(p_target, q);
            const auto sg = soft_assign_backward(fwd.intent, u, q, kl.d_q);
            const auto g = backward(params, fwd.cache, sg.intent);
            auto n1 = oracle::central_difference(
                [&](const Matrix& w) { auto p = params; p.w1 = w; return loss_of(p, u); }, params.w1);
            auto n2 = oracle::central_difference(
                [&](const Matrix& w) { auto p = params; p.w2 = w; return loss_of(p, u); }, params.w2);
            auto nu = oracle::central_difference([&](const Matrix& c) { return loss_of(params, c); }, u);
            worst = std::max({worst, oracle::relative_error(g.w1, n1), oracle::relative_error(g.w2, n2),
                              oracle::relative_error(sg.centroids, nu)});
            checked += 3;
            ++kld_instances;
        }
    }
    return {worst < 1e-4, std::to_string(sim_instances) + " similarity + " + std::to_string(kld_instances) +
                              " KLD instances, " + std::to_string(checked) + " gradients, worst rel err " +
                              sci(worst)};
}

// ---- 2: distribution invariants -------------------------------------------

Outcome distribution_invariants() {
    std::mt19937_64 rng(77);
    double worst_row = 0.0, min_kld = 1.0, max_self = 0.0;
    int positive_violations = 0;
    for (int t = 0; t < 1000; ++t) {
        const Index n = 1 + rng() % 12, k = 2 + rng() % 8;
        const Matrix q = soft_assign(oracle::random_matrix(n, k, rng, -4, 4), oracle::random_matrix(k, k, rng, -4, 4));
        const Matrix p = target_distribution(q, t % 2 ? TargetNormalization::Uniform : TargetNormalization::ClusterFrequency);
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            worst_row = std::max({worst_row, std::abs(q.row(i).sum() - 1.0), std::abs(p.row(i).sum() - 1.0)});
        }
        const double kl = kld_loss(p, q).loss;
        min_kld = std::min(min_kld, kl);
        max_self = std::max(max_self, std::abs(kld_loss(q, q).loss));
        // P != Q must give a strictly positive divergence.
        if ((p - q).cwiseAbs().maxCoeff() > 1e-12 && !(kl > 0.0)) ++positive_violations;
    }
    const bool ok = worst_row <= 1e-9 && min_kld >= 0.0 && max_self <= 1e-12 && positive_violations == 0;
    return {ok, "1000 instances, max |row sum - 1| " + sci(worst_row) + ", min KLD " +
                    sci(min_kld) + ", max KLD(Q,Q) " + sci(max_self) +
                    ", P!=Q with KLD<=0: " + std::to_string(positive_violations)};
}

// ---- 3: threshold schedule ---------------------------------------------------

Outcome threshold_schedule() {
    SynthParams sp;
    sp.num_classes = 4;
    sp.per_class = 10;
    sp.dim = 4;
    const auto ds = generate_synthetic_blobs(sp);
    const auto mask = make_experiment_mask(ds, 0.25, 0.1, 1);
    auto params = init_params(ds.dim(), 4, 1);
    auto opt = make_optimizer(params, 1e-3);
    ThresholdState ts;
    ts.eta = 0.009;
    PairwiseConfig cfg;
    cfg.batch_size = 16;
    cfg.max_epochs = 100;
    const auto log = run_pairwise_training(ds, mask, params, opt, ts, cfg);
    double worst = 0.0;
    for (std::size_t t = 0; t < log.epochs.size(); ++t) {
        worst = std::max(worst, std::abs(log.epochs[t].lambda - 0.0099 * static_cast<double>(t + 1)));
    }
    const bool ok = log.epochs.size() == 46 && log.thresholds_met && !ts.active() && worst <= 1e-12;
    return {ok, std::to_string(log.epochs.size()) + " lambda updates, max |lambda_t - 0.0099 t| " +
                    sci(worst)};
}

// ---- 4: metric oracles -------------------------------------------------------

Outcome metric_oracles() {
    std::mt19937_64 rng(5);
    int mismatches = 0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + rng() % 40;
        const int classes = 1 + static_cast<int>(rng() % 6), clusters = 1 + static_cast<int>(rng() % 6);
        std::vector<int> truth(n), pred(n);
        for (auto& x : truth) x = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
        for (auto& x : pred) x = static_cast<int>(rng() % static_cast<std::uint64_t>(clusters));
        if (std::abs(acc(truth, pred).acc - oracle::brute_force_accuracy(truth, pred)) > 1e-12) ++mismatches;
    }
    const std::vector<int> a{0, 0, 1, 1}, b{0, 1, 0, 1}, one{0, 0, 0, 0}, other{5, 5, 5, 5};
    const double ari_v = ari(a, b);
    const bool nmi_ok = nmi(one, other) == 1.0 && nmi(a, one) == 0.0 && nmi(one, a) == 0.0 &&
                        std::abs(nmi(a, a) - 1.0) < 1e-12 && std::abs(nmi(a, b)) < 1e-12;
    const bool ok = mismatches == 0 && std::abs(ari_v + 0.5) < 1e-12 && nmi_ok;
    return {ok, "200 brute-force ACC instances, mismatches " + std::to_string(mismatches) + "; ARI " +
                    fmt(ari_v) + "; NMI conventions " + (nmi_ok ? "hold" : "violated")};
}

// ---- 5-8: synthetic reproduction --------------------------------------------

const EmbeddedDataset& blobs() {
    static const EmbeddedDataset ds = [] {
        SynthParams p;
        p.num_classes = 8;
        p.per_class = 200;
        p.dim = 16;
        p.centroid_scale = 10.0;
        p.noise_sigma = 1.0;
        return generate_synthetic_blobs(p);
    }();
    return ds;
}

RunConfig setup(Variant v, double multiplier = 1.0) {
    RunConfig c;
    c.variant = v;
    c.unknown_class_ratio = 0.25;
    c.labeled_ratio = 0.1;
    c.num_runs = 3;
    c.cluster_multiplier = multiplier;
    c.jobs = 1;
    return c;
}

// Reports are cached so later criteria reuse earlier runs.
const ClusteringReport& run(Variant v, double multiplier = 1.0, std::optional<double> gamma = std::nullopt) {
    static std::map<std::tuple<int, double, double>, ClusteringReport> cache;
    const auto key = std::make_tuple(static_cast<int>(v), multiplier, gamma.value_or(-1.0));
    auto it = cache.find(key);
    if (it == cache.end()) {
        auto cfg = setup(v, multiplier);
        cfg.gamma = gamma;
        it = cache.emplace(key, run_variant(cfg, blobs())).first;
    }
    return it->second;
}

Outcome synthetic_reproduction() {
    const double cdac = run(Variant::CDAC_Plus).acc.mean;
    const double km = run(Variant::KM_Raw).acc.mean;
    return {cdac >= 0.90 && cdac >= km, "CDAC+ mean ACC " + fmt(cdac) + ", KM-raw " + fmt(km)};
}

Outcome cluster_count_insensitivity() {
    const auto& x1 = run(Variant::CDAC_Plus);
    const auto& x2 = run(Variant::CDAC_Plus, 2.0);
    const auto& km2 = run(Variant::CDAC_KM, 2.0);
    int empty_runs = 0;
    for (const auto& r : x2.runs)
        if (r.occupied_clusters < static_cast<Index>(r.clusters)) ++empty_runs;
    const double drop = x1.acc.mean - x2.acc.mean;
    const bool ok = drop < 0.05 && empty_runs > 0 && x2.acc.mean >= km2.acc.mean;
    return {ok, "CDAC+ x1 " + fmt(x1.acc.mean) + ", x2 " + fmt(x2.acc.mean) + " (drop " + fmt(drop) +
                    "), runs with empty clusters " + std::to_string(empty_runs) + "/3, CDAC-KM x2 " +
                    fmt(km2.acc.mean)};
}

Outcome ablation_ordering() {
    const double cdac = run(Variant::CDAC_Plus).acc.mean;
    const double dac = run(Variant::DAC_Plus).acc.mean;
    const double ckm = run(Variant::CDAC_KM).acc.mean;
    return {cdac >= dac - 0.02 && cdac >= ckm - 0.02,
            "CDAC+ " + fmt(cdac) + ", DAC+ " + fmt(dac) + ", CDAC-KM " + fmt(ckm)};
}

Outcome imbalance_robustness() {
    const double full = run(Variant::CDAC_Plus, 1.0, 1.0).acc.mean;
    const double skew = run(Variant::CDAC_Plus, 1.0, 0.3).acc.mean;
    return {full - skew < 0.10, "CDAC+ gamma 1.0 " + fmt(full) + ", gamma 0.3 " + fmt(skew) + " (drop " +
                                    fmt(full - skew) + ")"};
}

// ---- 9: determinism ------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("cdac_accept_" + std::to_string(std::random_device{}()));
    fs::create_directories(root);
    const std::string cli = CDAC_CLI_PATH;
    const fs::path data = root / "blobs.emb";
    save_binary(blobs(), data);
    auto train = [&](const std::string& out) {
        const std::string cmd = "\"" + cli + "\" train --data \"" + data.string() + "\" --variant CDAC+ --runs 2 --seed 11 --out \"" +
                                (root / out).string() + "\" > /dev/null";
        return std::system(cmd.c_str());
    };
    if (train("a") != 0 || train("b") != 0) {
        fs::remove_all(root);
        return {false, "cmd_train failed"};
    }
    int files = 0, differing = 0;
    for (const auto& entry : fs::directory_iterator(root / "a")) {
        ++files;
        const fs::path twin = root / "b" / entry.path().filename();
        if (!fs::exists(twin) || slurp(entry.path()) != slurp(twin)) ++differing;
    }
    int extra = 0;
    for (const auto& entry : fs::directory_iterator(root / "b"))
        if (!fs::exists(root / "a" / entry.path().filename())) ++extra;
    fs::remove_all(root);
    const bool ok = files > 0 && differing == 0 && extra == 0;
    return {ok, std::to_string(files) + " output files compared, " + std::to_string(differing + extra) + " differ"};
}

}  // namespace

int main() {
    std::cout << "acceptance suite" << std::endl;
    criterion(1, "gradient correctness (similarity and KLD losses)", 10, gradient_correctness);
    criterion(2, "Q/P row sums and KLD sign", 5, distribution_invariants);
    criterion(3, "threshold schedule stops after 46 updates", 1, threshold_schedule);
    criterion(4, "metric oracles", 10, metric_oracles);
    criterion(5, "CDAC+ synthetic reproduction vs KM-raw", 300, synthetic_reproduction);
    criterion(6, "cluster-count insensitivity at 2x", 600, cluster_count_insensitivity);
    criterion(7, "ablation ordering", 900, ablation_ordering);
    criterion(8, "imbalance robustness at gamma 0.3", 600, imbalance_robustness);
    criterion(9, "byte-identical train outputs", 0, determinism);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion/criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
