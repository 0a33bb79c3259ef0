#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <random>
#include <sstream>

#include "cdac/metrics.hpp"
#include "oracles.hpp"

using namespace cdac;

namespace {

using Labels = std::vector<int>;

Labels random_labels(std::size_t n, int k, std::mt19937_64& rng) {
    Labels v(n);
    for (auto& x : v) x = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
    return v;
}

Labels relabel(const Labels& v, std::mt19937_64& rng) {
    std::vector<int> perm(static_cast<std::size_t>(*std::max_element(v.begin(), v.end()) + 1));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Labels out;
    for (int x : v) out.push_back(perm[static_cast<std::size_t>(x)] + 10);
    return out;
}

}  // namespace

TEST_CASE("nmi examples and conventions") {
    CHECK(nmi(Labels{0, 0, 1, 1}, Labels{0, 0, 1, 1}) == doctest::Approx(1.0));
    CHECK(nmi(Labels{0, 0, 1, 1}, Labels{0, 0, 0, 0}) == 0.0);
    CHECK(nmi(Labels{0, 0, 0, 0}, Labels{0, 1, 0, 1}) == 0.0);
    CHECK(nmi(Labels{0, 0, 1, 1}, Labels{0, 1, 0, 1}) == doctest::Approx(0.0));
    CHECK(nmi(Labels{3, 3, 3}, Labels{7, 7, 7}) == 1.0);
    // Explicit entropies and MI from the 2x2 table.
    const Labels a{0, 0, 0, 1}, b{0, 0, 1, 1};
    const double h = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
    const double hb = std::log(2.0);
    const double mi = 0.5 * std::log(0.5 / (0.75 * 0.5)) + 0.25 * std::log(0.25 / (0.75 * 0.5)) +
                      0.25 * std::log(0.25 / (0.25 * 0.5));
    CHECK(nmi(a, b) == doctest::Approx(mi / (0.5 * (h + hb))));
    CHECK_THROWS_AS(nmi(Labels{0, 1}, Labels{0}), InputError);
}

TEST_CASE("ari examples") {
    CHECK(ari(Labels{0, 0, 1, 1}, Labels{0, 0, 1, 1}) == doctest::Approx(1.0));
    CHECK(ari(Labels{0, 0, 1, 1}, Labels{0, 1, 0, 1}) == doctest::Approx(-0.5));
    CHECK(ari(Labels{0, 0, 1, 1}, Labels{5, 5, 2, 2}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(ari(Labels{0, 1}, Labels{0}), InputError);
}

TEST_CASE("ari matches brute-force pair counting") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 5 + static_cast<std::size_t>(t % 20);
        auto a = random_labels(n, 2 + t % 4, rng);
        auto b = random_labels(n, 2 + t % 5, rng);
        const double expect = oracle::pair_counting_ari(a, b);
        if (std::isfinite(expect)) CHECK(ari(a, b) == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("hungarian examples") {
    Matrix c(2, 2);
    c << 1, 2, 2, 1;
    auto a = hungarian(c);
    CHECK(a.row_to_col == std::vector<int>{0, 1});
    CHECK(a.total_cost == doctest::Approx(2.0));
    c << 4, 1, 2, 3;
    a = hungarian(c);
    CHECK(a.row_to_col == std::vector<int>{1, 0});
    CHECK(a.total_cost == doctest::Approx(3.0));

    Matrix bad = Matrix::Zero(2, 2);
    bad(0, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(hungarian(bad), InputError);
}

TEST_CASE("hungarian equals the brute-force minimum on random 5x5 integer matrices") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 300; ++t) {
        Matrix c(5, 5);
        for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = static_cast<double>(rng() % 20) - 5.0;
        auto a = hungarian(c);
        CHECK(a.total_cost == doctest::Approx(oracle::brute_force_assignment(c)));
        std::vector<int> cols = a.row_to_col;
        std::sort(cols.begin(), cols.end());
        CHECK(cols == std::vector<int>{0, 1, 2, 3, 4});
    }
}

TEST_CASE("hungarian pads rectangular input") {
    Matrix c(2, 3);
    c << 5, 1, 9, 2, 8, 0;
    auto a = hungarian(c);
    CHECK(a.total_cost == doctest::Approx(1.0));
    CHECK(a.row_to_col == std::vector<int>{1, 2});
    auto t = hungarian(Matrix(c.transpose()));
    CHECK(t.total_cost == doctest::Approx(1.0));
    CHECK(std::count(t.row_to_col.begin(), t.row_to_col.end(), -1) == 1);
}

TEST_CASE("acc examples") {
    CHECK(acc(Labels{0, 0, 1, 1}, Labels{0, 0, 1, 1}).acc == 1.0);
    auto swapped = acc(Labels{0, 0, 1, 1}, Labels{1, 1, 0, 0});
    CHECK(swapped.acc == 1.0);
    CHECK(swapped.alignment == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});
    auto stranded = acc(Labels{0, 0, 1, 1}, Labels{0, 1, 2, 3});
    CHECK(stranded.acc == doctest::Approx(0.5));
    CHECK(std::count_if(stranded.alignment.begin(), stranded.alignment.end(),
                        [](auto p) { return p.second == -1; }) == 2);
}

TEST_CASE("acc equals brute-force best alignment (<= 6 clusters)") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 4 + static_cast<std::size_t>(t % 30);
        auto truth = random_labels(n, 1 + t % 5, rng);
        auto pred = random_labels(n, 1 + (t / 5) % 6, rng);
        CHECK(acc(truth, pred).acc == doctest::Approx(oracle::brute_force_accuracy(truth, pred)));
    }
}

TEST_CASE("metric invariances and bounds") {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 6 + static_cast<std::size_t>(t % 25);
        auto a = random_labels(n, 2 + t % 4, rng);
        auto b = random_labels(n, 2 + t % 6, rng);
        auto b2 = relabel(b, rng);
        CHECK(nmi(a, b2) == doctest::Approx(nmi(a, b)));
        CHECK(ari(a, b2) == doctest::Approx(ari(a, b)));
        CHECK(acc(a, b2).acc == doctest::Approx(acc(a, b).acc));
        CHECK(nmi(a, b) == doctest::Approx(nmi(b, a)));
        CHECK(ari(a, b) == doctest::Approx(ari(b, a)));

        auto r = evaluate(a, b);
        CHECK(r.nmi >= 0.0);
        CHECK(r.nmi <= 1.0);
        CHECK(r.ari <= 1.0 + 1e-12);
        CHECK(r.acc >= 0.0);
        CHECK(r.acc <= 1.0);
        CHECK(r.confusion.total() == static_cast<std::int64_t>(n));
        std::set<int> matched;
        for (auto [cluster, cls] : r.alignment)
            if (cls >= 0) CHECK(matched.insert(cls).second);
    }
}

TEST_CASE("contingency and confusion export") {
    auto t = contingency(Labels{0, 0, 1, 1, 1}, Labels{4, 4, 4, 2, 2});
    CHECK(t.classes == std::vector<int>{0, 1});
    CHECK(t.clusters == std::vector<int>{2, 4});
    CHECK(t.counts(0, 1) == 2);
    CHECK(t.counts(1, 0) == 2);
    CHECK(t.counts(1, 1) == 1);

    std::vector<std::string> names = {"alarm", "book"};
    std::ostringstream hidden, shown;
    write_confusion_csv(hidden, t, names, 5);
    CHECK(hidden.str() == "class,cluster_2,cluster_4\nalarm,0,2\nbook,2,1\n");
    write_confusion_csv(shown, t, names, 5, true);
    CHECK(shown.str() ==
          "class,cluster_0,cluster_1,cluster_2,cluster_3,cluster_4\nalarm,0,0,0,0,2\nbook,0,0,2,0,1\n");
}

TEST_CASE("encode_labels") {
    std::vector<std::string> classes = {"a", "b", "c"};
    std::vector<std::string> labels = {"c", "a", "c"};
    CHECK(encode_labels(labels, classes) == Labels{2, 0, 2});
    std::vector<std::string> unknown = {"z"};
    CHECK_THROWS_AS(encode_labels(unknown, classes), InputError);
}
