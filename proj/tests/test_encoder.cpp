#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "cdac/encoder.hpp"
#include "oracles.hpp"

using namespace cdac;
namespace fs = std::filesystem;

namespace {
Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
    Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : r) {
        Eigen::Index j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}
}  // namespace

TEST_CASE("mean_pool examples") {
    CHECK(mean_pool({rows({{1, 2}, {3, 4}})}) == Vector::Map(std::vector<double>{2, 3}.data(), 2));
    Vector five = mean_pool({rows({{5, 5, 5}})});
    CHECK(five.size() == 3);
    CHECK(five.isApproxToConstant(5.0));
    CHECK(mean_pool({rows({{1, 0}, {-1, 0}})}).isZero());
}

TEST_CASE("mean_pool errors") {
    CHECK_THROWS_AS(mean_pool({Matrix(0, 3)}), InputError);
    CHECK_THROWS_AS(mean_pool({rows({{1, std::numeric_limits<double>::infinity()}})}), InputError);
}

TEST_CASE("mean_pool is permutation invariant and linear") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix x = oracle::random_matrix(1 + trial % 7, 4, rng);
        Vector base = mean_pool({x});

        Matrix shuffled = x;
        std::vector<int> perm(static_cast<std::size_t>(x.rows()));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < perm.size(); ++i) shuffled.row(static_cast<Eigen::Index>(i)) = x.row(perm[i]);
        CHECK((mean_pool({shuffled}) - base).norm() < 1e-12);

        const double alpha = -2.5 + trial * 0.1;
        CHECK((mean_pool({alpha * x}) - alpha * base).norm() < 1e-12);
    }
}

TEST_CASE("token file round trip pools each sample") {
    const fs::path path = fs::temp_directory_path() / "cdac_tokens_test.tok";
    std::vector<TokenSequence> samples = {{rows({{1, 2}, {3, 4}})}, {rows({{5, 5}})},
                                          {rows({{1, 0}, {-1, 0}, {3, 3}})}};
    save_token_file(path, samples, {"a", "", "b"}, {Split::Train, Split::Test, Split::Validation});
    auto ds = load_token_file(path);
    fs::remove(path);
    REQUIRE(ds.size() == 3);
    CHECK(ds.dim() == 2);
    CHECK(ds.embeddings()(0, 0) == doctest::Approx(2));
    CHECK(ds.embeddings()(0, 1) == doctest::Approx(3));
    CHECK(ds.embeddings()(1, 0) == doctest::Approx(5));
    CHECK(ds.embeddings()(2, 0) == doctest::Approx(1));
    CHECK(ds.embeddings()(2, 1) == doctest::Approx(1));
    CHECK(ds.labels() == std::vector<std::string>{"a", "", "b"});
    CHECK(ds.split() == std::vector<Split>{Split::Train, Split::Test, Split::Validation});
}

TEST_CASE("token file rejects a wrong magic") {
    const fs::path path = fs::temp_directory_path() / "cdac_tokens_bad.tok";
    {
        std::ofstream out(path, std::ios::binary);
        out << "EMB1garbage";
    }
    CHECK_THROWS_AS(load_token_file(path), DatasetError);
    fs::remove(path);
}
