#include <doctest.h>

#include "megphone/dsp/zscore.hpp"
#include "megphone/error.hpp"
#include "megphone/eval.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <set>

using namespace megphone;
using megphone::testing::Gen;

// ---------------------------------------------------------------------------
// folds

TEST_CASE("ten balanced rows in five folds") {
    const std::vector<int> y{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    const auto split = kfold(y, 5, 3);
    for (int f = 0; f < 5; ++f) {
        const auto test = split.test_rows(f);
        REQUIRE(test.size() == 2);
        CHECK(y[test[0]] != y[test[1]]);
        CHECK(split.train_rows(f).size() == 8);
    }
    CHECK(kfold(y, 5, 3).assignments == split.assignments);
}

TEST_CASE("stratification on 100 balanced rows") {
    Gen gen(1);
    const auto y = gen.labels(100);
    const auto split = kfold(y, 5, 9);
    for (int f = 0; f < 5; ++f) {
        int c0 = 0, c1 = 0;
        for (auto i : split.test_rows(f)) (y[i] ? c1 : c0)++;
        CHECK(c0 == 10);
        CHECK(c1 == 10);
    }
}

TEST_CASE("fold sizes differ by at most one") {
    Gen gen(2);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = gen.integer(2, 7);
        const auto n = static_cast<std::size_t>(gen.integer(k, 60));
        std::vector<int> y(n);
        for (auto& v : y) v = gen.integer(0, 1);
        const auto split = kfold(y, k, static_cast<std::uint64_t>(trial));
        std::vector<int> size(k, 0), c1(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            size[split.assignments[i]]++;
            c1[split.assignments[i]] += y[i];
        }
        CHECK(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()) <= 1);
        CHECK(*std::max_element(c1.begin(), c1.end()) - *std::min_element(c1.begin(), c1.end()) <= 1);
        std::set<std::size_t> seen;
        for (int f = 0; f < k; ++f)
            for (auto i : split.test_rows(f)) CHECK(seen.insert(i).second);
        CHECK(seen.size() == n);
    }
    CHECK_THROWS_AS(kfold(std::vector<int>{0, 1}, 1), ConfigError);
    CHECK_THROWS_AS(kfold(std::vector<int>{0, 1, 0}, 5), ConfigError);
    CHECK(kfold(std::size_t{12}, 4, 1).assignments.size() == 12);
}

// ---------------------------------------------------------------------------
// metrics

TEST_CASE("perfect scores") {
    const std::vector<int> y{0, 0, 1, 1};
    const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
    const auto m = metrics(y, s);
    CHECK(m.accuracy == 1.0);
    CHECK(m.f1 == 1.0);
    CHECK(m.auc == 1.0);
}

TEST_CASE("hand-counted AUC") {
    const std::vector<int> y{0, 0, 1, 1};
    const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
    CHECK(roc_auc(y, s) == 0.75);
}

TEST_CASE("macro F1 by hand") {
    // predictions 1,1,0,1 against truth 0,1,0,1: class 1 P=2/3 R=1, class 0 P=1 R=1/2
    const std::vector<int> y{0, 1, 0, 1};
    const std::vector<double> s{0.6, 0.7, 0.2, 0.9};
    const auto m = metrics(y, s);
    CHECK(m.accuracy == 0.75);
    CHECK(m.f1 == doctest::Approx(0.5 * (0.8 + 2.0 / 3.0)));
}

TEST_CASE("AUC complement and brute force") {
    Gen gen(3);
    for (int trial = 0; trial < 40; ++trial) {
        const auto n = static_cast<std::size_t>(gen.integer(2, 120));
        auto y = gen.labels(n);
        std::vector<double> s(n), flipped(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = std::round(gen.uniform() * 20.0) / 20.0;  // ties are common
            flipped[i] = 1.0 - s[i];
        }
        const double auc = roc_auc(y, s);
        CHECK(auc == doctest::Approx(oracle::auc_pairs(y, s)).epsilon(1e-12));
        CHECK(auc + roc_auc(y, flipped) == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(roc_auc({1, 1}, std::vector<double>{0.1, 0.2}), DataError);
}

TEST_CASE("constant classifier on balanced data") {
    Gen gen(4);
    const auto y = gen.labels(50);
    const std::vector<double> half(50, 0.5), low(50, 0.2);
    CHECK(metrics(y, half).accuracy == 0.5);
    CHECK(metrics(y, low).accuracy == 0.5);
    CHECK(metrics(y, half).auc == 0.5);
}

// ---------------------------------------------------------------------------
// Wilcoxon

TEST_CASE("five positive differences") {
    const std::vector<double> a{1, 2, 3, 4, 5}, b(5, 0.0);
    const auto t = wilcoxon(a, b);
    CHECK(t.W == 0.0);
    CHECK(t.p == doctest::Approx(2.0 / 32.0).epsilon(1e-12));
    CHECK(t.n_effective == 5);
    CHECK(t.method == WilcoxonMethod::exact);
}

TEST_CASE("equal samples are an error") {
    const std::vector<double> a{1, 2, 3};
    try {
        wilcoxon(a, a);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("no nonzero differences") != std::string::npos);
    }
}

TEST_CASE("exact p equals sign enumeration, ties and zeros included") {
    Gen gen(5);
    for (int trial = 0; trial < 60; ++trial) {
        const auto n = static_cast<std::size_t>(gen.integer(1, 12));
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse values make ties and zero differences likely.
            a[i] = gen.integer(0, 6);
            b[i] = gen.integer(0, 6) + (trial % 2 ? gen.uniform() : 0.0);
        }
        const auto ref = oracle::wilcoxon_enumerate(a, b);
        if (ref.n == 0) continue;
        const auto t = wilcoxon(a, b);
        CHECK(t.n_effective == ref.n);
        CHECK(t.W == doctest::Approx(ref.W));
        CHECK(t.p == doctest::Approx(ref.p).epsilon(1e-12));
    }
}

TEST_CASE("normal approximation at the crossover") {
    Gen gen(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = gen.normals(25);
        auto b = gen.normals(25);
        for (auto& v : b) v += 0.3;
        const auto exact = wilcoxon(a, b, WilcoxonMethod::exact);
        const auto approx = wilcoxon(a, b, WilcoxonMethod::normal_approx);
        CHECK(std::abs(exact.p - approx.p) <= 0.01);
        CHECK(wilcoxon(a, b).method == WilcoxonMethod::exact);
    }
    const auto a = gen.normals(30), b = gen.normals(30);
    CHECK(wilcoxon(a, b).method == WilcoxonMethod::normal_approx);
}

// ---------------------------------------------------------------------------
// cross-validated evaluation

namespace {

PairDataset planted(Gen& gen, std::size_t n, Eigen::Index p, double shift) {
    PairDataset ds;
    ds.pair = {"a", "e"};
    ds.y = gen.labels(n);
    ds.X = gen.matrix(static_cast<Eigen::Index>(n), p);
    for (std::size_t i = 0; i < n; ++i) {
        ds.X(static_cast<Eigen::Index>(i), 0) += ds.y[i] ? shift : -shift;
        ds.onsets.push_back(static_cast<double>(i));
    }
    return ds;
}

}  // namespace

TEST_CASE("statistics never see held-out rows") {
    Gen gen(7);
    const auto ds = planted(gen, 60, 5, 1.0);
    const auto split = kfold(ds.y, 5, 1);
    int calls = 0;
    EvaluateOptions options;
    options.on_fold = [&](int fold, std::span<const std::size_t> stats_rows, std::span<const std::size_t> test_rows) {
        ++calls;
        std::set<std::size_t> test(test_rows.begin(), test_rows.end());
        for (auto r : stats_rows) {
            CHECK(test.count(r) == 0);
            CHECK(split.assignments[r] != fold);
        }
        CHECK(stats_rows.size() + test_rows.size() == 60);
    };
    const auto ev = evaluate(ModelSpec::preset("elastic_net"), ds, split, options);
    CHECK(calls == 5);
    CHECK(ev.folds.size() == 5);
}

TEST_CASE("planted signal is decoded and shuffled labels are not") {
    Gen gen(8);
    const auto spec = ModelSpec::preset("elastic_net");
    const auto strong = planted(gen, 120, 40, 2.5);
    CHECK(evaluate(spec, strong, kfold(strong.y, 5, 0)).mean.accuracy >= 0.9);

    // 400 rows keep the null spread (about 0.025) well inside the 0.07 band.
    const auto ds = planted(gen, 400, 40, 2.5);

    int within = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto shuffled = ds;
        std::mt19937_64 engine(seed);
        std::shuffle(shuffled.y.begin(), shuffled.y.end(), engine);
        const auto null = evaluate(spec, shuffled, kfold(shuffled.y, 5, seed));
        within += std::abs(null.mean.accuracy - 0.5) <= 0.07;
    }
    CHECK(within >= 18);
}

TEST_CASE("evaluation is deterministic and self-consistent") {
    Gen gen(9);
    const auto ds = planted(gen, 50, 6, 0.7);
    const auto split = kfold(ds.y, 5, 2);
    const auto a = evaluate(ModelSpec::preset("lda"), ds, split);
    const auto b = evaluate(ModelSpec::preset("lda"), ds, split);
    REQUIRE(a.folds.size() == b.folds.size());
    for (std::size_t f = 0; f < a.folds.size(); ++f) {
        CHECK(a.folds[f].accuracy == b.folds[f].accuracy);
        CHECK(a.folds[f].auc == b.folds[f].auc);
    }
    CHECK(a.scores == b.scores);
    double mean = 0;
    for (const auto& m : a.folds) mean += m.accuracy;
    CHECK(a.mean.accuracy == doctest::Approx(mean / 5.0));
    std::size_t hits = 0;
    for (auto c : a.correct) hits += c;
    // Equal fold sizes, so the pooled hit rate equals the mean fold accuracy.
    CHECK(static_cast<double>(hits) / 50.0 == doctest::Approx(a.mean.accuracy));
}
