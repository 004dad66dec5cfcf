#include <doctest.h>

#include "corpus.hpp"
#include "megphone/error.hpp"
#include "megphone/report.hpp"
#include "megphone/study.hpp"
#include "support.hpp"

#include <set>

using namespace megphone;
using megphone::testing::small_spec;
using megphone::testing::TempDir;
using megphone::testing::write_corpus;

namespace {

ExperimentConfig base_config(std::vector<std::filesystem::path> manifests) {
    ExperimentConfig c;
    c.manifests = std::move(manifests);
    c.min_count = 10;
    c.models = {ModelSpec::preset("elastic_net")};
    return c;
}

const ResultRow& row_named(const ResultTable& t, const std::string& configuration) {
    for (const auto& r : t.rows)
        if (r.configuration == configuration) return r;
    FAIL("no row " << configuration);
    throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("preprocessing keeps gradiometers and lands at 100 Hz") {
    auto spec = small_spec(1, 1.0, 6);
    spec.n_magnetometers = 3;
    spec.phones = {{"a", 4}};
    spec.duration = 20.0;
    const auto [raw, events] = generate(spec);
    const auto clean = preprocess(raw, Preprocessing{});
    CHECK(clean.n_channels() == 6);
    CHECK(clean.sample_rate() == 100.0);
    CHECK(clean.n_samples() == (raw.n_samples() + 9) / 10);

    Preprocessing none;
    none.wavelet = false;
    none.decimation_factor = 1;
    none.band_limit.reset();
    none.sensor_kinds = {ChannelKind::gradiometer, ChannelKind::magnetometer};
    CHECK(preprocess(raw, none) == raw);
}

TEST_CASE("paired comparison of identical outcomes") {
    const std::vector<double> a{0.7, 0.8, 0.9};
    const auto t = compare_paired(a, a);
    CHECK(t.W == 0.0);
    CHECK(t.p == 1.0);
    CHECK(t.n_effective == 0);
    const std::vector<double> b{0.6, 0.7, 0.8};
    CHECK(compare_paired(a, b).n_effective == 3);
}

TEST_CASE("model comparison on two subjects") {
    TempDir dir("study_models");
    const auto c = [&] {
        auto cfg = base_config({write_corpus(dir.path(), "s1", "s1", Task::production, small_spec(1, 2.0)),
                                write_corpus(dir.path(), "s2", "s2", Task::production, small_spec(2, 2.0))});
        cfg.models = {ModelSpec::preset("elastic_net"), ModelSpec::preset("lda")};
        return cfg;
    }();
    const auto result = run_model_comparison(c);
    const auto& t = result.table;
    REQUIRE(t.rows.size() == 2);
    CHECK(t.significance_column);
    int tested = 0;
    for (const auto& r : t.rows) {
        CHECK(r.modality == "production");
        CHECK(r.n == 2);
        CHECK(r.mean.accuracy >= 0.85);
        if (r.test) {
            ++tested;
            CHECK_FALSE(r.compared_to.empty());
            CHECK(r.compared_to != r.model);
        }
    }
    CHECK(tested <= 1);
    // 2 subjects x 1 pair x 2 models x 5 folds
    CHECK(result.folds.size() == 20);
    CHECK(result.examples.size() == 2 * 2 * 80);
    CHECK(t.pair_accuracy.size() == 2);

    auto single = c;
    single.models = {ModelSpec::preset("elastic_net")};
    const auto one = run_model_comparison(single);
    REQUIRE(one.table.rows.size() == 1);
    CHECK_FALSE(one.table.significance_column);
    CHECK_FALSE(one.table.rows[0].test);
    // Same seeds, same model: the shared row does not depend on the other models.
    CHECK(one.table.rows[0].mean.accuracy == row_named(t, one.table.rows[0].configuration).mean.accuracy);
}

TEST_CASE("runs are reproducible and independent of the job count") {
    TempDir dir("study_repro");
    const auto c = base_config({write_corpus(dir.path(), "s1", "s1", Task::production, small_spec(3, 1.0)),
                                write_corpus(dir.path(), "s2", "s2", Task::production, small_spec(4, 1.0))});
    const auto a = run_model_comparison(c);
    const auto b = run_model_comparison(c);
    const auto p = run_model_comparison(c, RunOptions{2});
    CHECK(table_csv(a.table) == table_csv(b.table));
    CHECK(folds_csv(a.folds) == folds_csv(b.folds));
    CHECK(examples_csv(a.examples) == examples_csv(p.examples));
    CHECK(table_csv(a.table) == table_csv(p.table));

    auto reseeded = c;
    reseeded.cv_seed = 77;
    CHECK(examples_csv(run_model_comparison(reseeded).examples) != examples_csv(a.examples));
}

TEST_CASE("task comparison needs two modalities") {
    TempDir dir("study_tasks");
    const auto prod = write_corpus(dir.path(), "p1", "s1", Task::production, small_spec(5, 2.0));
    try {
        run_task_comparison(base_config({prod}));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("need two modalities to compare") != std::string::npos);
    }

    const auto listen = write_corpus(dir.path(), "l1", "s1", Task::listening, small_spec(6, 0.0));
    const auto result = run_task_comparison(base_config({listen, prod}));
    const auto& t = result.table;
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].modality == "production");
    CHECK(t.rows[1].modality == "listening");
    CHECK(t.rows[0].mean.accuracy >= 0.85);
    CHECK(std::abs(t.rows[1].mean.accuracy - 0.5) <= 0.2);
    std::set<std::string> against;
    for (const auto& cmp : t.comparisons) against.insert(cmp.a + "|" + cmp.b);
    CHECK(against.count("production|listening") == 1);
    CHECK(against.count("production|chance") == 1);
    CHECK(against.count("listening|chance") == 1);
}

TEST_CASE("band sweep rows") {
    TempDir dir("study_bands");
    auto spec = small_spec(7, 2.0, 16);
    const auto c = base_config({write_corpus(dir.path(), "s1", "s1", Task::production, spec)});
    const auto result = run_band_sweep(c);
    const auto& t = result.table;
    REQUIRE(t.rows.size() == 7);
    CHECK(t.rows[0].configuration == "Baseline");
    CHECK_FALSE(t.rows[0].test);
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
        CHECK(t.rows[i].compared_to == "Baseline");
        CHECK(t.rows[i].test);
    }
    REQUIRE(result.row_configs.size() == 7);
    for (const auto& rc : result.row_configs) {
        CHECK(rc["preprocessing"]["wavelet"] == false);
        CHECK(rc["preprocessing"]["decimation_factor"] == 1);
    }
    CHECK(result.row_configs[0]["preprocessing"]["band_limit"].is_null());
    CHECK(result.row_configs[2]["preprocessing"]["band_limit"] == nlohmann::json::array({4.0, 7.0}));
}

TEST_CASE("ablation rows change one component each") {
    TempDir dir("study_ablation");
    auto spec = small_spec(8, 1.0, 16);
    spec.n_magnetometers = 8;
    const auto c = base_config({write_corpus(dir.path(), "s1", "s1", Task::production, spec)});
    const auto result = run_ablation(c);
    REQUIRE(result.table.rows.size() == 8);
    REQUIRE(result.row_configs.size() == 8);
    const auto& base = result.row_configs[0];
    CHECK(base["row"] == "baseline");
    for (std::size_t i = 1; i < 8; ++i) {
        const auto& rc = result.row_configs[i];
        CHECK(rc["row"] == ablation_row_ids()[i]);
        int changed = 0;
        for (const auto& key : {"sensor_kind", "wavelet", "decimation_factor", "band_limit"})
            changed += rc["preprocessing"][key] != base["preprocessing"][key];
        changed += rc["models"][0]["l1_ratio"] != base["models"][0]["l1_ratio"];
        CHECK_MESSAGE(changed == 1, rc["row"]);
        CHECK(rc["models"][0]["alpha"] == base["models"][0]["alpha"]);
    }
    CHECK(result.row_configs[5]["models"][0]["l1_ratio"] == 0.0);
    CHECK(result.row_configs[6]["models"][0]["l1_ratio"] == 1.0);
    CHECK(result.row_configs[7]["preprocessing"]["band_limit"].is_null());

    auto subset = c;
    subset.ablation_rows = {"no_l1"};
    const auto few = run_ablation(subset);
    REQUIRE(few.table.rows.size() == 2);
    CHECK(few.table.rows[0].mean.accuracy == result.table.rows[0].mean.accuracy);
    CHECK(few.table.rows[1].mean.accuracy == result.table.rows[5].mean.accuracy);

    subset.ablation_rows = {"no_dropout"};
    CHECK_THROWS_AS(run_ablation(subset), ConfigError);
}

TEST_CASE("missing magnetometers are a data error") {
    TempDir dir("study_nomag");
    const auto c = base_config({write_corpus(dir.path(), "s1", "s1", Task::production, small_spec(9, 1.0, 8))});
    auto subset = c;
    subset.ablation_rows = {"magnetometers_only"};
    CHECK_THROWS_AS(run_ablation(subset), DataError);
}
