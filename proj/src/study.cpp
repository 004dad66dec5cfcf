#include "megphone/study.hpp"

#include "megphone/dsp/bands.hpp"
#include "megphone/dsp/fir.hpp"
#include "megphone/dsp/wavelet.hpp"
#include "megphone/epochs.hpp"
#include "megphone/error.hpp"
#include "megphone/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <set>
#include <thread>

namespace megphone {

namespace {

struct Subject {
    Manifest manifest;
    Recording raw;
    EventTable events;
};

struct Variant {
    std::string configuration;
    Preprocessing preprocessing;
    std::vector<ModelSpec> models;
};

struct UnitKey {
    std::size_t subject, variant, pair, model;
};

struct UnitResult {
    Evaluation evaluation;
    std::vector<double> onsets;
    std::vector<int> folds;
};

using PhonePair = std::pair<std::string, std::string>;

template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> workers;
    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    for (std::size_t w = 0; w < n_workers; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Balancing depends on subject and pair only, so a recording registered under
// two modalities yields identical datasets.
std::uint64_t dataset_seed(std::uint64_t base, const std::string& subject, const PhonePair& pair) {
    return mix_seed(base, fnv1a(subject + '\x1f' + pair.first + '\x1f' + pair.second));
}

std::vector<Subject> load_subjects(const ExperimentConfig& config) {
    std::vector<Subject> subjects;
    std::set<std::pair<std::string, Task>> seen;
    for (const auto& path : config.manifests) {
        Manifest manifest = load_manifest(path);
        if (!seen.emplace(manifest.subject_id, manifest.task).second)
            throw DataError("manifest " + path.string() + " repeats subject '" + manifest.subject_id + "' for task " +
                            std::string(to_string(manifest.task)));
        Recording raw = load_recording(manifest.recording_path);
        EventTable events = load_events(manifest.events_path);
        subjects.push_back({std::move(manifest), std::move(raw), std::move(events)});
    }
    return subjects;
}

std::vector<PhonePair> resolve_pairs(const ExperimentConfig& config, const std::vector<Subject>& subjects) {
    if (config.phone_pairs) return *config.phone_pairs;
    std::optional<std::set<std::string>> common;
    for (const auto& s : subjects) {
        const auto inventory = count_phones(s.events, config.min_count);
        std::set<std::string> selected(inventory.selected.begin(), inventory.selected.end());
        if (!common) {
            common = std::move(selected);
        } else {
            std::set<std::string> both;
            std::set_intersection(common->begin(), common->end(), selected.begin(), selected.end(),
                                  std::inserter(both, both.end()));
            common = std::move(both);
        }
    }
    if (!common || common->size() < 2)
        throw DataError("fewer than two phones reach min_count = " + std::to_string(config.min_count) +
                        " in every recording");
    std::vector<PhonePair> pairs;
    for (auto a = common->begin(); a != common->end(); ++a)
        for (auto b = std::next(a); b != common->end(); ++b) pairs.emplace_back(*a, *b);
    return pairs;
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct EngineOutput {
    std::vector<UnitKey> keys;
    std::vector<UnitResult> results;
    std::vector<PhonePair> pairs;
};

EngineOutput run_engine(const ExperimentConfig& config, const std::vector<Subject>& subjects,
                        const std::vector<Variant>& variants, const RunOptions& options) {
    EngineOutput out;
    out.pairs = resolve_pairs(config, subjects);
    const std::size_t n_pairs = out.pairs.size();

    // Stage 1: preprocessing and epoching per (subject, variant).
    std::vector<EpochSet> epochs(subjects.size() * variants.size());
    parallel_for(epochs.size(), options.jobs, [&](std::size_t i) {
        const auto& subject = subjects[i / variants.size()];
        const auto& variant = variants[i % variants.size()];
        const Recording clean = preprocess(subject.raw, variant.preprocessing);
        epochs[i] = extract_epochs(clean, subject.events, config.tmin, config.tmax);
    });

    // Stage 2: one balanced dataset per (subject, variant, pair).
    std::vector<PairDataset> datasets(epochs.size() * n_pairs);
    std::vector<FoldSplit> splits(datasets.size());
    parallel_for(datasets.size(), options.jobs, [&](std::size_t i) {
        const std::size_t e = i / n_pairs;
        const auto& subject = subjects[e / variants.size()];
        const auto& pair = out.pairs[i % n_pairs];
        try {
            datasets[i] = build_pair_dataset(epochs[e].epochs, pair.first, pair.second,
                                             dataset_seed(config.seed, subject.manifest.subject_id, pair));
        } catch (const DataError& err) {
            throw DataError("subject '" + subject.manifest.subject_id + "', task " +
                            std::string(to_string(subject.manifest.task)) + ": " + err.what());
        }
        splits[i] = kfold(datasets[i].y, config.cv_k, config.cv_seed);
    });

    // Stage 3: every model on every dataset.
    for (std::size_t s = 0; s < subjects.size(); ++s)
        for (std::size_t v = 0; v < variants.size(); ++v)
            for (std::size_t p = 0; p < n_pairs; ++p)
                for (std::size_t m = 0; m < variants[v].models.size(); ++m) out.keys.push_back({s, v, p, m});
    out.results.resize(out.keys.size());
    parallel_for(out.keys.size(), options.jobs, [&](std::size_t i) {
        const auto& k = out.keys[i];
        const std::size_t d = (k.subject * variants.size() + k.variant) * n_pairs + k.pair;
        out.results[i].evaluation = evaluate(variants[k.variant].models[k.model], datasets[d], splits[d]);
        out.results[i].onsets = datasets[d].onsets;
        out.results[i].folds = splits[d].assignments;
    });
    return out;
}

struct RowAccumulator {
    std::map<std::string, std::vector<MetricSet>> per_subject;  // subject -> per-pair means
};

// Builds records and rows keyed by the label function; rows keep first-seen order.
template <class LabelFn>
void collect(StudyResult& result, const std::vector<Subject>& subjects, const std::vector<Variant>& variants,
             const EngineOutput& engine, LabelFn&& row_label, std::vector<std::string>& row_order,
             std::map<std::string, ResultRow>& rows) {
    std::map<std::string, RowAccumulator> acc;
    std::map<std::tuple<std::string, std::string, std::string, std::string, std::string>, std::vector<double>> cells;
    for (std::size_t i = 0; i < engine.keys.size(); ++i) {
        const auto& k = engine.keys[i];
        const auto& subject = subjects[k.subject].manifest;
        const auto& variant = variants[k.variant];
        const auto& model = variant.models[k.model];
        const auto& pair = engine.pairs[k.pair];
        const auto& unit = engine.results[i];
        const std::string task(to_string(subject.task));

        for (std::size_t f = 0; f < unit.evaluation.folds.size(); ++f)
            result.folds.push_back({subject.subject_id, task, pair.first, pair.second, model.name,
                                    variant.configuration, static_cast<int>(f), unit.evaluation.folds[f]});
        for (std::size_t r = 0; r < unit.onsets.size(); ++r)
            result.examples.push_back({subject.subject_id, task, pair.first, pair.second, model.name,
                                       variant.configuration, unit.onsets[r], unit.folds[r],
                                       unit.evaluation.scores[r], unit.evaluation.correct[r] != 0});

        const std::string label = row_label(task, model.name, variant.configuration);
        if (!rows.count(label)) {
            row_order.push_back(label);
            ResultRow row;
            row.modality = task;
            row.model = model.name;
            row.configuration = variant.configuration;
            rows.emplace(label, row);
        }
        acc[label].per_subject[subject.subject_id].push_back(unit.evaluation.mean);
        cells[{task, model.name, variant.configuration, pair.first, pair.second}].push_back(
            unit.evaluation.mean.accuracy);
    }

    for (auto& [label, row] : rows) {
        std::vector<double> accs, f1s, aucs;
        for (const auto& [subject, metrics] : acc[label].per_subject) {
            double a = 0, f = 0, u = 0;
            for (const auto& m : metrics) {
                a += m.accuracy;
                f += m.f1;
                u += m.auc;
            }
            const double n = static_cast<double>(metrics.size());
            accs.push_back(a / n);
            f1s.push_back(f / n);
            aucs.push_back(u / n);
        }
        const auto mean = [](const std::vector<double>& v) {
            double s = 0;
            for (double x : v) s += x;
            return s / static_cast<double>(v.size());
        };
        row.mean = {mean(accs), mean(f1s), mean(aucs)};
        row.std = {sample_std(accs, row.mean.accuracy), sample_std(f1s, row.mean.f1), sample_std(aucs, row.mean.auc)};
        row.n = accs.size();
    }

    for (const auto& [key, values] : cells) {
        double s = 0;
        for (double v : values) s += v;
        result.table.pair_accuracy.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key),
                                              std::get<4>(key), s / static_cast<double>(values.size())});
    }
}

// Paired outcome vectors of two rows. Example pairing matches held-out
// predictions by (subject, pair, onset); fold pairing matches fold accuracies
// by (subject, pair, fold). The task is deliberately not part of the key when
// ignore_task is set, which lets different modalities be paired.
std::pair<std::vector<double>, std::vector<double>> paired_outcomes(const StudyResult& result, const ResultRow& a,
                                                                    const ResultRow& b, bool by_example,
                                                                    bool ignore_task) {
    const auto matches = [&](const ResultRow& row, const std::string& task, const std::string& model,
                             const std::string& configuration) {
        return row.modality == task && row.model == model && row.configuration == configuration;
    };
    std::map<std::string, double> va, vb;
    const auto key_of = [&](const std::string& subject, const std::string& task, const std::string& pa,
                            const std::string& pb, const std::string& tail) {
        return subject + '\x1f' + (ignore_task ? std::string() : task) + '\x1f' + pa + '\x1f' + pb + '\x1f' + tail;
    };
    if (by_example) {
        for (const auto& e : result.examples) {
            char tail[40];
            std::snprintf(tail, sizeof tail, "%.9f", e.onset);
            const auto key = key_of(e.subject, e.task, e.phone_a, e.phone_b, tail);
            if (matches(a, e.task, e.model, e.configuration)) va[key] = e.correct ? 1.0 : 0.0;
            if (matches(b, e.task, e.model, e.configuration)) vb[key] = e.correct ? 1.0 : 0.0;
        }
    } else {
        for (const auto& f : result.folds) {
            const auto key = key_of(f.subject, f.task, f.phone_a, f.phone_b, std::to_string(f.fold));
            if (matches(a, f.task, f.model, f.configuration)) va[key] = f.metrics.accuracy;
            if (matches(b, f.task, f.model, f.configuration)) vb[key] = f.metrics.accuracy;
        }
    }
    std::vector<double> xa, xb;
    for (const auto& [key, value] : va) {
        const auto it = vb.find(key);
        if (it == vb.end()) continue;
        xa.push_back(value);
        xb.push_back(it->second);
    }
    return {xa, xb};
}

void finish_rows(StudyResult& result, const std::vector<std::string>& order, std::map<std::string, ResultRow>& rows) {
    for (const auto& label : order) result.table.rows.push_back(rows.at(label));
}

ModelSpec sweep_model(const ExperimentConfig& config) {
    for (const auto& m : config.models)
        if (std::holds_alternative<ElasticNetParams>(m.variant)) return m;
    return ModelSpec::preset("elastic_net");
}

nlohmann::json row_config(const std::string& row, const Variant& v) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : v.models) models.push_back(to_json(m));
    return {{"row", row}, {"configuration", v.configuration}, {"preprocessing", to_json(v.preprocessing)},
            {"models", models}};
}

}  // namespace

Recording preprocess(const Recording& raw, const Preprocessing& p) {
    Recording r = select_channels(raw, p.sensor_kinds);
    if (p.wavelet) r = wavelet_denoise(r);
    if (p.decimation_factor > 1) r = decimate(r, p.decimation_factor);
    if (p.band_limit) r = filter_recording(r, design_fir(p.band_limit->first, p.band_limit->second, r.sample_rate()));
    return r;
}

TestResult compare_paired(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("paired comparison: samples differ in length");
    bool any = false;
    for (std::size_t i = 0; i < a.size(); ++i) any = any || a[i] != b[i];
    if (!any) return TestResult{0.0, 1.0, 0, WilcoxonMethod::exact};
    return wilcoxon(a, b);
}

StudyResult run_model_comparison(const ExperimentConfig& config, const RunOptions& options) {
    validate(config);
    const auto subjects = load_subjects(config);
    const Variant variant{"baseline", config.preprocessing, config.models};
    const auto engine = run_engine(config, subjects, {variant}, options);

    StudyResult result;
    result.table.study = "model_comparison";
    result.table.alpha = config.significance;
    result.row_configs.push_back(row_config("baseline", variant));
    std::vector<std::string> order;
    std::map<std::string, ResultRow> rows;
    collect(result, subjects, {variant}, engine,
            [](const std::string& task, const std::string& model, const std::string&) { return task + "/" + model; },
            order, rows);
    finish_rows(result, order, rows);

    if (result.table.rows.size() > 1) {
        result.table.significance_column = true;
        // Best row per modality, first on ties.
        std::map<std::string, std::size_t> best;
        for (std::size_t i = 0; i < result.table.rows.size(); ++i) {
            const auto& row = result.table.rows[i];
            const auto it = best.find(row.modality);
            if (it == best.end() || row.mean.accuracy > result.table.rows[it->second].mean.accuracy)
                best[row.modality] = i;
        }
        for (auto& row : result.table.rows) {
            const auto& ref = result.table.rows[best.at(row.modality)];
            if (&ref == &row) continue;
            const auto [x, y] = paired_outcomes(result, ref, row, config.pairing == "example", false);
            row.compared_to = ref.model;
            if (!x.empty()) row.test = compare_paired(x, y);
        }
    }
    return result;
}

StudyResult run_task_comparison(const ExperimentConfig& config, const RunOptions& options) {
    validate(config);
    const auto subjects = load_subjects(config);
    std::set<Task> tasks;
    for (const auto& s : subjects) tasks.insert(s.manifest.task);
    if (tasks.size() < 2) throw ConfigError("need two modalities to compare");

    const Variant variant{"baseline", config.preprocessing, {config.models.front()}};
    const auto engine = run_engine(config, subjects, {variant}, options);

    StudyResult result;
    result.table.study = "task_comparison";
    result.table.alpha = config.significance;
    result.table.significance_column = true;
    result.row_configs.push_back(row_config("baseline", variant));
    std::vector<std::string> order;
    std::map<std::string, ResultRow> rows;
    collect(result, subjects, {variant}, engine,
            [](const std::string& task, const std::string&, const std::string&) { return task; }, order, rows);
    // Modalities in enum order rather than manifest order.
    std::sort(order.begin(), order.end(),
              [](const std::string& a, const std::string& b) { return parse_task(a) < parse_task(b); });
    finish_rows(result, order, rows);

    const auto& table_rows = result.table.rows;
    for (std::size_t i = 0; i < table_rows.size(); ++i) {
        for (std::size_t j = i + 1; j < table_rows.size(); ++j) {
            const auto [x, y] = paired_outcomes(result, table_rows[i], table_rows[j], false, true);
            if (x.empty()) continue;
            result.table.comparisons.push_back({table_rows[i].modality, table_rows[j].modality, compare_paired(x, y)});
        }
    }
    for (const auto& row : table_rows) {
        std::vector<double> acc;
        for (const auto& f : result.folds)
            if (f.task == row.modality) acc.push_back(f.metrics.accuracy);
        const std::vector<double> chance(acc.size(), 0.5);
        result.table.comparisons.push_back({row.modality, "chance", compare_paired(acc, chance)});
    }
    return result;
}

StudyResult run_band_sweep(const ExperimentConfig& config, const RunOptions& options) {
    validate(config);
    const auto subjects = load_subjects(config);
    const ModelSpec model = sweep_model(config);
    double min_fs = std::numeric_limits<double>::infinity();
    for (const auto& s : subjects) min_fs = std::min(min_fs, s.raw.sample_rate());

    Preprocessing minimal = config.preprocessing;
    minimal.wavelet = false;
    minimal.decimation_factor = 1;
    minimal.band_limit.reset();
    std::vector<Variant> variants{{"Baseline", minimal, {model}}};
    for (const auto& band : canonical_bands()) {
        if (band.hi >= 0.5 * min_fs) {
            warn("band sweep: skipping " + std::string(band.name) + ", its upper edge reaches Nyquist");
            continue;
        }
        Preprocessing p = minimal;
        p.band_limit = std::make_pair(band.lo, band.hi);
        variants.push_back({std::string(band.name), p, {model}});
    }
    const auto engine = run_engine(config, subjects, variants, options);

    StudyResult result;
    result.table.study = "band_sweep";
    result.table.alpha = config.significance;
    result.table.significance_column = true;
    for (const auto& v : variants) result.row_configs.push_back(row_config(v.configuration, v));
    std::vector<std::string> order;
    std::map<std::string, ResultRow> rows;
    collect(result, subjects, variants, engine,
            [](const std::string& task, const std::string&, const std::string& configuration) {
                return task + "/" + configuration;
            },
            order, rows);
    finish_rows(result, order, rows);
    for (auto& row : result.table.rows) {
        if (row.configuration == "Baseline") continue;
        const auto& base = rows.at(row.modality + "/Baseline");
        const auto [x, y] = paired_outcomes(result, base, row, config.pairing == "example", false);
        row.compared_to = "Baseline";
        if (!x.empty()) row.test = compare_paired(x, y);
    }
    return result;
}

const std::vector<std::string>& ablation_row_ids() {
    static const std::vector<std::string> ids = {"baseline",   "magnetometers_only", "both_sensors", "no_wavelet",
                                                 "no_decimation", "no_l1",           "no_l2",        "no_beta_filter"};
    return ids;
}

StudyResult run_ablation(const ExperimentConfig& config, const RunOptions& options) {
    validate(config);
    for (const auto& id : config.ablation_rows)
        if (std::find(ablation_row_ids().begin(), ablation_row_ids().end(), id) == ablation_row_ids().end())
            throw ConfigError("ablation: unknown row '" + id + "'");
    const auto subjects = load_subjects(config);
    const ModelSpec base_model = sweep_model(config);
    const Preprocessing base = config.preprocessing;

    const auto with_l1_ratio = [&](double ratio) {
        ModelSpec m = base_model;
        std::get<ElasticNetParams>(m.variant).l1_ratio = ratio;
        return m;
    };
    std::vector<std::pair<std::string, Variant>> all;
    all.push_back({"baseline", {"Full Model (baseline)", base, {base_model}}});
    {
        Preprocessing p = base;
        p.sensor_kinds = {ChannelKind::magnetometer};
        all.push_back({"magnetometers_only", {"Magn. sensors only", p, {base_model}}});
        p.sensor_kinds = {ChannelKind::gradiometer, ChannelKind::magnetometer};
        all.push_back({"both_sensors", {"Magn.+Grad. sensors", p, {base_model}}});
    }
    {
        Preprocessing p = base;
        p.wavelet = false;
        all.push_back({"no_wavelet", {"No wavelets filter", p, {base_model}}});
    }
    {
        Preprocessing p = base;
        p.decimation_factor = 1;
        all.push_back({"no_decimation", {"No decimation", p, {base_model}}});
    }
    all.push_back({"no_l1", {"No L1 (Ridge)", base, {with_l1_ratio(0.0)}}});
    all.push_back({"no_l2", {"No L2 (Lasso)", base, {with_l1_ratio(1.0)}}});
    {
        Preprocessing p = base;
        p.band_limit.reset();
        all.push_back({"no_beta_filter", {"No Beta filter (<=31 Hz)", p, {base_model}}});
    }

    std::vector<Variant> variants;
    StudyResult result;
    for (const auto& [id, v] : all) {
        const bool wanted = id == "baseline" || config.ablation_rows.empty() ||
                            std::find(config.ablation_rows.begin(), config.ablation_rows.end(), id) !=
                                config.ablation_rows.end();
        if (!wanted) continue;
        variants.push_back(v);
        result.row_configs.push_back(row_config(id, v));
    }
    const auto engine = run_engine(config, subjects, variants, options);

    result.table.study = "ablation";
    result.table.alpha = config.significance;
    result.table.significance_column = variants.size() > 1;
    std::vector<std::string> order;
    std::map<std::string, ResultRow> rows;
    collect(result, subjects, variants, engine,
            [](const std::string& task, const std::string&, const std::string& configuration) {
                return task + "/" + configuration;
            },
            order, rows);
    finish_rows(result, order, rows);
    const std::string base_label = variants.front().configuration;
    for (auto& row : result.table.rows) {
        if (row.configuration == base_label) continue;
        const auto& ref = rows.at(row.modality + "/" + base_label);
        const auto [x, y] = paired_outcomes(result, ref, row, config.pairing == "example", false);
        row.compared_to = base_label;
        if (!x.empty()) row.test = compare_paired(x, y);
    }
    return result;
}

}  // namespace megphone
