#include "megphone/report.hpp"

#include "megphone/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace megphone {

namespace {

std::string fmt(const char* pattern, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, value);
    return buf;
}

std::string method_name(WilcoxonMethod m) { return m == WilcoxonMethod::exact ? "exact" : "normal_approx"; }

WilcoxonMethod parse_method(const std::string& s) {
    if (s == "exact") return WilcoxonMethod::exact;
    if (s == "normal_approx") return WilcoxonMethod::normal_approx;
    throw DataError("unknown test method '" + s + "'");
}

nlohmann::json to_json(const MetricSet& m) { return {{"accuracy", m.accuracy}, {"f1", m.f1}, {"auc", m.auc}}; }
MetricSet metric_set_from_json(const nlohmann::json& j) {
    return {j.at("accuracy").get<double>(), j.at("f1").get<double>(), j.at("auc").get<double>()};
}

nlohmann::json to_json(const TestResult& t) {
    return {{"W", t.W}, {"p", t.p}, {"n_effective", t.n_effective}, {"method", method_name(t.method)}};
}
TestResult test_from_json(const nlohmann::json& j) {
    return {j.at("W").get<double>(), j.at("p").get<double>(), j.at("n_effective").get<int>(),
            parse_method(j.at("method").get<std::string>())};
}

// Quotes a CSV field when it holds a delimiter, quote or newline.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void require_rows(const ResultTable& table) {
    if (table.rows.empty()) throw DataError("report: result table '" + table.study + "' has no rows");
}

std::string slug(const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            out += static_cast<char>(std::tolower(c));
        } else if (!out.empty() && out.back() != '_') {
            out += '_';
        }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

}  // namespace

std::string format_mean_std(double mean, double std) {
    return fmt("%.1f", 100.0 * mean) + " ± " + fmt("%.1f", 100.0 * std);
}

nlohmann::json to_json(const ResultTable& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : table.rows) {
        nlohmann::json row = {{"modality", r.modality},       {"model", r.model},     {"configuration", r.configuration},
                              {"mean", to_json(r.mean)},      {"std", to_json(r.std)}, {"n", r.n},
                              {"compared_to", r.compared_to}, {"test", nullptr}};
        if (r.test) row["test"] = to_json(*r.test);
        rows.push_back(row);
    }
    nlohmann::json comparisons = nlohmann::json::array();
    for (const auto& c : table.comparisons) comparisons.push_back({{"a", c.a}, {"b", c.b}, {"test", to_json(c.test)}});
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : table.pair_accuracy)
        cells.push_back({{"modality", c.modality},
                         {"model", c.model},
                         {"configuration", c.configuration},
                         {"phone_a", c.phone_a},
                         {"phone_b", c.phone_b},
                         {"accuracy", c.accuracy}});
    return {{"format", "megphone-results"},
            {"version", 1},
            {"study", table.study},
            {"alpha", table.alpha},
            {"significance_column", table.significance_column},
            {"rows", rows},
            {"comparisons", comparisons},
            {"pair_accuracy", cells}};
}

ResultTable result_table_from_json(const nlohmann::json& j) {
    ResultTable t;
    try {
        if (j.at("format").get<std::string>() != "megphone-results" || j.at("version").get<int>() != 1)
            throw DataError("not a version 1 results document");
        t.study = j.at("study").get<std::string>();
        t.alpha = j.at("alpha").get<double>();
        t.significance_column = j.at("significance_column").get<bool>();
        for (const auto& r : j.at("rows")) {
            ResultRow row;
            row.modality = r.at("modality").get<std::string>();
            row.model = r.at("model").get<std::string>();
            row.configuration = r.at("configuration").get<std::string>();
            row.mean = metric_set_from_json(r.at("mean"));
            row.std = metric_set_from_json(r.at("std"));
            row.n = r.at("n").get<std::size_t>();
            row.compared_to = r.at("compared_to").get<std::string>();
            if (!r.at("test").is_null()) row.test = test_from_json(r.at("test"));
            t.rows.push_back(row);
        }
        for (const auto& c : j.at("comparisons"))
            t.comparisons.push_back({c.at("a").get<std::string>(), c.at("b").get<std::string>(),
                                     test_from_json(c.at("test"))});
        for (const auto& c : j.at("pair_accuracy"))
            t.pair_accuracy.push_back({c.at("modality").get<std::string>(), c.at("model").get<std::string>(),
                                       c.at("configuration").get<std::string>(), c.at("phone_a").get<std::string>(),
                                       c.at("phone_b").get<std::string>(), c.at("accuracy").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed results document: ") + e.what());
    }
    return t;
}

std::string table_csv(const ResultTable& table) {
    require_rows(table);
    std::ostringstream out;
    out << "modality,model,configuration,accuracy_mean,accuracy_std,f1_mean,f1_std,auc_mean,auc_std,n";
    if (table.significance_column) out << ",compared_to,W,p,n_effective,method,significant";
    out << '\n';
    for (const auto& r : table.rows) {
        out << csv_field(r.modality) << ',' << csv_field(r.model) << ',' << csv_field(r.configuration);
        for (double v : {r.mean.accuracy, r.std.accuracy, r.mean.f1, r.std.f1, r.mean.auc, r.std.auc})
            out << ',' << fmt("%.6f", v);
        out << ',' << r.n;
        if (table.significance_column) {
            out << ',' << csv_field(r.compared_to);
            if (r.test)
                out << ',' << fmt("%.1f", r.test->W) << ',' << fmt("%.6g", r.test->p) << ',' << r.test->n_effective
                    << ',' << method_name(r.test->method) << ',' << (r.test->p < table.alpha ? "yes" : "no");
            else
                out << ",,,,,";
        }
        out << '\n';
    }
    return out.str();
}

std::string table_markdown(const ResultTable& table) {
    require_rows(table);
    std::ostringstream out;
    out << "| Modality | Model | Configuration | Accuracy (%) | F1 (%) | AUC (%) | n |";
    if (table.significance_column) out << " vs | W | p |";
    out << "\n|---|---|---|---|---|---|---|";
    if (table.significance_column) out << "---|---|---|";
    out << '\n';
    for (const auto& r : table.rows) {
        out << "| " << r.modality << " | " << r.model << " | " << r.configuration << " | "
            << format_mean_std(r.mean.accuracy, r.std.accuracy) << " | " << format_mean_std(r.mean.f1, r.std.f1)
            << " | " << format_mean_std(r.mean.auc, r.std.auc) << " | " << r.n << " |";
        if (table.significance_column) {
            if (r.test)
                out << ' ' << r.compared_to << " | " << fmt("%.1f", r.test->W) << " | " << fmt("%.3g", r.test->p)
                    << (r.test->p < table.alpha ? "*" : "") << " |";
            else
                out << " - | - | - |";
        }
        out << '\n';
    }
    if (!table.comparisons.empty()) {
        out << "\n| A | B | W | p | n |\n|---|---|---|---|---|\n";
        for (const auto& c : table.comparisons)
            out << "| " << c.a << " | " << c.b << " | " << fmt("%.1f", c.test.W) << " | " << fmt("%.3g", c.test.p)
                << (c.test.p < table.alpha ? "*" : "") << " | " << c.test.n_effective << " |\n";
    }
    if (table.significance_column || !table.comparisons.empty())
        out << "\n\\* p < " << fmt("%g", table.alpha) << " (two-sided Wilcoxon signed-rank)\n";
    return out.str();
}

std::string folds_csv(const std::vector<FoldRecord>& folds) {
    std::ostringstream out;
    out << "subject,task,pair,model,configuration,fold,accuracy,f1,auc\n";
    for (const auto& f : folds)
        out << csv_field(f.subject) << ',' << f.task << ',' << csv_field(f.phone_a + "-" + f.phone_b) << ','
            << csv_field(f.model) << ',' << csv_field(f.configuration) << ',' << f.fold << ','
            << fmt("%.6f", f.metrics.accuracy) << ',' << fmt("%.6f", f.metrics.f1) << ',' << fmt("%.6f", f.metrics.auc)
            << '\n';
    return out.str();
}

std::string examples_csv(const std::vector<ExampleRecord>& examples) {
    std::ostringstream out;
    out << "subject,task,pair,model,configuration,onset,fold,score,correct\n";
    for (const auto& e : examples)
        out << csv_field(e.subject) << ',' << e.task << ',' << csv_field(e.phone_a + "-" + e.phone_b) << ','
            << csv_field(e.model) << ',' << csv_field(e.configuration) << ',' << fmt("%.6f", e.onset) << ',' << e.fold
            << ',' << fmt("%.9f", e.score) << ',' << (e.correct ? 1 : 0) << '\n';
    return out.str();
}

std::vector<PairMatrix> pair_matrices(const ResultTable& table) {
    using Key = std::tuple<std::string, std::string, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<const PairCell*>> groups;
    for (const auto& c : table.pair_accuracy) {
        Key key{c.modality, c.model, c.configuration};
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(&c);
    }
    std::vector<PairMatrix> out;
    for (const auto& key : order) {
        PairMatrix m{std::get<0>(key), std::get<1>(key), std::get<2>(key), {}, {}};
        std::set<std::string> phones;
        for (const auto* c : groups[key]) {
            phones.insert(c->phone_a);
            phones.insert(c->phone_b);
        }
        m.phones.assign(phones.begin(), phones.end());
        const auto n = m.phones.size();
        m.accuracy.assign(n, std::vector<double>(n, std::numeric_limits<double>::quiet_NaN()));
        const auto index = [&](const std::string& p) {
            return static_cast<std::size_t>(std::lower_bound(m.phones.begin(), m.phones.end(), p) - m.phones.begin());
        };
        for (const auto* c : groups[key]) {
            const auto i = index(c->phone_a), j = index(c->phone_b);
            if (i == j) continue;
            m.accuracy[i][j] = m.accuracy[j][i] = c->accuracy;
        }
        out.push_back(std::move(m));
    }
    return out;
}

std::string pair_matrix_csv(const PairMatrix& m) {
    std::ostringstream out;
    out << "phone";
    for (const auto& p : m.phones) out << ',' << csv_field(p);
    out << '\n';
    for (std::size_t i = 0; i < m.phones.size(); ++i) {
        out << csv_field(m.phones[i]);
        for (std::size_t j = 0; j < m.phones.size(); ++j) {
            out << ',';
            if (!std::isnan(m.accuracy[i][j])) out << fmt("%.4f", m.accuracy[i][j]);
        }
        out << '\n';
    }
    return out.str();
}

std::string pair_matrix_filename(const PairMatrix& m) {
    return "pair_matrix_" + slug(m.modality) + "_" + slug(m.model) + "_" + slug(m.configuration) + ".csv";
}

std::string phone_inventory_csv(const PhoneInventory& inventory) {
    std::vector<std::pair<std::string, std::size_t>> rows(inventory.counts.begin(), inventory.counts.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::ostringstream out;
    out << "label,count\n";
    for (const auto& [label, count] : rows) out << csv_field(label) << ',' << count << '\n';
    return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw DataError("write failed for " + path.string());
}

void write_report(const ResultTable& table, const std::filesystem::path& dir) {
    const auto csv = table_csv(table);
    const auto md = table_markdown(table);
    write_text(dir / "table.csv", csv);
    write_text(dir / "table.md", md);
    write_text(dir / "results.json", to_json(table).dump(2) + "\n");
    for (const auto& m : pair_matrices(table)) write_text(dir / pair_matrix_filename(m), pair_matrix_csv(m));
}

void write_study(const StudyResult& result, const ExperimentConfig& config, const std::filesystem::path& dir) {
    write_text(dir / "config.json", to_json(config).dump(2) + "\n");
    write_text(dir / "row_configs.json", result.row_configs.dump(2) + "\n");
    write_text(dir / "folds.csv", folds_csv(result.folds));
    write_text(dir / "examples.csv", examples_csv(result.examples));
    write_report(result.table, dir);
}

}  // namespace megphone
