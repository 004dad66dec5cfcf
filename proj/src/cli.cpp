#include "megphone/cli.hpp"

#include "megphone/align.hpp"
#include "megphone/config.hpp"
#include "megphone/epochs.hpp"
#include "megphone/error.hpp"
#include "megphone/report.hpp"
#include "megphone/study.hpp"
#include "megphone/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace megphone {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::string what = "tables";  // report only
};

json read_config_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
}

fs::path config_dir(const std::string& path) { return fs::absolute(path).parent_path(); }

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path = p;
    return (path.is_relative() ? base / path : path).lexically_normal();
}

fs::path require_out(const Options& o, const fs::path& fallback = {}) {
    if (!o.out.empty()) return o.out;
    if (!fallback.empty()) return fallback;
    throw ConfigError("--out is required");
}

// -- synth ------------------------------------------------------------------

struct CorpusEntry {
    std::string name, subject_id;
    Task task = Task::production;
    SynthSpec spec;
};

CorpusEntry corpus_entry(json j, std::size_t index) {
    if (!j.is_object()) throw ConfigError("synth: corpus entries must be objects");
    CorpusEntry e;
    try {
        e.name = j.value("name", index == 0 ? std::string("synth") : "synth" + std::to_string(index));
        e.subject_id = j.value("subject_id", e.name);
        const auto task = j.value("task", std::string("production"));
        try {
            e.task = parse_task(task);
        } catch (const std::exception&) {
            throw ConfigError("synth: unknown task '" + task + "'");
        }
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("synth: ") + ex.what());
    }
    j.erase("name");
    j.erase("subject_id");
    j.erase("task");
    if (e.name.empty() || e.name.find_first_of("/\\") != std::string::npos)
        throw ConfigError("synth: invalid name '" + e.name + "'");
    e.spec = synth_spec_from_json(j);
    return e;
}

int cmd_synth(const Options& o, std::ostream& out) {
    const json j = read_config_json(o.config);
    std::vector<CorpusEntry> entries;
    if (j.is_object() && j.contains("corpus")) {
        if (j.size() != 1 || !j.at("corpus").is_array())
            throw ConfigError("synth: 'corpus' must be the only field and hold a list");
        for (std::size_t i = 0; i < j.at("corpus").size(); ++i) entries.push_back(corpus_entry(j.at("corpus")[i], i));
    } else {
        entries.push_back(corpus_entry(j, 0));
    }
    if (entries.empty()) throw ConfigError("synth: empty corpus");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (o.seed) entries[i].spec.seed = *o.seed + i;
        for (std::size_t k = 0; k < i; ++k)
            if (entries[k].name == entries[i].name) throw ConfigError("synth: duplicate name '" + entries[i].name + "'");
    }

    const fs::path dir = require_out(o);
    json echo = json::array();
    for (const auto& e : entries) {
        const auto [recording, events] = generate(e.spec);
        const fs::path rec_path = dir / (e.name + ".nrd");
        const fs::path ev_path = dir / (e.name + ".events.tsv");
        fs::create_directories(dir);
        save_recording(recording, rec_path);
        save_events(events, ev_path);
        save_manifest({e.subject_id, e.task, rec_path, ev_path, recording.sample_rate()},
                      dir / (e.name + ".manifest.json"));
        json spec = to_json(e.spec);
        spec["name"] = e.name;
        spec["subject_id"] = e.subject_id;
        spec["task"] = std::string(to_string(e.task));
        echo.push_back(spec);
        out << (dir / (e.name + ".manifest.json")).string() << '\n';
    }
    write_text(dir / "config.json", json{{"corpus", echo}}.dump(2) + "\n");
    return 0;
}

// -- align ------------------------------------------------------------------

std::vector<double> channel_samples(const fs::path& base, const json& j, double& fs_out) {
    const auto recording = load_recording(resolve(base, j.at("recording").get<std::string>()));
    const auto span = recording.channel(recording.channel_index(j.at("channel").get<std::string>()));
    fs_out = recording.sample_rate();
    return {span.begin(), span.end()};
}

int cmd_align(const Options& o, std::ostream& out) {
    const json j = read_config_json(o.config);
    const fs::path base = config_dir(o.config);
    double fs_misc = 0, fs_audio = 0, window = 0;
    std::vector<double> misc, audio;
    AlignOptions options;
    json echo;
    try {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.key() != "misc" && it.key() != "audio" && it.key() != "window" && it.key() != "stages" &&
                it.key() != "initial_cutoff" && it.key() != "min_confidence")
                throw ConfigError("align: unknown field '" + it.key() + "'");
        window = j.at("window").get<double>();
        options.stages = j.value("stages", options.stages);
        options.initial_cutoff = j.value("initial_cutoff", options.initial_cutoff);
        options.min_confidence = j.value("min_confidence", options.min_confidence);
        for (const char* key : {"misc", "audio"}) {
            const auto& s = j.at(key);
            echo[key] = {{"recording", resolve(base, s.at("recording").get<std::string>()).string()},
                         {"channel", s.at("channel").get<std::string>()}};
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("align: ") + e.what());
    }
    misc = channel_samples(base, j.at("misc"), fs_misc);
    audio = channel_samples(base, j.at("audio"), fs_audio);
    if (fs_misc != fs_audio) throw DataError("align: MISC and audio recordings differ in sample rate");

    const auto result = align(misc, audio, fs_misc, window, options);
    json stages = json::array();
    for (const auto& s : result.iterations)
        stages.push_back({{"window", {s.window_lo, s.window_hi}},
                          {"delay_window", s.delay_window},
                          {"band_hi", s.band_hi},
                          {"delay", s.delay_estimate},
                          {"correlation", s.correlation}});
    const json doc = {{"delay", result.delay},
                      {"peak_correlation", result.peak_correlation},
                      {"low_confidence", result.low_confidence},
                      {"iterations", stages}};
    out << doc.dump(2) << '\n';
    if (result.low_confidence) warn("align: peak correlation below " + std::to_string(options.min_confidence));
    if (!o.out.empty()) {
        echo["window"] = window;
        echo["stages"] = options.stages;
        echo["initial_cutoff"] = options.initial_cutoff;
        echo["min_confidence"] = options.min_confidence;
        write_text(fs::path(o.out) / "alignment.json", doc.dump(2) + "\n");
        write_text(fs::path(o.out) / "config.json", echo.dump(2) + "\n");
    }
    return 0;
}

// -- experiment configs -----------------------------------------------------

ExperimentConfig experiment_config(const Options& o) {
    ExperimentConfig c = config_from_json(read_config_json(o.config), config_dir(o.config));
    if (o.seed) c.seed = c.cv_seed = *o.seed;
    return c;
}

int cmd_preprocess(const Options& o, std::ostream& out) {
    const ExperimentConfig c = experiment_config(o);
    const fs::path dir = require_out(o, c.output_dir);
    fs::create_directories(dir);
    for (const auto& path : c.manifests) {
        const Manifest m = load_manifest(path);
        const Recording clean = preprocess(load_recording(m.recording_path), c.preprocessing);
        const std::string stem = m.subject_id + "_" + std::string(to_string(m.task));
        save_recording(clean, dir / (stem + ".nrd"));
        save_events(load_events(m.events_path), dir / (stem + ".events.tsv"));
        save_manifest({m.subject_id, m.task, dir / (stem + ".nrd"), dir / (stem + ".events.tsv"), clean.sample_rate()},
                      dir / (stem + ".manifest.json"));
        out << (dir / (stem + ".manifest.json")).string() << '\n';
    }
    write_text(dir / "config.json", to_json(c).dump(2) + "\n");
    return 0;
}

template <class Study>
int cmd_study(const Options& o, std::ostream& out, Study&& study) {
    const ExperimentConfig c = experiment_config(o);
    const fs::path dir = require_out(o, c.output_dir);
    const StudyResult result = study(c, RunOptions{o.jobs});
    write_study(result, c, dir);
    out << table_markdown(result.table);
    return 0;
}

// -- report -----------------------------------------------------------------

int cmd_report(const Options& o, std::ostream& out) {
    const json j = read_config_json(o.config);
    const fs::path base = config_dir(o.config);
    const fs::path dir = require_out(o);
    json echo;
    try {
        if (o.what == "phones") {
            PhoneInventory total;
            const auto min_count = j.value("min_count", kDefaultMinCount);
            echo["manifests"] = json::array();
            for (const auto& m : j.at("manifests")) {
                const auto path = resolve(base, m.get<std::string>());
                echo["manifests"].push_back(path.string());
                const auto inventory = count_phones(load_events(load_manifest(path).events_path), min_count);
                for (const auto& [label, count] : inventory.counts) total.counts[label] += count;
            }
            echo["min_count"] = min_count;
            const auto csv = phone_inventory_csv(total);
            write_text(dir / "phones.csv", csv);
            out << csv;
        } else {
            const auto& results = j.at("results");
            if (!results.is_array() || results.empty()) throw ConfigError("report: 'results' must be a non-empty list");
            echo["results"] = json::array();
            for (std::size_t i = 0; i < results.size(); ++i) {
                const auto path = resolve(base, results[i].get<std::string>());
                echo["results"].push_back(path.string());
                std::ifstream in(path);
                if (!in) throw DataError("cannot open results file " + path.string());
                json doc;
                try {
                    doc = json::parse(in);
                } catch (const json::exception& e) {
                    throw DataError("results file " + path.string() + " is not valid JSON: " + e.what());
                }
                const ResultTable table = result_table_from_json(doc);
                const fs::path target = results.size() == 1 ? dir : dir / (std::to_string(i) + "_" + table.study);
                write_report(table, target);
                out << table_markdown(table);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("report: ") + e.what());
    }
    write_text(dir / "config.json", echo.dump(2) + "\n");
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"MEG phone-pair decoding pipeline", "megphone"};
    app.require_subcommand(1);
    Options o;

    const auto add = [&](const std::string& name, const std::string& description) {
        auto* sub = app.add_subcommand(name, description);
        sub->add_option("--config", o.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", o.seed, "seed override");
        sub->add_option("--jobs", o.jobs, "parallel work units")->check(CLI::PositiveNumber);
        return sub;
    };
    auto* synth = add("synth", "generate a synthetic corpus");
    auto* align_cmd = add("align", "estimate the MISC/audio delay");
    auto* prep = add("preprocess", "write preprocessed recordings");
    auto* models = add("run-models", "model comparison");
    auto* tasks = add("run-tasks", "modality comparison");
    auto* bands = add("sweep-bands", "frequency band sweep");
    auto* ablate = add("ablate", "ablation study");
    auto* report = add("report", "render tables from results.json files, or a phone inventory");
    report->add_option("what", o.what, "tables or phones")->check(CLI::IsMember({"tables", "phones"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
            err << sub->help();
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(o, out);
        if (align_cmd->parsed()) return cmd_align(o, out);
        if (prep->parsed()) return cmd_preprocess(o, out);
        if (models->parsed()) return cmd_study(o, out, run_model_comparison);
        if (tasks->parsed()) return cmd_study(o, out, run_task_comparison);
        if (bands->parsed()) return cmd_study(o, out, run_band_sweep);
        if (ablate->parsed()) return cmd_study(o, out, run_ablation);
        if (report->parsed()) return cmd_report(o, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace megphone
