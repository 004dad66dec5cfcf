#include <doctest.h>

#include "megphone/epochs.hpp"
#include "megphone/error.hpp"
#include "support.hpp"

#include <map>
#include <set>

using namespace megphone;
using megphone::testing::Gen;

namespace {

Recording constant_recording(int channels, int samples, double fs, float value) {
    std::vector<ChannelInfo> info;
    for (int c = 0; c < channels; ++c) info.push_back({"MEG" + std::to_string(c), ChannelKind::gradiometer, "T/m"});
    SampleMatrix data = SampleMatrix::Constant(channels, samples, value);
    return Recording(fs, std::move(info), std::move(data));
}

Recording random_recording(Gen& gen, int channels, int samples, double fs) {
    std::vector<ChannelInfo> info;
    for (int c = 0; c < channels; ++c) info.push_back({"MEG" + std::to_string(c), ChannelKind::gradiometer, "T/m"});
    SampleMatrix data(channels, samples);
    for (int c = 0; c < channels; ++c)
        for (int t = 0; t < samples; ++t) data(c, t) = static_cast<float>(gen.normal());
    return Recording(fs, std::move(info), std::move(data));
}

std::vector<Epoch> labelled_epochs(const std::map<std::string, int>& counts) {
    std::vector<Epoch> out;
    double onset = 0.0;
    for (const auto& [label, n] : counts)
        for (int i = 0; i < n; ++i) {
            Epoch e;
            e.data = Eigen::MatrixXd::Constant(2, 3, onset);
            e.label = label;
            e.onset = onset;
            onset += 1.0;
            out.push_back(std::move(e));
        }
    return out;
}

}  // namespace

TEST_CASE("phone inventory") {
    const EventTable events({{0.1, 0.2, "a"}, {0.3, 0.4, "a"}, {0.5, 0.6, "e"}});
    auto inv = count_phones(events, 1);
    CHECK(inv.counts == std::map<std::string, std::size_t>{{"a", 2}, {"e", 1}});
    CHECK(inv.selected == std::vector<std::string>{"a", "e"});
    inv = count_phones(events, 2);
    CHECK(inv.selected == std::vector<std::string>{"a"});
    inv = count_phones(EventTable{}, 1);
    CHECK(inv.counts.empty());
    CHECK(inv.selected.empty());
}

TEST_CASE("inventory order is descending count then label") {
    std::vector<Event> rows;
    double t = 0;
    for (auto [label, n] : std::vector<std::pair<std::string, int>>{{"z", 3}, {"b", 5}, {"c", 3}, {"a", 1}})
        for (int i = 0; i < n; ++i, t += 1) rows.push_back({t, t + 0.1, label});
    const auto inv = count_phones(EventTable(rows), 1);
    CHECK(inv.selected == std::vector<std::string>{"b", "c", "z", "a"});
}

TEST_CASE("epoch length uses inclusive endpoints") {
    CHECK(epoch_length(100.0, -0.1, 0.2) == 31);
    CHECK(epoch_length(1000.0, -0.1, 0.2) == 301);
}

TEST_CASE("constant channels give zero epochs") {
    const auto rec = constant_recording(3, 500, 100.0, 5.0f);
    const EventTable events({{1.0, 1.1, "a"}, {2.0, 2.1, "e"}});
    const auto set = extract_epochs(rec, events);
    REQUIRE(set.epochs.size() == 2);
    for (const auto& e : set.epochs) {
        CHECK(e.data.rows() == 3);
        CHECK(e.data.cols() == 31);
        CHECK(e.data.isZero(0.0));
    }
}

TEST_CASE("windows leaving the recording are skipped") {
    const auto rec = constant_recording(1, 300, 100.0, 1.0f);
    const EventTable events({{0.05, 0.1, "a"}, {1.0, 1.1, "a"}, {2.85, 2.9, "e"}});
    const auto set = extract_epochs(rec, events);
    CHECK(set.epochs.size() == 1);
    CHECK(set.skipped == 2);
    CHECK(set.epochs[0].onset == 1.0);
    CHECK_THROWS_AS(extract_epochs(rec, events, 0.2, 0.1), ConfigError);
}

TEST_CASE("baseline correction subtracts the pre-onset mean") {
    std::vector<ChannelInfo> info{{"MEG0", ChannelKind::gradiometer, "T/m"}};
    SampleMatrix data(1, 100);
    for (int t = 0; t < 100; ++t) data(0, t) = static_cast<float>(t);
    const Recording rec(10.0, info, data);
    // onset at sample 50, window 48..52, pre-onset samples 48 and 49 -> mean 48.5
    const auto set = extract_epochs(rec, EventTable({{5.0, 5.1, "a"}}), -0.2, 0.2);
    REQUIRE(set.epochs.size() == 1);
    const Eigen::RowVectorXd expect = (Eigen::RowVectorXd(5) << -0.5, 0.5, 1.5, 2.5, 3.5).finished();
    CHECK(set.epochs[0].data.row(0).isApprox(expect));
}

TEST_CASE("adding channel offsets leaves epochs unchanged") {
    Gen gen(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto rec = random_recording(gen, 4, 400, 100.0);
        SampleMatrix shifted = rec.data();
        for (int c = 0; c < 4; ++c) shifted.row(c).array() += static_cast<float>(gen.integer(-3, 3));
        const Recording rec2(100.0, rec.channels(), shifted);
        const EventTable events({{0.5, 0.6, "a"}, {1.7, 1.8, "e"}, {3.0, 3.1, "a"}});
        const auto a = extract_epochs(rec, events);
        const auto b = extract_epochs(rec2, events);
        REQUIRE(a.epochs.size() == b.epochs.size());
        for (std::size_t i = 0; i < a.epochs.size(); ++i) CHECK(a.epochs[i].data.isApprox(b.epochs[i].data, 1e-5));
    }
}

TEST_CASE("flatten and unflatten are inverse") {
    Gen gen(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = gen.matrix(gen.integer(1, 9), gen.integer(1, 40));
        const auto row = flatten_epoch(m);
        CHECK(row.size() == m.size());
        for (Eigen::Index c = 0; c < m.rows(); ++c)
            for (Eigen::Index t = 0; t < m.cols(); ++t) CHECK(row(c * m.cols() + t) == m(c, t));
        CHECK(unflatten_epoch(row, m.rows(), m.cols()) == m);
    }
    CHECK_THROWS_AS(unflatten_epoch(Eigen::VectorXd::Zero(5), 2, 3), DataError);
}

TEST_CASE("pair datasets are balanced and seeded") {
    const auto epochs = labelled_epochs({{"a", 80}, {"e", 50}, {"i", 7}});
    const auto ds = build_pair_dataset(epochs, "e", "a", 17);
    CHECK(ds.pair == std::make_pair(std::string("a"), std::string("e")));
    CHECK(ds.n_rows() == 100);
    CHECK(std::count(ds.y.begin(), ds.y.end(), 0) == 50);
    CHECK(std::count(ds.y.begin(), ds.y.end(), 1) == 50);
    CHECK(ds.X.rows() == 100);
    CHECK(ds.X.cols() == 6);
    CHECK(ds.onsets.size() == 100);
    // Every row is its source epoch and its label matches.
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        const auto& src = epochs[static_cast<std::size_t>(ds.onsets[i])];
        CHECK(ds.X(static_cast<Eigen::Index>(i), 0) == src.data(0, 0));
        CHECK((src.label == "a" ? 0 : 1) == ds.y[i]);
    }

    const auto again = build_pair_dataset(epochs, "e", "a", 17);
    CHECK(again.X == ds.X);
    CHECK(again.y == ds.y);
    CHECK(build_pair_dataset(epochs, "a", "e", 18).onsets != ds.onsets);

    const auto balanced = labelled_epochs({{"a", 50}, {"e", 50}});
    const auto full = build_pair_dataset(balanced, "a", "e", 1);
    std::set<double> onsets(full.onsets.begin(), full.onsets.end());
    CHECK(onsets.size() == 100);

    CHECK_THROWS_AS(build_pair_dataset(epochs, "a", "u", 1), DataError);
}

TEST_CASE("balancing never grows a class") {
    Gen gen(5);
    for (int trial = 0; trial < 30; ++trial) {
        const int na = gen.integer(1, 40), nb = gen.integer(1, 40);
        const auto epochs = labelled_epochs({{"p", na}, {"q", nb}});
        const auto ds = build_pair_dataset(epochs, "p", "q", static_cast<std::uint64_t>(trial));
        const auto n0 = std::count(ds.y.begin(), ds.y.end(), 0);
        const auto n1 = std::count(ds.y.begin(), ds.y.end(), 1);
        CHECK(n0 == n1);
        CHECK(n0 == std::min(na, nb));
        std::set<double> distinct(ds.onsets.begin(), ds.onsets.end());
        CHECK(distinct.size() == ds.onsets.size());
    }
}
