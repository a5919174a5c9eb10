#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "forecastad/label.hpp"
#include "forecastad/simulate.hpp"
#include "forecastad/stats.hpp"

#include <cmath>

using namespace forecastad;

namespace {

LabelConfig small_config() {
    LabelConfig cfg;
    cfg.min_day_samples = 3;
    cfg.r3_template_count = 2;
    return cfg;
}

/// Day of constant frames at the given per-sample mean temperatures.
DaySequence flat_day(const std::string& id, const std::vector<double>& means, int hw = 4,
                     Segment seg = Segment::M) {
    DaySequence day;
    day.day_id = id;
    for (size_t i = 0; i < means.size(); ++i) {
        Sample s;
        s.frame = ThermalFrame(hw, hw, static_cast<float>(means[i]));
        s.t = 100.0 * (i + 1);
        s.segment = seg;
        s.day_id = id;
        day.samples.push_back(std::move(s));
    }
    return day;
}

}  // namespace

TEST_CASE("percentile uses linear interpolation between order statistics") {
    CHECK(percentile({0, 0, 0, 100}, 95.0) == doctest::Approx(85.0).epsilon(1e-12));
    CHECK(percentile({1, 2, 3, 4}, 50.0) == doctest::Approx(2.5));
    CHECK(percentile({5}, 99.0) == 5.0);
    CHECK(percentile({3, 1, 2}, 0.0) == 1.0);
    CHECK(percentile({3, 1, 2}, 100.0) == 3.0);
}

TEST_CASE("filter: short days are dropped with the reason") {
    LabelConfig cfg;  // min_day_samples = 20
    std::vector<DaySequence> days;
    days.push_back(flat_day("short", {300, 300, 300, 300, 300}));
    days.push_back(flat_day("long", std::vector<double>(25, 300.0)));
    const auto result = filter_days(days, cfg);
    REQUIRE(result.dropped.size() == 1);
    CHECK(result.dropped[0].first.day_id == "short");
    CHECK(result.dropped[0].second == "too_few_samples");
    REQUIRE(result.kept.size() == 1);
    CHECK(result.kept[0].day_id == "long");
}

TEST_CASE("filter: identical healthy days all kept") {
    LabelConfig cfg;
    std::vector<DaySequence> days;
    for (int d = 0; d < 5; ++d)
        days.push_back(flat_day("day" + std::to_string(d), std::vector<double>(25, 350.0)));
    const auto result = filter_days(days, cfg);
    CHECK(result.dropped.empty());
    CHECK(result.kept.size() == 5);
}

TEST_CASE("filter: day at half the temperature of ten healthy days is dropped") {
    LabelConfig cfg;
    std::vector<DaySequence> days;
    for (int d = 0; d < 10; ++d)
        days.push_back(flat_day("healthy" + std::to_string(d), std::vector<double>(25, 400.0)));
    days.push_back(flat_day("cold", std::vector<double>(25, 200.0)));
    const auto result = filter_days(days, cfg);
    REQUIRE(result.dropped.size() == 1);
    CHECK(result.dropped[0].first.day_id == "cold");
    CHECK(result.dropped[0].second == "low_M_temperature");
}

TEST_CASE("segmentation: constant day is all M") {
    auto day = flat_day("flat", std::vector<double>(10, 250.0), 4, Segment::Unassigned);
    segment_day(day, small_config());
    for (const auto& s : day.samples) CHECK(s.segment == Segment::M);
}

TEST_CASE("segmentation: strictly increasing day ends in M with no E") {
    std::vector<double> means;
    for (int i = 0; i < 20; ++i) means.push_back(100.0 + 10.0 * i);
    auto day = flat_day("rise", means, 4, Segment::Unassigned);
    segment_day(day, small_config());
    CHECK(day.samples.front().segment == Segment::S);
    CHECK(day.samples.back().segment == Segment::M);
    bool after_m_started = false;
    for (const auto& s : day.samples) {
        CHECK(s.segment != Segment::E);
        if (s.segment == Segment::M) after_m_started = true;
        if (after_m_started) CHECK(s.segment == Segment::M);  // M is one suffix run
    }
}

TEST_CASE("segmentation matches simulator ground truth on >= 95% of samples") {
    SimConfig sim;
    sim.height = 8;
    sim.width = 8;
    sim.anomaly_rate = 0.0;
    sim.clean_day_fraction = 1.0;
    sim.seed = 4;
    LabelConfig cfg;
    size_t agree = 0, total = 0;
    for (int d = 0; d < 5; ++d) {
        auto day = simulate_day(sim, d);
        std::vector<Segment> truth;
        for (auto& s : day.samples) {
            truth.push_back(s.segment);
            s.segment = Segment::Unassigned;
        }
        segment_day(day, cfg);
        for (size_t i = 0; i < day.size(); ++i) {
            agree += day.samples[i].segment == truth[i];
            ++total;
        }
    }
    CHECK(static_cast<double>(agree) / total >= 0.95);
}

TEST_CASE("R1: identical consecutive frames score zero; first M sample unscored") {
    std::vector<DaySequence> days{flat_day("d", {300, 300, 300, 300})};
    const auto rs = rule_r1(days, small_config());
    CHECK_FALSE(rs.scores[0][0].has_value());
    for (int i = 1; i < 4; ++i) {
        REQUIRE(rs.scores[0][i].has_value());
        CHECK(*rs.scores[0][i] == 0.0);
    }
}

TEST_CASE("R1: 2x2 fixture reproduces the interpolated 95th percentile") {
    DaySequence day;
    day.day_id = "fix";
    Sample a, b;
    a.frame = ThermalFrame(2, 2, 0.0f);
    b.frame = ThermalFrame(2, 2, 0.0f);
    b.frame.at(1, 1) = 10.0f;  // squared diffs [0,0,0,100]
    a.t = 1;
    b.t = 2;
    a.segment = b.segment = Segment::M;
    day.samples = {a, b};
    std::vector<DaySequence> days{day};
    const auto rs = rule_r1(days, small_config());
    REQUIRE(rs.scores[0][1].has_value());
    CHECK(*rs.scores[0][1] == doctest::Approx(85.0).epsilon(1e-12));
}

TEST_CASE("R1: the only differing pair is the only flag") {
    std::vector<DaySequence> days;
    for (int d = 0; d < 3; ++d)
        days.push_back(flat_day("d" + std::to_string(d), std::vector<double>(10, 300.0)));
    days[1].samples[5].frame.at(0, 0) = 500.0f;
    // only 27 scored pairs here, so use a dataset percentile that falls below
    // the tied top scores (the 99.9 default assumes thousands of samples)
    auto cfg = small_config();
    cfg.r1_dataset_percentile = 90.0;
    const auto rs = rule_r1(days, cfg);
    int flags = 0;
    for (const auto& day_flags : rs.flags)
        for (bool f : day_flags) flags += f;
    CHECK(flags >= 1);
    CHECK(rs.flags[1][5]);   // the jump into the odd frame
}

TEST_CASE("R2: identical frames score zero, a cold frame is flagged") {
    std::vector<DaySequence> days;
    days.push_back(flat_day("a", std::vector<double>(10, 300.0)));
    days.push_back(flat_day("b", std::vector<double>(10, 310.0)));
    auto cold = flat_day("c", std::vector<double>(10, 305.0));
    cold.samples[4].frame = ThermalFrame(4, 4, 205.0f);
    days.push_back(cold);
    const auto rs = rule_r2(days, small_config());
    for (int i = 0; i < 10; ++i) CHECK(*rs.scores[0][i] == 0.0);
    CHECK(rs.flags[2][4]);
    int flags = 0;
    for (const auto& day_flags : rs.flags)
        for (bool f : day_flags) flags += f;
    CHECK(flags == 1);
}

TEST_CASE("R2: flags match a brute-force recomputation on a 3-day set") {
    std::vector<DaySequence> days;
    days.push_back(flat_day("a", {300, 310, 305, 280, 320}));
    days.push_back(flat_day("b", {200, 210, 190, 205, 195}));
    days.push_back(flat_day("c", {400, 401, 399, 380, 402}));
    const auto cfg = small_config();
    const auto rs = rule_r2(days, cfg);

    std::vector<double> all_scores;
    std::vector<std::vector<double>> per_day(3);
    for (int d = 0; d < 3; ++d) {
        double day_mean = 0.0;
        for (const auto& s : days[d].samples) day_mean += s.frame.mean();
        day_mean /= days[d].size();
        for (const auto& s : days[d].samples) {
            per_day[d].push_back(s.frame.mean() - day_mean);
            all_scores.push_back(per_day[d].back());
        }
    }
    const double thr = percentile(all_scores, cfg.r2_percentile);
    for (int d = 0; d < 3; ++d)
        for (size_t i = 0; i < days[d].size(); ++i) {
            CHECK(*rs.scores[d][i] == doctest::Approx(per_day[d][i]).epsilon(1e-9));
            CHECK(rs.flags[d][i] == (per_day[d][i] < thr));
        }
}

TEST_CASE("R3: frames equal to the templates score zero") {
    std::vector<DaySequence> days{flat_day("d", std::vector<double>(6, 300.0))};
    const auto rs = rule_r3(days, small_config());
    for (int i = 0; i < 6; ++i) {
        REQUIRE(rs.scores[0][i].has_value());
        CHECK(*rs.scores[0][i] == 0.0);
    }
}

TEST_CASE("R3: 2x2 fixture with 2 templates equals the mean of two pair scores") {
    auto cfg = small_config();  // r3_template_count = 2
    DaySequence day;
    day.day_id = "fix";
    auto make = [](std::initializer_list<float> vals, double t) {
        Sample s;
        s.frame = ThermalFrame(2, 2);
        int i = 0;
        for (float v : vals) s.frame.pixels[i++] = v;
        s.t = t;
        s.segment = Segment::M;
        return s;
    };
    day.samples = {make({0, 0, 0, 0}, 1), make({1, 1, 1, 1}, 2), make({0, 0, 0, 10}, 3)};
    std::vector<DaySequence> days{day};
    const auto rs = rule_r3(days, cfg);
    // against template 1: diffs^2 [0,0,0,100] -> p95 = 85
    // against template 2: diffs^2 [1,1,1,81]  -> p95 = 69
    CHECK(*rs.scores[0][2] == doctest::Approx((85.0 + 69.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("R1/R3 scores are invariant under a constant pixel offset") {
    std::vector<DaySequence> days{flat_day("d", {300, 305, 420, 310, 300, 305})};
    auto shifted = days;
    for (auto& day : shifted)
        for (auto& s : day.samples)
            for (auto& p : s.frame.pixels) p += 55.0f;
    const auto cfg = small_config();
    const auto r1a = rule_r1(days, cfg), r1b = rule_r1(shifted, cfg);
    const auto r3a = rule_r3(days, cfg), r3b = rule_r3(shifted, cfg);
    for (size_t i = 0; i < days[0].size(); ++i) {
        if (r1a.scores[0][i])
            CHECK(*r1a.scores[0][i] == doctest::Approx(*r1b.scores[0][i]).epsilon(1e-6));
        CHECK(*r3a.scores[0][i] == doctest::Approx(*r3b.scores[0][i]).epsilon(1e-6));
    }
}

TEST_CASE("raising the R1 dataset percentile never increases the flag count") {
    SimConfig sim;
    sim.height = 8;
    sim.width = 8;
    sim.clean_day_fraction = 0.0;
    sim.anomaly_rate = 0.15;
    std::vector<DaySequence> days;
    for (int d = 0; d < 4; ++d) days.push_back(simulate_day(sim, d));
    auto cfg = small_config();
    int prev = std::numeric_limits<int>::max();
    for (double pct : {90.0, 95.0, 99.0, 99.9}) {
        cfg.r1_dataset_percentile = pct;
        const auto rs = rule_r1(days, cfg);
        int flags = 0;
        for (const auto& day_flags : rs.flags)
            for (bool f : day_flags) flags += f;
        CHECK(flags <= prev);
        prev = flags;
    }
}

TEST_CASE("R4: constant frame scores zero on both axes") {
    const auto r4 = rule_r4(ThermalFrame(5, 5, 123.0f), small_config());
    CHECK(r4.horizontal == 0.0);
    CHECK(r4.vertical == 0.0);
    CHECK_FALSE(r4.flag);
}

TEST_CASE("R4: a raised full-height column drives only the vertical score") {
    ThermalFrame frame(8, 8, 100.0f);
    for (int r = 0; r < 8; ++r) frame.at(r, 4) += 100.0f;
    const auto r4 = rule_r4(frame, small_config());
    CHECK(r4.horizontal == 0.0);  // rows stay identical to each other
    CHECK(r4.vertical > 0.0);
}

TEST_CASE("R4: 5x5 fixture matches a hand-unrolled convolution") {
    ThermalFrame frame(5, 5);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c)
            frame.at(r, c) = static_cast<float>(r * r + 3 * c + ((r + c) % 2) * 7);
    const auto r4 = rule_r4(frame, small_config());

    double horizontal = -1e300;
    for (int r = 0; r + 1 < 5; ++r)
        for (int c = 0; c < 5; ++c)
            horizontal = std::max(horizontal,
                                  static_cast<double>(frame.at(r + 1, c)) - frame.at(r, c));

    double diff[5][4];
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 4; ++c) diff[r][c] = frame.at(r, c + 1) - frame.at(r, c);
    const double k[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    double acc = 0.0;
    int count = 0;
    for (int r = 0; r + 2 < 5; ++r)
        for (int c = 0; c + 2 < 4; ++c) {
            double v = 0.0;
            for (int kr = 0; kr < 3; ++kr)
                for (int kc = 0; kc < 3; ++kc) v += k[kr][kc] * diff[r + kr][c + kc];
            acc += std::abs(v);
            ++count;
        }
    CHECK(r4.horizontal == doctest::Approx(horizontal).epsilon(1e-12));
    CHECK(r4.vertical == doctest::Approx(acc / count).epsilon(1e-12));
}

TEST_CASE("R4: vertical score is mirror symmetric") {
    ThermalFrame frame(6, 7);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 7; ++c) frame.at(r, c) = static_cast<float>(2 * r + c * c % 5);
    ThermalFrame mirror(6, 7);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 7; ++c) mirror.at(r, c) = frame.at(r, 6 - c);
    const auto a = rule_r4(frame, small_config());
    const auto b = rule_r4(mirror, small_config());
    CHECK(a.vertical == doctest::Approx(b.vertical).epsilon(1e-9));
}

TEST_CASE("trend rule: steep ramp is normal, flat S segment is flagged") {
    LabelConfig cfg;
    auto ramp = flat_day("ramp", {100, 110, 120, 130, 140, 150}, 4, Segment::S);
    const auto ramp_flags = label_se_segments(ramp, cfg);
    for (bool f : ramp_flags) CHECK_FALSE(f);

    auto flat = flat_day("flat", {100, 100, 100, 100, 100}, 4, Segment::S);
    const auto flat_flags = label_se_segments(flat, cfg);
    CHECK_FALSE(flat_flags[0]);  // no in-segment predecessor
    for (size_t i = 1; i < flat_flags.size(); ++i) CHECK(flat_flags[i]);
}

TEST_CASE("trend rule: falling temperature inside S is flagged") {
    LabelConfig cfg;
    auto day = flat_day("drop", {100, 110, 120, 60, 130, 140}, 4, Segment::S);
    const auto flags = label_se_segments(day, cfg);
    CHECK(flags[3]);
}

TEST_CASE("trend rule: E expects a decline") {
    LabelConfig cfg;
    auto fall = flat_day("fall", {200, 180, 160, 140}, 4, Segment::E);
    for (bool f : label_se_segments(fall, cfg)) CHECK_FALSE(f);
    auto rise = flat_day("rise", {140, 160, 180, 200}, 4, Segment::E);
    const auto flags = label_se_segments(rise, cfg);
    for (size_t i = 1; i < flags.size(); ++i) CHECK(flags[i]);
}

TEST_CASE("combination is a logical OR over applicable rules") {
    // an M-segment day where only R4 fires (vertical streak, stable means)
    auto day = flat_day("streak", std::vector<double>(30, 300.0), 8);
    for (int r = 0; r < 8; ++r) day.samples[10].frame.at(r, 3) += 300.0f;
    // keep the frame mean unchanged so R2 cannot fire
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            if (c != 3) day.samples[10].frame.at(r, c) -= 300.0f / 7.0f;

    std::vector<DaySequence> days{day};
    LabelConfig cfg;
    cfg.min_day_samples = 3;
    const auto report = label_days(days, cfg);
    CHECK(days[0].samples[10].y == Label::Anomalous);
    CHECK(report.verdicts[0][10].r4_flag);
    CHECK(report.final_anomalies >= 1);
    // untouched samples stay normal
    CHECK(days[0].samples[3].y == Label::Normal);
}

TEST_CASE("labelling agrees with simulator ground truth on >= 85% of samples") {
    SimConfig sim;
    sim.height = 32;
    sim.width = 32;
    sim.clean_day_fraction = 0.5;
    sim.seed = 11;
    std::vector<DaySequence> days;
    for (int d = 0; d < 10; ++d) {
        auto day = simulate_day(sim, d);
        for (auto& s : day.samples) {
            s.segment = Segment::Unassigned;
            s.y = Label::Unlabeled;
        }
        days.push_back(std::move(day));
    }
    LabelConfig cfg;
    label_days(days, cfg);
    size_t agree = 0, total = 0;
    for (const auto& day : days)
        for (const auto& s : day.samples) {
            const bool truth = s.anomaly_kind != AnomalyKind::None;
            agree += truth == (s.y == Label::Anomalous);
            ++total;
        }
    CHECK(static_cast<double>(agree) / total >= 0.85);
}
