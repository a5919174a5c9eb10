#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "forecastad/baselines.hpp"

#include <cmath>

using namespace forecastad;

namespace {

Sample make_sample(const ThermalFrame& f, double t) {
    Sample s;
    s.frame = f;
    s.t = t;
    s.y = Label::Normal;
    s.segment = Segment::M;
    return s;
}

}  // namespace

TEST_CASE("feature scores of a constant frame") {
    const auto s = make_sample(ThermalFrame(3, 3, 7.0f), 500.0);
    CHECK(feature_score(s, 500.0, FeatureBaseline::TimeOfDay) == 0.0);
    CHECK(feature_score(s, 200.0, FeatureBaseline::TimeOfDay) == 300.0);
    CHECK(feature_score(s, 500.0, FeatureBaseline::NegativeMean) == doctest::Approx(-7.0));
    CHECK(feature_score(s, 500.0, FeatureBaseline::NegativeMax) == doctest::Approx(-7.0));
    CHECK(feature_score(s, 500.0, FeatureBaseline::NegativeStd) == doctest::Approx(0.0));
}

TEST_CASE("negative_std uses the population standard deviation") {
    ThermalFrame f(2, 2);
    f.pixels = {1.0f, 2.0f, 3.0f, 4.0f};
    const auto s = make_sample(f, 0.0);
    // mean 2.5, population variance ((1.5^2 + 0.5^2) * 2) / 4 = 1.25
    CHECK(feature_score(s, 0.0, FeatureBaseline::NegativeStd) ==
          doctest::Approx(-std::sqrt(1.25)).epsilon(1e-12));
    CHECK(feature_score(s, 0.0, FeatureBaseline::NegativeMean) == doctest::Approx(-2.5));
    CHECK(feature_score(s, 0.0, FeatureBaseline::NegativeMax) == doctest::Approx(-4.0));
}

TEST_CASE("mean and std are covariant under a constant temperature offset") {
    Rng rng(12);
    ThermalFrame a(4, 4);
    for (auto& p : a.pixels) p = static_cast<float>(rng.uniform(10.0, 90.0));
    ThermalFrame b = a;
    for (auto& p : b.pixels) p += 25.0f;
    const auto sa = make_sample(a, 0.0), sb = make_sample(b, 0.0);
    CHECK(feature_score(sb, 0.0, FeatureBaseline::NegativeMean) ==
          doctest::Approx(feature_score(sa, 0.0, FeatureBaseline::NegativeMean) - 25.0)
              .epsilon(1e-6));
    CHECK(feature_score(sb, 0.0, FeatureBaseline::NegativeStd) ==
          doctest::Approx(feature_score(sa, 0.0, FeatureBaseline::NegativeStd)).epsilon(1e-6));
}

TEST_CASE("feature_score_days anchors time-of-day at each day's first sample") {
    DaySequence d1, d2;
    d1.day_id = "d1";
    d2.day_id = "d2";
    for (int i = 0; i < 3; ++i) {
        auto s = make_sample(ThermalFrame(2, 2, 1.0f), 1000.0 + 60.0 * i);
        s.day_id = "d1";
        d1.samples.push_back(s);
        s.t = 9000.0 + 120.0 * i;
        s.day_id = "d2";
        d2.samples.push_back(s);
    }
    d2.samples[1].y = Label::Anomalous;
    d2.samples[1].segment = Segment::E;
    const auto rows = feature_score_days({d1, d2}, FeatureBaseline::TimeOfDay);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].score == 0.0);
    CHECK(rows[1].score == 60.0);
    CHECK(rows[3].score == 0.0);  // second day restarts at its own t0
    CHECK(rows[4].score == 120.0);
    // metadata passes through
    CHECK(rows[4].day_id == "d2");
    CHECK(rows[4].t == 9120.0);
    CHECK(rows[4].y == Label::Anomalous);
    CHECK(rows[4].segment == Segment::E);
}

TEST_CASE("feature scoring does not mutate its input") {
    DaySequence d;
    d.day_id = "d";
    d.samples.push_back(make_sample(ThermalFrame(2, 2, 3.0f), 10.0));
    const auto copy = d;
    feature_score_days({d}, FeatureBaseline::NegativeMax);
    CHECK(d.samples[0].frame.pixels == copy.samples[0].frame.pixels);
    CHECK(d.samples[0].t == copy.samples[0].t);
}

TEST_CASE("baseline names round trip") {
    for (auto k : {FeatureBaseline::TimeOfDay, FeatureBaseline::NegativeMean,
                   FeatureBaseline::NegativeMax, FeatureBaseline::NegativeStd})
        CHECK(feature_baseline_from_string(to_string(k)) == k);
    CHECK_THROWS(feature_baseline_from_string("nope"));
}

TEST_CASE("autoencoder scores are the model's reconstruction errors") {
    const PreprocessStats stats{0.0, 100.0};
    TrainConfig tc;
    tc.context_length = 3;
    ForecastModel model(ModelConfig::tiny(), tc, stats);
    DaySequence day;
    day.day_id = "d";
    Rng rng(7);
    for (int i = 0; i < 4; ++i) {
        ThermalFrame f(8, 8);
        for (auto& p : f.pixels) p = static_cast<float>(rng.uniform(0.0, 100.0));
        auto s = make_sample(f, 100.0 * (i + 1));
        s.day_id = "d";
        day.samples.push_back(s);
    }
    const auto rows = autoencoder_score_days(model, {day});
    REQUIRE(rows.size() == 4);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].score == model.reconstruction_error(day.samples[i].frame));
        CHECK(rows[i].t == day.samples[i].t);
    }
}
