#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "superstat/error.hpp"
#include "superstat/ingest.hpp"

using namespace superstat;

namespace {

std::vector<TickRecord> parse_csv(const std::string& text) {
    std::istringstream in(text);
    return parse_ticks(in, TickFormat::csv);
}

// 2021-01-04 00:00:00 UTC.
constexpr std::int64_t kMonday = 18631LL * 86400;

std::int64_t at(int hour, int minute, int day = 0) {
    return kMonday + day * 86400LL + hour * 3600LL + minute * 60LL;
}

IngestConfig loose() {
    IngestConfig cfg;
    cfg.min_values_per_window = 2;
    cfg.error_day_threshold = 1.0;
    return cfg;
}

}  // namespace

TEST(LoadTicks, SingleRow) {
    const auto t = parse_csv("asset,timestamp,price,volume\nA,1000,3.0,200\n");
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0], (TickRecord{"A", 1000, 3.0, 200.0}));
}

TEST(LoadTicks, EmptyFileGivesEmptyList) {
    EXPECT_TRUE(parse_csv("").empty());
    EXPECT_TRUE(parse_csv("asset,timestamp,price,volume\n").empty());
}

TEST(LoadTicks, NegativePriceNamesLine) {
    try {
        parse_csv("asset,timestamp,price,volume\nA,1000,3.0,200\nA,1001,-1,5\n");
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(LoadTicks, RejectsNegativeVolumeDuplicatesAndMalformedRows) {
    EXPECT_THROW(parse_csv("asset,timestamp,price,volume\nA,1,3.0,-2\n"), InputError);
    EXPECT_THROW(parse_csv("asset,timestamp,price,volume\nA,1,3.0,2\nA,1,4.0,2\n"), InputError);
    EXPECT_THROW(parse_csv("asset,timestamp,price,volume\nA,1,3.0\n"), InputError);
    EXPECT_THROW(parse_csv("asset,timestamp,price,volume\nA,1,abc,2\n"), InputError);
    EXPECT_THROW(parse_csv("asset,time,price,volume\nA,1,3.0,2\n"), InputError);
}

TEST(LoadTicks, SortsByAssetThenTime) {
    const auto t = parse_csv("asset,timestamp,price,volume\nB,5,1,1\nA,9,1,1\nA,2,1,1\nB,1,1,1\n");
    ASSERT_EQ(t.size(), 4u);
    EXPECT_EQ(t[0].asset_id, "A");
    EXPECT_EQ(t[0].timestamp, 2);
    EXPECT_EQ(t[1].timestamp, 9);
    EXPECT_EQ(t[2].asset_id, "B");
    EXPECT_EQ(t[2].timestamp, 1);
}

TEST(LoadTicks, IsoTimestampsAndMixedFormatsRejected) {
    const auto t = parse_csv("asset,timestamp,price,volume\nA,2021-01-04T09:35:00Z,2,1\n");
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0].timestamp, at(9, 35));
    EXPECT_THROW(parse_csv("asset,timestamp,price,volume\nA,2021-01-04T09:35:00Z,2,1\nA,1609752960,2,1\n"),
                 InputError);
    EXPECT_THROW(parse_csv("asset,timestamp,price,volume\nA,1609752960,2,1\nA,2021-01-04T09:35:00Z,2,1\n"),
                 InputError);
}

TEST(ParseIso8601, OffsetsAndFractions) {
    EXPECT_EQ(parse_iso8601("1970-01-01T00:00:00Z"), 0);
    EXPECT_EQ(parse_iso8601("2021-01-04T09:35:00Z"), 1609752900);
    EXPECT_EQ(parse_iso8601("2021-01-04 09:35:00"), 1609752900);
    EXPECT_EQ(parse_iso8601("2021-01-04T10:35:00+01:00"), 1609752900);
    EXPECT_EQ(parse_iso8601("2021-01-04T04:35:00-05:00"), 1609752900);
    EXPECT_EQ(parse_iso8601("2021-01-04T09:35:00.75Z"), 1609752900);
    EXPECT_EQ(parse_iso8601("2000-02-29T00:00:00Z"), 951782400);
    EXPECT_THROW(parse_iso8601("2021-13-04T09:35:00Z"), InputError);
    EXPECT_THROW(parse_iso8601("yesterday"), InputError);
}

TEST(LoadTicks, JsonlMatchesCsv) {
    std::istringstream in(
        "{\"asset\":\"A\",\"timestamp\":1000,\"price\":3.0,\"volume\":200}\n"
        "\n"
        "{\"asset\":\"B\",\"timestamp\":\"2021-01-04T09:35:00Z\",\"price\":1.5,\"volume\":2}\n");
    const auto iso = parse_ticks(in, TickFormat::jsonl);
    ASSERT_EQ(iso.size(), 2u);
    EXPECT_EQ(iso[1].timestamp, 1609752900);

    std::istringstream ok(
        "{\"asset\":\"A\",\"timestamp\":1000,\"price\":3.0,\"volume\":200}\n"
        "{\"asset\":\"B\",\"timestamp\":999,\"price\":1.5,\"volume\":2}\n");
    const auto t = parse_ticks(ok, TickFormat::jsonl);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t[0], (TickRecord{"A", 1000, 3.0, 200.0}));
    EXPECT_EQ(t[1], (TickRecord{"B", 999, 1.5, 2.0}));

    std::istringstream bad("{\"asset\":\"A\",\"timestamp\":1000,\"price\":0,\"volume\":200}\n");
    EXPECT_THROW(parse_ticks(bad, TickFormat::jsonl), InputError);
}

TEST(LoadTicks, CsvRoundTrip) {
    const std::vector<TickRecord> ticks{{"A", 10, 1.25, 3.0}, {"A", 11, 0.1, 0.0}, {"B", 3, 1e-7, 123456.5}};
    std::ostringstream out;
    write_ticks_csv(out, ticks);
    EXPECT_EQ(parse_csv(out.str()), ticks);
}

TEST(Windowize, DirectProduct) {
    const std::vector<TickRecord> ticks{{"A", at(9, 35), 2, 1}, {"B", at(9, 35), 4, 1}, {"C", at(9, 35), 8, 1}};
    const auto r = windowize(ticks, loose());
    ASSERT_EQ(r.windows.size(), 1u);
    auto v = r.windows[0].values;
    std::sort(v.begin(), v.end());
    EXPECT_EQ(v, (std::vector<double>{2, 4, 8}));
    EXPECT_EQ(r.windows[0].intraday_slot, 0);
    EXPECT_EQ(r.slots_per_day, 39);
    EXPECT_EQ(r.open_slot, 57);
}

TEST(Windowize, AfterHoursExcluded) {
    const std::vector<TickRecord> ticks{
        {"A", at(9, 35), 2, 1}, {"B", at(9, 36), 4, 1}, {"A", at(17, 0), 2, 1}, {"A", at(16, 0), 2, 1}};
    const auto r = windowize(ticks, loose());
    ASSERT_EQ(r.windows.size(), 1u);
    EXPECT_EQ(r.windows[0].values.size(), 2u);
    const auto it = std::find_if(r.skips.begin(), r.skips.end(),
                                 [](const SkipEntry& e) { return e.reason == "after_hours"; });
    ASSERT_NE(it, r.skips.end());
    EXPECT_EQ(it->count, 2u);  // 17:00 and the close instant 16:00
}

TEST(Windowize, SparseWindowDroppedAndLogged) {
    std::vector<TickRecord> ticks;
    for (int a = 0; a < 10; ++a) ticks.push_back({"S" + std::to_string(a), at(9, 31), 1.0 + a, 1});
    for (int a = 0; a < 4; ++a) ticks.push_back({"S" + std::to_string(a), at(9, 45), 1.0 + a, 1});
    IngestConfig cfg;
    cfg.error_day_threshold = 1.0;
    const auto r = windowize(ticks, cfg);
    ASSERT_EQ(r.windows.size(), 1u);
    EXPECT_EQ(r.windows[0].intraday_slot, 0);
    const auto n = std::count_if(r.skips.begin(), r.skips.end(), [](const SkipEntry& e) {
        return e.reason == "below_min_values" && e.slot == 1 && e.count == 4;
    });
    EXPECT_EQ(n, 1);
}

TEST(Windowize, ZeroVolumeExcluded) {
    const std::vector<TickRecord> ticks{{"A", at(9, 35), 2, 1}, {"B", at(9, 35), 4, 0}, {"C", at(9, 35), 8, 1}};
    const auto r = windowize(ticks, loose());
    ASSERT_EQ(r.windows.size(), 1u);
    EXPECT_EQ(r.windows[0].values.size(), 2u);
    EXPECT_TRUE(std::any_of(r.skips.begin(), r.skips.end(),
                            [](const SkipEntry& e) { return e.reason == "zero_volume" && e.count == 1; }));
}

TEST(Windowize, ErrorDayDiscarded) {
    std::vector<TickRecord> ticks;
    // Day 0 complete; day 1 has only its first window populated.
    for (int s = 0; s < 39; ++s) {
        for (int a = 0; a < 3; ++a) ticks.push_back({"A" + std::to_string(a), at(9, 30 + 10 * s, 0) + a, 1.0 + a, 1});
    }
    for (int a = 0; a < 3; ++a) ticks.push_back({"A" + std::to_string(a), at(9, 30, 1) + a, 1.0 + a, 1});
    IngestConfig cfg = loose();
    cfg.error_day_threshold = 0.2;
    const auto r = windowize(ticks, cfg);
    EXPECT_EQ(r.windows.size(), 39u);
    EXPECT_EQ(r.days.size(), 1u);
    EXPECT_TRUE(std::any_of(r.skips.begin(), r.skips.end(),
                            [](const SkipEntry& e) { return e.reason == "error_day" && e.day == 18632; }));
}

TEST(Windowize, Properties) {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> minute(8 * 60, 17 * 60);
    std::uniform_int_distribution<int> day(0, 4);
    std::uniform_real_distribution<double> price(0.5, 10.0), volume(0.0, 3.0);
    std::vector<TickRecord> ticks;
    for (int a = 0; a < 30; ++a) {
        for (int k = 0; k < 400; ++k) {
            const std::int64_t ts = kMonday + day(rng) * 86400LL + minute(rng) * 60LL + k % 60;
            ticks.push_back({"X" + std::to_string(a), ts, price(rng), k % 17 == 0 ? 0.0 : volume(rng)});
        }
    }
    std::sort(ticks.begin(), ticks.end(), [](const TickRecord& x, const TickRecord& y) {
        return std::tie(x.asset_id, x.timestamp) < std::tie(y.asset_id, y.timestamp);
    });
    ticks.erase(std::unique(ticks.begin(), ticks.end(),
                            [](const TickRecord& x, const TickRecord& y) {
                                return x.asset_id == y.asset_id && x.timestamp == y.timestamp;
                            }),
                ticks.end());
    IngestConfig cfg;
    cfg.error_day_threshold = 1.0;
    const auto r = windowize(ticks, cfg);
    ASSERT_FALSE(r.windows.empty());
    std::size_t total = 0;
    for (const auto& w : r.windows) {
        total += w.values.size();
        EXPECT_EQ(w.intraday_slot, w.window_index % r.slots_per_day);
        EXPECT_GE(w.values.size(), 10u);
        for (double v : w.values) EXPECT_TRUE(v > 0.0 && std::isfinite(std::log(v)));
    }
    EXPECT_LE(total, ticks.size());

    auto shuffled = ticks;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto again = windowize(shuffled, cfg);
    ASSERT_EQ(again.windows.size(), r.windows.size());
    for (std::size_t i = 0; i < r.windows.size(); ++i) {
        EXPECT_EQ(again.windows[i].window_index, r.windows[i].window_index);
        EXPECT_EQ(again.windows[i].values, r.windows[i].values);
    }
}

TEST(Windowize, SingleAssetPooling) {
    std::vector<TickRecord> ticks;
    for (int k = 0; k < 5; ++k) {
        ticks.push_back({"A", at(9, 31) + k, 2.0, 1});
        ticks.push_back({"B", at(9, 31) + k, 7.0, 1});
    }
    IngestConfig cfg = loose();
    cfg.pooling = Pooling::single_asset;
    cfg.asset = "B";
    const auto r = windowize(ticks, cfg);
    ASSERT_EQ(r.windows.size(), 1u);
    EXPECT_EQ(r.windows[0].values, std::vector<double>(5, 7.0));
}

TEST(IngestConfig, Validation) {
    IngestConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.window_minutes = 7;  // does not divide 390 minutes
    EXPECT_THROW(cfg.validate(), InputError);
    cfg = {};
    cfg.outlier_sigma = 0.0;
    EXPECT_THROW(cfg.validate(), InputError);
    cfg = {};
    cfg.min_values_per_window = 1;
    EXPECT_THROW(cfg.validate(), InputError);
}

TEST(SkipLog, OneJsonObjectPerLine) {
    SkipLog log{{"windowize", "below_min_values", 18631, 5, 5, 3}, {"fit", "degenerate", -1, 7, 7, 10}};
    std::ostringstream out;
    write_skip_log(out, log);
    std::istringstream in(out.str());
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("stage"));
        EXPECT_TRUE(j.contains("reason"));
        ++lines;
    }
    EXPECT_EQ(lines, 2);
}

TEST(ClipOutliers, ZeroVarianceKeepsAll) {
    const std::vector<double> v{0, 0, 0, 0};
    const auto r = clip_outliers(v, 5);
    EXPECT_EQ(r.kept, v);
    EXPECT_EQ(r.removed, 0u);
}

TEST(ClipOutliers, LargeOutlierRemoved) {
    std::vector<double> v(99, 0.0);
    v.push_back(1000.0);
    // Hand oracle: mean 10, population std sqrt(10000 - 100) = 99.5, band [-487.5, 507.5].
    const double mean = 10.0, sd = std::sqrt(10000.0 - 100.0);
    ASSERT_GT(1000.0, mean + 5 * sd);
    const auto r = clip_outliers(v, 5);
    EXPECT_EQ(r.removed, 1u);
    EXPECT_EQ(r.kept, std::vector<double>(99, 0.0));
    EXPECT_FALSE(r.keep_mask.back());
}

TEST(ClipOutliers, AllWithinBand) {
    const std::vector<double> v{1, 2, 3};
    EXPECT_EQ(clip_outliers(v, 5).kept, v);
}

TEST(ClipOutliers, RemovingEverythingIsAnError) {
    const std::vector<double> v{1, 2};
    EXPECT_THROW(clip_outliers(v, 0.5), InputError);
    EXPECT_THROW(clip_outliers(std::vector<double>{}, 5), InputError);
    EXPECT_THROW(clip_outliers(v, 0.0), InputError);
}
