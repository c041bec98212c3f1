#include "superstat/ingest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "superstat/csv.hpp"
#include "superstat/error.hpp"

namespace superstat {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

bool is_integer_text(std::string_view s) {
    if (s.empty()) return false;
    std::size_t i = (s.front() == '-' || s.front() == '+') ? 1 : 0;
    if (i == s.size()) return false;
    return std::all_of(s.begin() + static_cast<std::ptrdiff_t>(i), s.end(),
                       [](char c) { return c >= '0' && c <= '9'; });
}

int two_digits(std::string_view s, std::size_t pos) {
    if (pos + 2 > s.size() || !std::isdigit(static_cast<unsigned char>(s[pos])) ||
        !std::isdigit(static_cast<unsigned char>(s[pos + 1]))) {
        throw InputError(fmt::format("malformed ISO-8601 timestamp '{}'", s));
    }
    return (s[pos] - '0') * 10 + (s[pos + 1] - '0');
}

void check_record(const TickRecord& t, std::size_t line_no) {
    if (t.asset_id.empty()) throw InputError(fmt::format("line {}: empty asset id", line_no));
    if (!(t.price > 0.0) || !std::isfinite(t.price)) {
        throw InputError(fmt::format("line {}: price must be positive, got {}", line_no, t.price));
    }
    if (!(t.volume >= 0.0) || !std::isfinite(t.volume)) {
        throw InputError(
            fmt::format("line {}: volume must be non-negative, got {}", line_no, t.volume));
    }
}

std::vector<TickRecord> finalize(std::vector<TickRecord> ticks, std::vector<std::size_t> lines) {
    std::vector<std::size_t> order(ticks.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(ticks[a].asset_id, ticks[a].timestamp) <
               std::tie(ticks[b].asset_id, ticks[b].timestamp);
    });
    std::vector<TickRecord> sorted;
    sorted.reserve(ticks.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& t = ticks[order[k]];
        if (!sorted.empty() && sorted.back().asset_id == t.asset_id &&
            sorted.back().timestamp == t.timestamp) {
            throw InputError(fmt::format("line {}: duplicate record for asset '{}' at {}",
                                         std::max(lines[order[k]], lines[order[k - 1]]),
                                         t.asset_id, t.timestamp));
        }
        sorted.push_back(t);
    }
    return sorted;
}

std::vector<TickRecord> parse_csv(std::istream& in) {
    std::vector<TickRecord> ticks;
    std::vector<std::size_t> lines;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::array<std::size_t, 4> col{};
    int epoch_mode = -1;  // decided on the first data row
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = csv::trim(line);
        if (body.empty() || body.front() == '#') continue;
        auto fields = csv::split(body);
        if (!have_header) {
            const std::array<std::string, 4> names{"asset", "timestamp", "price", "volume"};
            for (std::size_t k = 0; k < names.size(); ++k) {
                auto it = std::find(fields.begin(), fields.end(), names[k]);
                if (it == fields.end()) {
                    throw InputError(fmt::format(
                        "line {}: header must contain asset,timestamp,price,volume", line_no));
                }
                col[k] = static_cast<std::size_t>(it - fields.begin());
            }
            have_header = true;
            continue;
        }
        if (fields.size() < 4) {
            throw InputError(fmt::format("line {}: expected 4 fields, found {}", line_no,
                                         fields.size()));
        }
        TickRecord t;
        t.asset_id = fields[col[0]];
        const auto& ts = fields[col[1]];
        const bool integer = is_integer_text(ts);
        if (epoch_mode < 0) epoch_mode = integer ? 1 : 0;
        if (integer != (epoch_mode == 1)) {
            throw InputError(
                fmt::format("line {}: timestamp '{}' does not match the file's format", line_no, ts));
        }
        try {
            t.timestamp = integer ? csv::to_int(ts, line_no) : parse_iso8601(ts);
        } catch (const InputError& e) {
            throw InputError(fmt::format("line {}: {}", line_no, e.what()));
        }
        t.price = csv::to_double(fields[col[2]], line_no);
        t.volume = csv::to_double(fields[col[3]], line_no);
        check_record(t, line_no);
        ticks.push_back(std::move(t));
        lines.push_back(line_no);
    }
    return finalize(std::move(ticks), std::move(lines));
}

std::vector<TickRecord> parse_jsonl(std::istream& in) {
    std::vector<TickRecord> ticks;
    std::vector<std::size_t> lines;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        TickRecord t;
        try {
            const auto j = nlohmann::json::parse(line);
            t.asset_id = j.at("asset").get<std::string>();
            const auto& ts = j.at("timestamp");
            t.timestamp = ts.is_string() ? parse_iso8601(ts.get<std::string>())
                                         : ts.get<std::int64_t>();
            t.price = j.at("price").get<double>();
            t.volume = j.at("volume").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw InputError(fmt::format("line {}: {}", line_no, e.what()));
        } catch (const InputError& e) {
            throw InputError(fmt::format("line {}: {}", line_no, e.what()));
        }
        check_record(t, line_no);
        ticks.push_back(std::move(t));
        lines.push_back(line_no);
    }
    return finalize(std::move(ticks), std::move(lines));
}

}  // namespace

TickFormat parse_tick_format(std::string_view name) {
    if (name == "csv") return TickFormat::csv;
    if (name == "jsonl") return TickFormat::jsonl;
    throw InputError(fmt::format("unknown format '{}' (expected csv or jsonl)", name));
}

std::int64_t parse_iso8601(std::string_view s) {
    s = csv::trim(s);
    if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
        s[13] != ':' || s[16] != ':') {
        throw InputError(fmt::format("malformed ISO-8601 timestamp '{}'", s));
    }
    const int year = two_digits(s, 0) * 100 + two_digits(s, 2);
    const int month = two_digits(s, 5);
    const int day = two_digits(s, 8);
    const int hour = two_digits(s, 11);
    const int minute = two_digits(s, 14);
    const int second = two_digits(s, 17);
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                             std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) {
        throw InputError(fmt::format("invalid date/time in '{}'", s));
    }
    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    std::int64_t offset = 0;
    if (pos < s.size()) {
        if (s[pos] == 'Z' && pos + 1 == s.size()) {
            offset = 0;
        } else if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
            const int sign = s[pos] == '-' ? -1 : 1;
            offset = sign * (two_digits(s, pos + 1) * 3600 + two_digits(s, pos + 4) * 60);
        } else {
            throw InputError(fmt::format("malformed ISO-8601 timestamp '{}'", s));
        }
    }
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * kSecondsPerDay + hour * 3600 + minute * 60 + second -
           offset;
}

std::vector<TickRecord> parse_ticks(std::istream& in, TickFormat format) {
    return format == TickFormat::csv ? parse_csv(in) : parse_jsonl(in);
}

std::vector<TickRecord> load_ticks(const std::filesystem::path& path, TickFormat format) {
    std::ifstream in(path);
    if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
    return parse_ticks(in, format);
}

void write_ticks_csv(std::ostream& out, std::span<const TickRecord> ticks) {
    out << "asset,timestamp,price,volume\n";
    for (const auto& t : ticks) {
        out << t.asset_id << ',' << t.timestamp << ',' << csv::num(t.price) << ','
            << csv::num(t.volume) << '\n';
    }
}

void IngestConfig::validate() const {
    if (window_minutes <= 0) throw InputError("window width must be positive");
    if (trading_open_minutes < 0 || trading_close_minutes > 24 * 60 ||
        trading_close_minutes <= trading_open_minutes) {
        throw InputError("trading hours must satisfy 0 <= open < close <= 24:00");
    }
    if ((trading_close_minutes - trading_open_minutes) % window_minutes != 0) {
        throw InputError("window width must divide the trading day evenly");
    }
    if (trading_open_minutes % window_minutes != 0) {
        throw InputError("trading open must fall on a window boundary");
    }
    if (!(outlier_sigma > 0.0)) throw InputError("outlier_sigma must be positive");
    if (min_values_per_window < 2) throw InputError("min_values_per_window must be at least 2");
    if (!(error_day_threshold >= 0.0 && error_day_threshold <= 1.0)) {
        throw InputError("error_day_threshold must lie in [0, 1]");
    }
    if (pooling == Pooling::single_asset && asset.empty()) {
        throw InputError("single-asset pooling needs an asset id");
    }
}

int IngestConfig::slots_per_day() const {
    return (trading_close_minutes - trading_open_minutes) / window_minutes;
}

int IngestConfig::open_slot() const { return trading_open_minutes / window_minutes; }

void write_skip_log(std::ostream& out, const SkipLog& log) {
    for (const auto& e : log) {
        nlohmann::ordered_json j;
        j["stage"] = e.stage;
        j["reason"] = e.reason;
        if (e.day >= 0) j["day"] = e.day;
        if (e.window_index >= 0) j["window_index"] = e.window_index;
        if (e.slot >= 0) j["slot"] = e.slot;
        j["count"] = e.count;
        out << j.dump() << '\n';
    }
}

ClipResult clip_outliers(std::span<const double> series, double sigma) {
    if (series.empty()) throw InputError("clip_outliers: empty series");
    if (!(sigma > 0.0)) throw InputError("clip_outliers: sigma must be positive");
    const double n = static_cast<double>(series.size());
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : series) ss += (v - mean) * (v - mean);
    const double band = sigma * std::sqrt(ss / n);
    ClipResult out;
    out.keep_mask.resize(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const bool keep = std::abs(series[i] - mean) <= band;
        out.keep_mask[i] = keep;
        if (keep) {
            out.kept.push_back(series[i]);
        } else {
            ++out.removed;
        }
    }
    if (out.kept.empty()) throw InputError("clip_outliers: every point was removed");
    return out;
}

WindowingResult windowize(std::span<const TickRecord> ticks, const IngestConfig& cfg) {
    cfg.validate();
    const int spd = cfg.slots_per_day();
    const std::int64_t width = std::int64_t{cfg.window_minutes} * 60;
    const std::int64_t open = std::int64_t{cfg.trading_open_minutes} * 60;
    const std::int64_t close = std::int64_t{cfg.trading_close_minutes} * 60;

    std::vector<const TickRecord*> order;
    order.reserve(ticks.size());
    for (const auto& t : ticks) {
        if (cfg.pooling == Pooling::single_asset && t.asset_id != cfg.asset) continue;
        order.push_back(&t);
    }
    std::sort(order.begin(), order.end(), [](const TickRecord* a, const TickRecord* b) {
        return std::tie(a->asset_id, a->timestamp, a->price, a->volume) <
               std::tie(b->asset_id, b->timestamp, b->price, b->volume);
    });

    WindowingResult result;
    result.slots_per_day = spd;
    result.open_slot = cfg.open_slot();

    std::size_t zero_volume = 0;
    std::size_t after_hours = 0;
    std::map<std::int64_t, std::vector<std::vector<double>>> by_day;
    for (const TickRecord* t : order) {
        if (t->volume <= 0.0) {
            ++zero_volume;
            continue;
        }
        const std::int64_t local = t->timestamp + std::int64_t{cfg.utc_offset_minutes} * 60;
        const std::int64_t day = floor_div(local, kSecondsPerDay);
        const std::int64_t tod = local - day * kSecondsPerDay;
        if (tod < open || tod >= close) {
            ++after_hours;
            continue;
        }
        auto& slots = by_day[day];
        if (slots.empty()) slots.resize(static_cast<std::size_t>(spd));
        slots[static_cast<std::size_t>((tod - open) / width)].push_back(t->price * t->volume);
    }
    if (zero_volume > 0) result.skips.push_back({"windowize", "zero_volume", -1, -1, -1, zero_volume});
    if (after_hours > 0) result.skips.push_back({"windowize", "after_hours", -1, -1, -1, after_hours});

    const auto min_values = static_cast<std::size_t>(cfg.min_values_per_window);
    std::int64_t rank = 0;
    for (auto& [day, slots] : by_day) {
        if (cfg.clip_raw) {
            for (auto& values : slots) {
                if (values.size() < 2) continue;
                std::vector<double> logs(values.size());
                std::transform(values.begin(), values.end(), logs.begin(),
                               [](double v) { return std::log(v); });
                const auto clip = clip_outliers(logs, cfg.outlier_sigma);
                std::vector<double> kept;
                for (std::size_t i = 0; i < values.size(); ++i) {
                    if (clip.keep_mask[i]) kept.push_back(values[i]);
                }
                values = std::move(kept);
            }
        }
        int dropped = 0;
        for (const auto& values : slots) dropped += values.size() < min_values ? 1 : 0;
        const bool error_day = static_cast<double>(dropped) > cfg.error_day_threshold * spd;
        const std::int64_t base = error_day ? -1 : rank * spd;
        for (int slot = 0; slot < spd; ++slot) {
            const auto& values = slots[static_cast<std::size_t>(slot)];
            if (values.size() < min_values) {
                result.skips.push_back({"windowize", "below_min_values", day,
                                        error_day ? -1 : base + slot, slot, values.size()});
            }
        }
        if (error_day) {
            result.skips.push_back({"windowize", "error_day", day, -1, -1,
                                    static_cast<std::size_t>(dropped)});
            continue;
        }
        for (int slot = 0; slot < spd; ++slot) {
            auto& values = slots[static_cast<std::size_t>(slot)];
            if (values.size() < min_values) continue;
            result.windows.push_back({base + slot, slot, std::move(values)});
        }
        result.days.push_back(day);
        ++rank;
    }
    return result;
}

}  // namespace superstat
