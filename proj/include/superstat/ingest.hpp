#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace superstat {

struct TickRecord {
    std::string asset_id;
    std::int64_t timestamp = 0;  // seconds since epoch, UTC
    double price = 0.0;
    double volume = 0.0;

    friend bool operator==(const TickRecord&, const TickRecord&) = default;
};

enum class TickFormat { csv, jsonl };

TickFormat parse_tick_format(std::string_view name);

/// Reads ticks from CSV (`asset,timestamp,price,volume`, timestamps either
/// integer epoch seconds or ISO-8601, detected from the first data row) or
/// JSONL with the same keys. Output is sorted by (asset, timestamp).
/// Throws InputError naming the offending line.
std::vector<TickRecord> parse_ticks(std::istream& in, TickFormat format);
std::vector<TickRecord> load_ticks(const std::filesystem::path& path, TickFormat format);

void write_ticks_csv(std::ostream& out, std::span<const TickRecord> ticks);

/// Parses `YYYY-MM-DDTHH:MM:SS[Z|±HH:MM]` (a space may replace the `T`).
std::int64_t parse_iso8601(std::string_view text);

enum class Pooling { pooled, single_asset };

struct IngestConfig {
    int window_minutes = 10;
    int trading_open_minutes = 9 * 60 + 30;
    int trading_close_minutes = 16 * 60;
    int utc_offset_minutes = 0;  // added to timestamps before taking time of day
    double outlier_sigma = 5.0;
    int min_values_per_window = 10;
    double error_day_threshold = 0.2;  // fraction of dropped windows that discards a day
    bool clip_raw = false;             // clip log s within each window
    Pooling pooling = Pooling::pooled;
    std::string asset;  // used when pooling == single_asset

    void validate() const;
    int slots_per_day() const;
    /// Trading open expressed in window units from midnight.
    int open_slot() const;
};

struct WindowSample {
    std::int64_t window_index = 0;
    int intraday_slot = 0;
    std::vector<double> values;  // s = price * volume, all > 0
};

/// One record of dropped data. Serialized as a JSON object per line.
struct SkipEntry {
    std::string stage;
    std::string reason;
    std::int64_t day = -1;           // epoch day
    std::int64_t window_index = -1;  // -1 when not yet assigned
    int slot = -1;
    std::size_t count = 0;
};

using SkipLog = std::vector<SkipEntry>;

void write_skip_log(std::ostream& out, const SkipLog& log);

struct WindowingResult {
    std::vector<WindowSample> windows;
    SkipLog skips;
    int slots_per_day = 0;
    int open_slot = 0;
    std::vector<std::int64_t> days;  // epoch day of each retained day, by rank
};

/// Groups volume-price products into fixed-width intraday windows. Windows
/// are indexed globally as day_rank * slots_per_day + slot over retained days.
WindowingResult windowize(std::span<const TickRecord> ticks, const IngestConfig& cfg);

struct ClipResult {
    std::vector<double> kept;
    std::vector<bool> keep_mask;
    std::size_t removed = 0;
};

/// Keeps values within mean ± sigma * std (population std) of the input.
ClipResult clip_outliers(std::span<const double> series, double sigma);

}  // namespace superstat
