#include "superstat/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "superstat/csv.hpp"
#include "superstat/error.hpp"

namespace superstat {

namespace {

template <typename E>
struct EnumNames {
    std::vector<std::pair<E, std::string_view>> names;

    std::string_view name(E e) const {
        for (const auto& [v, s] : names) {
            if (v == e) return s;
        }
        return "?";
    }
    E parse(std::string_view text, std::string_view key) const {
        for (const auto& [v, s] : names) {
            if (s == text) return v;
        }
        throw InputError(fmt::format("config: invalid value '{}' for {}", text, key));
    }
};

const EnumNames<TickFormat> kFormats{{{TickFormat::csv, "csv"}, {TickFormat::jsonl, "jsonl"}}};
const EnumNames<Pooling> kPooling{{{Pooling::pooled, "pooled"}, {Pooling::single_asset, "single_asset"}}};
const EnumNames<PatternMethod> kMethods{
    {{PatternMethod::global_mean, "global_mean"}, {PatternMethod::moving_mean, "moving_mean"}}};
const EnumNames<MovingAlignment> kAlignments{
    {{MovingAlignment::centered, "centered"}, {MovingAlignment::trailing, "trailing"}}};
const EnumNames<DiffusionConvention> kConventions{
    {{DiffusionConvention::increments, "increments"}, {DiffusionConvention::factorial, "factorial"}}};

struct Field {
    std::string key;  // section.name
    bool canonical;
    std::function<std::string(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, std::string_view)> set;
};

double parse_double(std::string_view v, std::string_view key) {
    try {
        return csv::to_double(v, 0);
    } catch (const InputError&) {
        throw InputError(fmt::format("config: '{}' is not a number for {}", v, key));
    }
}

std::int64_t parse_int(std::string_view v, std::string_view key) {
    try {
        return csv::to_int(v, 0);
    } catch (const InputError&) {
        throw InputError(fmt::format("config: '{}' is not an integer for {}", v, key));
    }
}

bool parse_bool(std::string_view v, std::string_view key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InputError(fmt::format("config: '{}' is not a boolean for {}", v, key));
}

template <typename T, typename Acc>
Field int_field(std::string key, Acc acc, bool canonical = true) {
    return {key, canonical, [acc](const PipelineConfig& c) { return fmt::format("{}", acc(const_cast<PipelineConfig&>(c))); },
            [acc, key](PipelineConfig& c, std::string_view v) { acc(c) = static_cast<T>(parse_int(v, key)); }};
}

template <typename Acc>
Field double_field(std::string key, Acc acc) {
    return {key, true, [acc](const PipelineConfig& c) { return fmt::format("{}", acc(const_cast<PipelineConfig&>(c))); },
            [acc, key](PipelineConfig& c, std::string_view v) { acc(c) = parse_double(v, key); }};
}

template <typename Acc>
Field bool_field(std::string key, Acc acc) {
    return {key, true,
            [acc](const PipelineConfig& c) { return std::string(acc(const_cast<PipelineConfig&>(c)) ? "true" : "false"); },
            [acc, key](PipelineConfig& c, std::string_view v) { acc(c) = parse_bool(v, key); }};
}

template <typename E, typename Acc>
Field enum_field(std::string key, const EnumNames<E>& names, Acc acc) {
    return {key, true,
            [acc, &names](const PipelineConfig& c) { return std::string(names.name(acc(const_cast<PipelineConfig&>(c)))); },
            [acc, key, &names](PipelineConfig& c, std::string_view v) { acc(c) = names.parse(v, key); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = [] {
        using C = PipelineConfig;
        std::vector<Field> v;
        v.push_back(int_field<std::uint64_t>("general.seed", [](C& c) -> auto& { return c.seed; }));
        v.push_back(int_field<int>("general.threads", [](C& c) -> auto& { return c.threads; }, false));
        v.push_back({"general.out_dir", false, [](const C& c) { return c.out_dir; },
                     [](C& c, std::string_view s) { c.out_dir = std::string(s); }});
        v.push_back(enum_field("general.format", kFormats, [](C& c) -> auto& { return c.format; }));

        v.push_back(int_field<int>("ingest.window_minutes", [](C& c) -> auto& { return c.ingest.window_minutes; }));
        v.push_back(int_field<int>("ingest.trading_open_minutes", [](C& c) -> auto& { return c.ingest.trading_open_minutes; }));
        v.push_back(int_field<int>("ingest.trading_close_minutes", [](C& c) -> auto& { return c.ingest.trading_close_minutes; }));
        v.push_back(int_field<int>("ingest.utc_offset_minutes", [](C& c) -> auto& { return c.ingest.utc_offset_minutes; }));
        v.push_back(double_field("ingest.outlier_sigma", [](C& c) -> auto& { return c.ingest.outlier_sigma; }));
        v.push_back(int_field<int>("ingest.min_values_per_window", [](C& c) -> auto& { return c.ingest.min_values_per_window; }));
        v.push_back(double_field("ingest.error_day_threshold", [](C& c) -> auto& { return c.ingest.error_day_threshold; }));
        v.push_back(bool_field("ingest.clip_raw", [](C& c) -> auto& { return c.ingest.clip_raw; }));
        v.push_back(enum_field("ingest.pooling", kPooling, [](C& c) -> auto& { return c.ingest.pooling; }));
        v.push_back({"ingest.asset", true, [](const C& c) { return c.ingest.asset; },
                     [](C& c, std::string_view s) { c.ingest.asset = std::string(s); }});

        v.push_back(double_field("fit.theta_floor", [](C& c) -> auto& { return c.fit.theta_floor; }));

        v.push_back(enum_field("decompose.method", kMethods, [](C& c) -> auto& { return c.pattern.method; }));
        v.push_back(int_field<int>("decompose.window_days", [](C& c) -> auto& { return c.pattern.window_days; }));
        v.push_back(enum_field("decompose.alignment", kAlignments, [](C& c) -> auto& { return c.pattern.alignment; }));
        v.push_back(double_field("decompose.sigma", [](C& c) -> auto& { return c.detrend_sigma; }));

        v.push_back(int_field<int>("diagnostics.max_lag", [](C& c) -> auto& { return c.diagnostics.max_lag; }));
        v.push_back(double_field("diagnostics.noise_floor_z", [](C& c) -> auto& { return c.diagnostics.noise_floor_z; }));
        v.push_back(int_field<int>("diagnostics.markov_lag", [](C& c) -> auto& { return c.diagnostics.markov_lag; }));
        v.push_back(int_field<int>("diagnostics.markov_bins", [](C& c) -> auto& { return c.diagnostics.markov_bins; }));
        v.push_back(int_field<int>("diagnostics.pawula_tau", [](C& c) -> auto& { return c.diagnostics.pawula_tau; }));
        v.push_back(int_field<int>("diagnostics.pawula_bins", [](C& c) -> auto& { return c.diagnostics.pawula_bins; }));

        v.push_back(int_field<int>("km.bins_per_axis", [](C& c) -> auto& { return c.km.bins_per_axis; }));
        v.push_back(int_field<std::size_t>("km.min_count", [](C& c) -> auto& { return c.km.min_count; }));
        v.push_back(int_field<int>("km.max_tau", [](C& c) -> auto& { return c.km.max_tau; }));
        v.push_back(enum_field("km.convention", kConventions, [](C& c) -> auto& { return c.km.convention; }));

        v.push_back(bool_field("refine.enabled", [](C& c) -> auto& { return c.refine.enabled; }));
        v.push_back(double_field("refine.max_relative", [](C& c) -> auto& { return c.refine.max_relative; }));
        v.push_back(int_field<int>("refine.sweeps", [](C& c) -> auto& { return c.refine.sweeps; }));

        v.push_back(double_field("simulate.dt", [](C& c) -> auto& { return c.sim.dt; }));
        v.push_back(int_field<std::int64_t>("simulate.n_steps", [](C& c) -> auto& { return c.sim.n_steps; }));
        v.push_back(int_field<int>("simulate.n_paths", [](C& c) -> auto& { return c.sim.n_paths; }));
        v.push_back(double_field("simulate.divergence_bound", [](C& c) -> auto& { return c.sim.divergence_bound; }));

        v.push_back(int_field<int>("moments.max_order", [](C& c) -> auto& { return c.moments.max_order; }));
        v.push_back(int_field<int>("moments.bins", [](C& c) -> auto& { return c.moments.bins; }));
        return v;
    }();
    return f;
}

const Field& find_field(std::string_view key) {
    for (const auto& f : fields()) {
        if (f.key == key) return f;
    }
    throw InputError(fmt::format("config: unknown key '{}'", key));
}

std::string serialize(const PipelineConfig& cfg, bool canonical_only) {
    std::string out;
    std::string section;
    for (const auto& f : fields()) {
        if (canonical_only && !f.canonical) continue;
        const auto dot = f.key.find('.');
        const auto sec = f.key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) out += '\n';
            out += fmt::format("[{}]\n", sec);
            section = sec;
        }
        out += fmt::format("{} = {}\n", f.key.substr(dot + 1), f.get(cfg));
    }
    return out;
}

}  // namespace

PipelineConfig parse_config(std::string_view text) {
    PipelineConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line, section = "general";
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto t = std::string(csv::trim(line));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw InputError(fmt::format("config line {}: malformed section header", number));
            section = std::string(csv::trim(std::string_view(t).substr(1, t.size() - 2)));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw InputError(fmt::format("config line {}: expected key = value", number));
        const auto key = std::string(csv::trim(std::string_view(t).substr(0, eq)));
        const auto value = csv::trim(std::string_view(t).substr(eq + 1));
        try {
            find_field(section + "." + key).set(cfg, value);
        } catch (const InputError& e) {
            throw InputError(fmt::format("config line {}: {}", number, e.what()));
        }
    }
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(fmt::format("cannot open config '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const PipelineConfig& cfg) { return serialize(cfg, false); }

std::string canonical_config(const PipelineConfig& cfg) { return serialize(cfg, true); }

void apply_override(PipelineConfig& cfg, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw InputError(fmt::format("override '{}' must look like section.key=value", assignment));
    }
    const auto key = csv::trim(assignment.substr(0, eq));
    if (key.find('.') == std::string_view::npos) {
        throw InputError(fmt::format("override '{}' must look like section.key=value", assignment));
    }
    find_field(key).set(cfg, csv::trim(assignment.substr(eq + 1)));
}

}  // namespace superstat
