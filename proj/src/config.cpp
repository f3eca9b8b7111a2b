#include "kanop/config.hpp"

#include "kanop/greeks.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <utility>

namespace kanop {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view why) {
    throw ConfigError("config field '" + std::string(key) + "': " + std::string(why) + " (got '" +
                      std::string(value) + "')");
}

double to_double(std::string_view key, std::string_view value) {
    try {
        std::size_t used = 0;
        const std::string text(value);
        const double v = std::stod(text, &used);
        if (used != text.size()) bad(key, value, "not a number");
        return v;
    } catch (const std::logic_error&) {
        bad(key, value, "not a number");
    }
}

template <typename Int>
Int to_int(std::string_view key, std::string_view value) {
    Int v{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) bad(key, value, "not an integer");
    return v;
}

bool to_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    bad(key, value, "expected true or false");
}

std::vector<int> to_int_list(std::string_view key, std::string_view value) {
    std::vector<int> out;
    std::string item;
    std::stringstream in{std::string(value)};
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(to_int<int>(key, item));
    }
    return out;
}

std::string join(const std::vector<int>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename Parse>
auto parse_enum(std::string_view key, std::string_view value, Parse parse) {
    try {
        return parse(value);
    } catch (const std::invalid_argument& e) {
        bad(key, value, e.what());
    }
}

using Setter = std::function<void(ExperimentConfig&, std::string_view, std::string_view)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Field {
    std::string key;
    Setter set;
    Getter get;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"spot", [](auto& c, auto k, auto v) { c.market.spot = to_double(k, v); },
         [](const auto& c) { return format_double(c.market.spot); }},
        {"strike", [](auto& c, auto k, auto v) { c.market.strike = to_double(k, v); },
         [](const auto& c) { return format_double(c.market.strike); }},
        {"sigma", [](auto& c, auto k, auto v) { c.market.sigma_y = to_double(k, v); },
         [](const auto& c) { return format_double(c.market.sigma_y); }},
        {"rate", [](auto& c, auto k, auto v) { c.market.r_y = to_double(k, v); },
         [](const auto& c) { return format_double(c.market.r_y); }},
        {"dividend", [](auto& c, auto k, auto v) { c.market.div_y = to_double(k, v); },
         [](const auto& c) { return format_double(c.market.div_y); }},
        {"n_steps", [](auto& c, auto k, auto v) { c.market.n_steps = to_int<int>(k, v); },
         [](const auto& c) { return std::to_string(c.market.n_steps); }},
        {"step_unit", [](auto& c, auto k, auto v) { c.market.step_unit = parse_enum(k, v, parse_step_unit); },
         [](const auto& c) { return std::string(to_string(c.market.step_unit)); }},
        {"periods_per_year", [](auto& c, auto k, auto v) { c.market.periods_per_year = to_int<int>(k, v); },
         [](const auto& c) { return std::to_string(c.market.periods_per_year); }},
        {"product", [](auto& c, auto k, auto v) { c.product = parse_enum(k, v, parse_product_kind); },
         [](const auto& c) { return std::string(to_string(c.product)); }},
        {"exercise_stride", [](auto& c, auto k, auto v) { c.exercise_stride = to_int<int>(k, v); },
         [](const auto& c) { return std::to_string(c.exercise_stride); }},
        {"twap_convention", [](auto& c, auto k, auto v) { c.twap = parse_enum(k, v, parse_twap_convention); },
         [](const auto& c) { return std::string(to_string(c.twap)); }},
        {"model", [](auto& c, auto k, auto v) { c.model.kind = parse_enum(k, v, parse_model_kind); },
         [](const auto& c) { return std::string(to_string(c.model.kind)); }},
        {"basis_order", [](auto& c, auto k, auto v) { c.model.basis_order = to_int<int>(k, v); },
         [](const auto& c) { return std::to_string(c.model.basis_order); }},
        {"normalize_inputs", [](auto& c, auto k, auto v) { c.model.normalize_inputs = to_bool(k, v); },
         [](const auto& c) { return std::string(c.model.normalize_inputs ? "true" : "false"); }},
        {"kan_hidden", [](auto& c, auto k, auto v) { c.model.kan_hidden = to_int<int>(k, v); },
         [](const auto& c) { return std::to_string(c.model.kan_hidden); }},
        {"kan_grid", [](auto& c, auto k, auto v) { c.model.kan_grid = to_int<int>(k, v); },
         [](const auto& c) { return std::to_string(c.model.kan_grid); }},
        {"kan_order", [](auto& c, auto k, auto v) { c.model.kan_order = to_int<int>(k, v); },
         [](const auto& c) { return std::to_string(c.model.kan_order); }},
        {"mlp_hidden", [](auto& c, auto k, auto v) { c.model.mlp_hidden = to_int_list(k, v); },
         [](const auto& c) { return join(c.model.mlp_hidden); }},
        {"mlp_activation", [](auto& c, auto k, auto v) { c.model.mlp_activation = parse_enum(k, v, parse_activation); },
         [](const auto& c) { return std::string(to_string(c.model.mlp_activation)); }},
        {"learning_rate", [](auto& c, auto k, auto v) { c.model.train.learning_rate = to_double(k, v); },
         [](const auto& c) { return format_double(c.model.train.learning_rate); }},
        {"epochs", [](auto& c, auto k, auto v) { c.model.train.epochs = to_int<int>(k, v); },
         [](const auto& c) { return std::to_string(c.model.train.epochs); }},
        {"early_stop_patience", [](auto& c, auto k, auto v) { c.model.train.early_stop_patience = to_int<int>(k, v); },
         [](const auto& c) { return std::to_string(c.model.train.early_stop_patience); }},
        {"train_seed", [](auto& c, auto k, auto v) { c.model.train.seed = to_int<std::uint64_t>(k, v); },
         [](const auto& c) { return std::to_string(c.model.train.seed); }},
        {"n_paths", [](auto& c, auto k, auto v) { c.n_paths = to_int<Eigen::Index>(k, v); },
         [](const auto& c) { return std::to_string(c.n_paths); }},
        {"mlp_path_multiplier", [](auto& c, auto k, auto v) { c.mlp_path_multiplier = to_int<int>(k, v); },
         [](const auto& c) { return std::to_string(c.mlp_path_multiplier); }},
        {"seed", [](auto& c, auto k, auto v) { c.seed = to_int<std::uint64_t>(k, v); },
         [](const auto& c) { return std::to_string(c.seed); }},
        {"itm_only", [](auto& c, auto k, auto v) { c.itm_only = to_bool(k, v); },
         [](const auto& c) { return std::string(c.itm_only ? "true" : "false"); }},
        {"dump_dates", [](auto& c, auto k, auto v) { c.dump_dates = to_int_list(k, v); },
         [](const auto& c) { return join(c.dump_dates); }},
        {"out_dir", [](auto& c, auto, auto v) { c.out_dir = std::string(v); },
         [](const auto& c) { return c.out_dir; }},
    };
    return table;
}

ExperimentConfig table1() {
    ExperimentConfig c;
    c.preset = "table1";
    c.market.spot = 4.0;
    c.market.strike = 4.0;
    c.market.sigma_y = 0.2;
    c.market.r_y = 0.0;
    c.market.div_y = 0.0;
    c.market.n_steps = 50;
    c.market.step_unit = StepUnit::day;
    c.market.periods_per_year = 252;
    c.product = ProductKind::american_put;
    c.model.kind = ModelKind::kan;
    c.model.basis_order = 6;
    c.model.normalize_inputs = false;
    c.model.mlp_hidden = {32, 32};
    c.dump_dates = {49, 25, 1};
    return c;
}

ExperimentConfig table2(int column) {
    static const double strikes[] = {100.0, 100.0, 100.0, 105.0};
    static const int weeks[] = {13, 13, 26, 26};
    static const double vols[] = {0.15, 0.25, 0.25, 0.25};
    ExperimentConfig c;
    c.preset = "table2-" + std::to_string(column);
    c.market.spot = 100.0;
    c.market.strike = strikes[column - 1];
    c.market.sigma_y = vols[column - 1];
    c.market.r_y = 0.05;
    c.market.div_y = 0.0;
    c.market.n_steps = weeks[column - 1];
    c.market.step_unit = StepUnit::week;
    c.market.periods_per_year = 52;
    c.product = ProductKind::asian_american_call;
    c.twap = TwapConvention::exclude_t0;
    c.model.kind = ModelKind::kan;
    c.model.basis_order = 4;
    c.model.normalize_inputs = true;
    c.model.mlp_hidden = {32, 32};
    const int n = c.market.n_steps;
    c.dump_dates = {n - 1, n / 2, 1};
    return c;
}

ExperimentConfig euro_delta() {
    ExperimentConfig c;
    c.preset = "euro-delta";
    c.market = euro_delta_market();
    c.product = ProductKind::american_call;
    c.model.kind = ModelKind::oracle;
    c.n_paths = 500000;
    return c;
}

ExperimentConfig degenerate() {
    ExperimentConfig c = table1();
    c.preset = "degenerate";
    c.market.sigma_y = 0.0;
    c.n_paths = 1000;
    return c;
}

ExperimentConfig deep_itm_put() {
    ExperimentConfig c = table1();
    c.preset = "deep-itm-put";
    c.market.sigma_y = 0.0;
    c.market.spot = 2.0;
    c.model.kind = ModelKind::hermite;
    c.n_paths = 1000;
    return c;
}

}  // namespace

void ExperimentConfig::validate() const {
    try {
        market.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config market: ") + e.what());
    }
    if (n_paths < 1) throw ConfigError("config field 'n_paths': must be at least 1");
    if (mlp_path_multiplier < 1) throw ConfigError("config field 'mlp_path_multiplier': must be at least 1");
    if (exercise_stride < 1 || market.n_steps % exercise_stride != 0)
        throw ConfigError("config field 'exercise_stride': must divide n_steps");
    if (model.basis_order < 1) throw ConfigError("config field 'basis_order': must be at least 1");
    if (model.kan_hidden < 0) throw ConfigError("config field 'kan_hidden': must be non-negative");
    if (model.kan_grid < 1) throw ConfigError("config field 'kan_grid': must be at least 1");
    if (model.kan_order < 1 || model.kan_order > 31) throw ConfigError("config field 'kan_order': must be in 1..31");
    for (int h : model.mlp_hidden)
        if (h < 1) throw ConfigError("config field 'mlp_hidden': widths must be positive");
    try {
        model.train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config training: ") + e.what());
    }
    if (model.kind == ModelKind::laguerre_cross && product != ProductKind::asian_american_call)
        throw ConfigError("config field 'model': laguerre_cross needs the two-input asian product");
    if (model.kind == ModelKind::oracle && product == ProductKind::asian_american_call)
        throw ConfigError("config field 'model': no closed-form oracle for asian products");
    for (int d : dump_dates)
        if (d < 1 || d >= market.n_steps || d % exercise_stride != 0)
            throw ConfigError("config field 'dump_dates': " + std::to_string(d) + " is not an interior exercise date");
    if (out_dir.empty()) throw ConfigError("config field 'out_dir': must not be empty");
}

Product ExperimentConfig::make_product() const {
    Product p{product, market.strike, exercise_grid(market.n_steps, exercise_stride)};
    p.validate();
    return p;
}

Eigen::Index ExperimentConfig::model_paths() const {
    return model.kind == ModelKind::mlp ? n_paths * mlp_path_multiplier : n_paths;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out{"preset"};
        for (const Field& f : fields()) out.push_back(f.key);
        return out;
    }();
    return keys;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"table1",   "table2",     "table2-1",   "table2-2",
                                                   "table2-3", "table2-4",   "euro-delta", "degenerate",
                                                   "deep-itm-put"};
    return names;
}

ExperimentConfig preset_config(std::string_view name) {
    if (name == "table1") return table1();
    if (name == "table2" || name == "table2-1") return table2(1);
    if (name == "table2-2") return table2(2);
    if (name == "table2-3") return table2(3);
    if (name == "table2-4") return table2(4);
    if (name == "euro-delta") return euro_delta();
    if (name == "degenerate") return degenerate();
    if (name == "deep-itm-put") return deep_itm_put();
    throw ConfigError("config field 'preset': unknown preset '" + std::string(name) + "'");
}

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    for (const Field& f : fields()) {
        if (f.key == key) {
            f.set(cfg, key, value);
            return;
        }
    }
    throw ConfigError("config field '" + std::string(key) + "': unknown key");
}

ExperimentConfig parse_config(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        entries.emplace_back(trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
    }

    ExperimentConfig cfg;
    for (const auto& [key, value] : entries)
        if (key == "preset") cfg = preset_config(value);
    std::map<std::string, int> seen;
    for (const auto& [key, value] : entries) {
        if (++seen[key] > 1) throw ConfigError("config field '" + key + "': given more than once");
        if (key != "preset") set_config_value(cfg, key, value);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string to_config_text(const ExperimentConfig& cfg) {
    std::string out;
    if (!cfg.preset.empty()) out += "preset = " + cfg.preset + "\n";
    for (const Field& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
    return out;
}

}  // namespace kanop
