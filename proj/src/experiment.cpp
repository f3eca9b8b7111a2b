#include "kanop/experiment.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

namespace kanop {

namespace {

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

bool is_vanilla(ProductKind kind) { return kind != ProductKind::asian_american_call; }

OptionKind option_kind(ProductKind kind) {
    return kind == ProductKind::american_call ? OptionKind::call : OptionKind::put;
}

BsInputs bs_inputs(const MarketSpec& m, ProductKind kind) {
    return {m.spot, m.strike, m.sigma_y, m.r_y, m.div_y, m.maturity_years(), option_kind(kind)};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs the jobs, concurrently when more than one core is available. Each
// job is deterministic on its own, so the schedule never changes results.
template <typename T>
std::vector<T> run_all(std::vector<std::function<T()>> jobs) {
    std::vector<T> out;
    out.reserve(jobs.size());
    if (std::thread::hardware_concurrency() <= 1 || jobs.size() < 2) {
        for (auto& job : jobs) out.push_back(job());
        return out;
    }
    std::vector<std::future<T>> futures;
    for (auto& job : jobs) futures.push_back(std::async(std::launch::async, job));
    for (auto& f : futures) out.push_back(f.get());
    return out;
}

TableCell cell(double reference, double target, double value, double se) { return {reference, target, value, se}; }

}  // namespace

PathSet simulate_paths(const ExperimentConfig& cfg, Eigen::Index n_paths) {
    PathSet paths = simulate_gbm(cfg.market, n_paths, cfg.seed);
    if (cfg.product == ProductKind::asian_american_call) paths = augment_twap(std::move(paths), cfg.twap);
    return paths;
}

PathSet head_rows(const PathSet& paths, Eigen::Index n) {
    if (n < 1 || n > paths.n_paths()) throw std::invalid_argument("head_rows: row count out of range");
    PathSet out;
    out.prices = paths.prices.topRows(n);
    if (paths.twap) out.twap = paths.twap->topRows(n);
    out.dt_years = paths.dt_years;
    out.seed = paths.seed;
    return out;
}

ModelRun run_model(const ExperimentConfig& cfg, const PathSet& paths, bool with_delta) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const Product product = cfg.make_product();

    LsmcConfig lsmc;
    lsmc.rate = cfg.market.r_y;
    lsmc.itm_only = cfg.itm_only;
    lsmc.dump_dates = cfg.dump_dates;
    if (is_vanilla(cfg.product) && !cfg.dump_dates.empty()) {
        const ModelFactory oracle = make_oracle_factory(product, cfg.market);
        lsmc.true_continuation = [oracle](const Matrix& x, int k) { return oracle(k)->predict(x); };
    }

    const ModelFactory factory = make_model_factory(cfg.model, product, cfg.market);
    const LsmcRun run = lsmc_price(paths, product, factory, lsmc);

    ModelRun out;
    out.kind = cfg.model.kind;
    out.price = run.result;
    out.dump = run.dump;
    if (product.needs_twap()) out.eurasian = eurasian_price(paths, product, cfg.market.r_y);
    if (with_delta) {
        const auto t1 = fit_t1_model(paths, product, cfg.model, cfg.market, run.first_date_targets);
        out.delta = delta_estimate(paths, product, *t1, cfg.market);
    }
    out.seconds = seconds_since(t0);
    return out;
}

ModelRun run_config(const ExperimentConfig& cfg, bool with_delta) {
    cfg.validate();
    return run_model(cfg, simulate_paths(cfg, cfg.model_paths()), with_delta);
}

DeltaResult run_oracle_delta(const ExperimentConfig& cfg) {
    cfg.validate();
    if (!is_vanilla(cfg.product)) throw std::invalid_argument("closed-form delta check needs a vanilla product");
    return perfect_fit_delta_check(cfg.market, option_kind(cfg.product), cfg.n_paths, cfg.seed);
}

const TableRow* ReproTable::find(const std::string& label) const {
    for (const TableRow& row : rows)
        if (row.label == label) return &row;
    return nullptr;
}

std::string model_label(ModelKind kind) {
    switch (kind) {
        case ModelKind::weighted_laguerre: return "Weighted Laguerre";
        case ModelKind::hermite: return "Hermite";
        case ModelKind::laguerre: return "Laguerre";
        case ModelKind::laguerre_cross: return "Laguerre";
        case ModelKind::kan: return "KAN";
        case ModelKind::mlp: return "MLP";
        case ModelKind::oracle: return "Closed-form F";
    }
    return "?";
}

ReproTable reproduce_table1(const ExperimentConfig& base, const std::vector<ModelKind>& models,
                            const ProgressFn& progress) {
    base.validate();
    if (base.product != ProductKind::american_put) throw ConfigError("config field 'product': table1 needs american_put");

    // Reference rows: Black-Scholes, Weighted Laguerre, Hermite, MLP, KAN.
    struct Reference {
        double price, delta;
    };
    auto reference_values = [](ModelKind kind) -> Reference {
        switch (kind) {
            case ModelKind::weighted_laguerre: return {0.1395, -0.4876};
            case ModelKind::hermite: return {0.1407, -0.4899};
            case ModelKind::mlp: return {0.1384, -0.4976};
            case ModelKind::kan: return {0.1427, -0.4970};
            default: return {nan_value, nan_value};
        }
    };

    const BsInputs bs = bs_inputs(base.market, base.product);
    const double bs_p = bs_price(bs);
    const double bs_d = bs_delta(bs);

    ReproTable table;
    table.title = "American put price and delta";
    table.columns = {"price", "delta"};
    // The reference table lists -0.5000 for this delta; the closed form gives bs_d.
    table.rows.push_back({"Black-Scholes", {cell(0.1421, bs_p, bs_p, 0.0), cell(-0.5000, bs_d, bs_d, 0.0)}, 0.0});

    bool need_superset = false;
    for (ModelKind kind : models) need_superset = need_superset || kind == ModelKind::mlp;
    ExperimentConfig mlp_cfg = base;
    mlp_cfg.model.kind = ModelKind::mlp;
    const PathSet all = simulate_paths(base, need_superset ? mlp_cfg.model_paths() : base.n_paths);
    const PathSet shared = need_superset ? head_rows(all, base.n_paths) : all;

    std::vector<std::function<TableRow()>> jobs;
    for (ModelKind kind : models) {
        jobs.push_back([&, kind] {
            ExperimentConfig cfg = base;
            cfg.model.kind = kind;
            cfg.dump_dates.clear();
            const ModelRun run = run_model(cfg, kind == ModelKind::mlp ? all : shared, true);
            const Reference pub = reference_values(kind);
            if (progress) progress(model_label(kind) + " done in " + std::to_string(run.seconds) + " s");
            return TableRow{model_label(kind),
                            {cell(pub.price, bs_p, run.price.price, run.price.std_error),
                             cell(pub.delta, bs_d, run.delta->delta, run.delta->std_error)},
                            run.seconds};
        });
    }
    for (TableRow& row : run_all(std::move(jobs))) table.rows.push_back(std::move(row));
    return table;
}

ReproTable reproduce_table2(const ExperimentConfig& base, const std::vector<ModelKind>& models,
                            const ProgressFn& progress) {
    static const double eurasian_ref[] = {2.1638, 3.3621, 4.7659, 2.6628};
    static const double american_ref[] = {2.3210, 3.6500, 5.2660, 2.8580};
    auto reference_values = [](ModelKind kind, int c) {
        static const double laguerre[] = {2.2750, 3.5716, 5.0719, 2.7162};
        static const double mlp[] = {2.2601, 3.6134, 5.1422, 2.7943};
        static const double kan[] = {2.3216, 3.6589, 5.2382, 2.8309};
        switch (kind) {
            case ModelKind::laguerre_cross: return laguerre[c];
            case ModelKind::mlp: return mlp[c];
            case ModelKind::kan: return kan[c];
            default: return nan_value;
        }
    };

    ReproTable table;
    table.title = "Asian American call price";
    TableRow eurasian{"Eurasian", {}, 0.0};
    TableRow reference{"Asian American", {}, 0.0};
    std::vector<TableRow> model_rows;
    for (ModelKind kind : models) model_rows.push_back({model_label(kind), {}, 0.0});

    for (int c = 0; c < 4; ++c) {
        ExperimentConfig col = preset_config("table2-" + std::to_string(c + 1));
        col.model = base.model;
        col.seed = base.seed;
        col.n_paths = base.n_paths;
        col.mlp_path_multiplier = base.mlp_path_multiplier;
        col.itm_only = base.itm_only;
        col.twap = base.twap;
        col.dump_dates.clear();
        col.validate();
        table.columns.push_back("K=" + std::to_string(int(col.market.strike)) + " T=" +
                                std::to_string(col.market.n_steps) + "w s=" +
                                std::to_string(int(std::lround(col.market.sigma_y * 100))) + "%");

        bool need_superset = false;
        for (ModelKind kind : models) need_superset = need_superset || kind == ModelKind::mlp;
        ExperimentConfig mlp_cfg = col;
        mlp_cfg.model.kind = ModelKind::mlp;
        const PathSet all = simulate_paths(col, need_superset ? mlp_cfg.model_paths() : col.n_paths);
        const PathSet shared = need_superset ? head_rows(all, col.n_paths) : all;

        const PricingResult euro = eurasian_price(shared, col.make_product(), col.market.r_y);
        eurasian.cells.push_back(cell(eurasian_ref[c], eurasian_ref[c], euro.price, euro.std_error));
        reference.cells.push_back(cell(american_ref[c], american_ref[c], nan_value, 0.0));

        std::vector<std::function<ModelRun()>> jobs;
        for (ModelKind kind : models) {
            jobs.push_back([&, kind] {
                ExperimentConfig cfg = col;
                cfg.model.kind = kind;
                return run_model(cfg, kind == ModelKind::mlp ? all : shared, false);
            });
        }
        const std::vector<ModelRun> runs = run_all(std::move(jobs));
        for (std::size_t i = 0; i < runs.size(); ++i) {
            model_rows[i].cells.push_back(
                cell(reference_values(models[i], c), american_ref[c], runs[i].price.price, runs[i].price.std_error));
            model_rows[i].seconds += runs[i].seconds;
            if (progress)
                progress(model_label(models[i]) + " column " + std::to_string(c + 1) + " done in " +
                         std::to_string(runs[i].seconds) + " s");
        }
    }
    table.rows.push_back(std::move(eurasian));
    table.rows.push_back(std::move(reference));
    for (TableRow& row : model_rows) table.rows.push_back(std::move(row));
    return table;
}

std::string format_table(const ReproTable& table) {
    auto num = [](double v, int digits) {
        if (std::isnan(v)) return std::string("-");
        std::ostringstream out;
        out << std::fixed << std::setprecision(digits) << v;
        return out.str();
    };

    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> head{""}, sub{"model"};
    for (const std::string& col : table.columns) {
        head.insert(head.end(), {col, "", "", ""});
        sub.insert(sub.end(), {"ref", "ours", "se", "|err|"});
    }
    head.push_back("");
    sub.push_back("time s");
    grid.push_back(head);
    grid.push_back(sub);
    for (const TableRow& row : table.rows) {
        std::vector<std::string> line{row.label};
        for (const TableCell& c : row.cells) {
            const bool has_value = !std::isnan(c.value);
            line.push_back(num(c.reference, 4));
            line.push_back(num(c.value, 4));
            line.push_back(has_value && c.std_error > 0.0 ? num(c.std_error, 4) : "-");
            line.push_back(has_value ? num(std::abs(c.error()), 4) : "-");
        }
        line.push_back(row.seconds > 0.0 ? num(row.seconds, 1) : "-");
        grid.push_back(std::move(line));
    }

    std::vector<std::size_t> width(grid[1].size(), 0);
    for (const auto& line : grid)
        for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());

    std::ostringstream out;
    out << table.title << "\n";
    for (const auto& line : grid) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (i == 0)
                out << std::left << std::setw(int(width[i])) << line[i];
            else
                out << "  " << std::right << std::setw(int(width[i])) << line[i];
        }
        out << "\n";
    }
    out << "|err| is the distance to each row's benchmark: the closed form for table1, the Eurasian or Asian American reference for table2.\n";
    return out.str();
}

}  // namespace kanop
