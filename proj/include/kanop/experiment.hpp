#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kanop/config.hpp"
#include "kanop/greeks.hpp"
#include "kanop/lsmc.hpp"

namespace kanop {

using ProgressFn = std::function<void(const std::string&)>;

/// `n_paths` rows from cfg.seed, with the running average attached when the
/// product needs one.
PathSet simulate_paths(const ExperimentConfig& cfg, Eigen::Index n_paths);

/// First `n` paths of a larger set. Equal to simulating `n` paths directly.
PathSet head_rows(const PathSet& paths, Eigen::Index n);

struct ModelRun {
    ModelKind kind = ModelKind::kan;
    PricingResult price;
    std::optional<PricingResult> eurasian;  // asian products only
    std::optional<DeltaResult> delta;
    FitCurveDump dump;
    double seconds = 0.0;
};

/// Prices cfg.model on the given paths; dumps cfg.dump_dates with the
/// closed-form continuation as truth for vanilla products.
ModelRun run_model(const ExperimentConfig& cfg, const PathSet& paths, bool with_delta);

/// Simulates cfg.model_paths() paths and runs the configured model.
ModelRun run_config(const ExperimentConfig& cfg, bool with_delta);

/// Delta with the t1 continuation replaced by the closed-form value.
DeltaResult run_oracle_delta(const ExperimentConfig& cfg);

struct TableCell {
    double reference = 0.0;  // value listed in the reference table, NaN if none
    double target = 0.0;  // what the reproduced value is compared with
    double value = 0.0;   // NaN when the row is reference-only
    double std_error = 0.0;

    double error() const { return value - target; }
};

struct TableRow {
    std::string label;
    std::vector<TableCell> cells;
    double seconds = 0.0;
};

struct ReproTable {
    std::string title;
    std::vector<std::string> columns;
    std::vector<TableRow> rows;

    const TableRow* find(const std::string& label) const;
};

/// American put: reference row plus one price and delta row per model, all
/// on the shared paths of `base` (the MLP on its superset).
ReproTable reproduce_table1(const ExperimentConfig& base, const std::vector<ModelKind>& models,
                            const ProgressFn& progress = {});

/// Asian American call over the four reference parameter columns; `base`
/// supplies seed, path counts and training settings.
ReproTable reproduce_table2(const ExperimentConfig& base, const std::vector<ModelKind>& models,
                            const ProgressFn& progress = {});

/// Row label used in the reproduction tables.
std::string model_label(ModelKind kind);

/// Aligned plain text: reference, reproduced and error per cell.
std::string format_table(const ReproTable& table);

}  // namespace kanop
