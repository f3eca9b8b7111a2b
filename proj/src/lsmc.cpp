#include "kanop/lsmc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace kanop {

namespace {

std::pair<double, double> mean_and_stderr(const Vector& values) {
    const double n = double(values.size());
    const double mean = values.mean();
    const double var = values.size() > 1 ? (values.array() - mean).square().sum() / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

Matrix select_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
    Matrix out(Eigen::Index(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(Eigen::Index(i)) = m.row(rows[i]);
    return out;
}

}  // namespace

Vector regression_targets(const CashflowState& state, int k, double r_y, double dt_years) {
    Vector out(state.n_paths());
    for (Eigen::Index p = 0; p < state.n_paths(); ++p)
        out[p] = state.amount[p] == 0.0 ? 0.0 : state.amount[p] * std::exp(-r_y * (state.date[p] - k) * dt_years);
    return out;
}

LsmcRun lsmc_price(const PathSet& paths, const Product& product, const ModelFactory& factory,
                   const LsmcConfig& cfg) {
    product.validate(&paths);
    const Eigen::Index n = paths.n_paths();
    const int maturity = product.maturity_index();
    const double dt = paths.dt_years;

    LsmcRun run;
    PricingResult& result = run.result;
    result.n_paths = n;
    result.seed = paths.seed;
    result.exercise_fraction.assign(maturity + 1, 0.0);
    result.fit_mse.assign(maturity + 1, std::numeric_limits<double>::quiet_NaN());

    CashflowState& state = run.final_state;
    state.amount = intrinsic_at(product, paths, maturity).cwiseMax(0.0);
    state.date = Eigen::VectorXi::Constant(n, maturity);

    const auto& dates = product.exercise_dates;
    for (auto it = dates.rbegin() + 1; it != dates.rend(); ++it) {
        const int k = *it;
        const Vector targets = regression_targets(state, k, cfg.rate, dt);
        if (k == dates.front()) run.first_date_targets = targets;

        const Matrix x = features(product, paths, k);
        const Vector iv = intrinsic_at(product, paths, k);

        std::vector<Eigen::Index> fit_rows;
        if (cfg.itm_only) {
            for (Eigen::Index p = 0; p < n; ++p)
                if (iv[p] > 0.0) fit_rows.push_back(p);
        }
        const bool subset = cfg.itm_only;
        const Eigen::Index n_fit = subset ? Eigen::Index(fit_rows.size()) : n;
        const Vector fit_targets = subset ? Vector(targets(fit_rows)) : targets;

        Vector fitted = Vector::Zero(n);
        const bool degenerate = n_fit == 0 || (fit_targets.array() == 0.0).all();
        if (!degenerate) {
            auto model = factory(k);
            run.model_instances.push_back(model->instance_id());
            if (result.model_kind.empty()) result.model_kind = std::string(model->kind());
            try {
                result.fit_mse[k] = subset ? model->fit(select_rows(x, fit_rows), fit_targets) : model->fit(x, targets);
                fitted = model->predict(x);
            } catch (const NumericFailure& e) {
                throw NumericFailure("model fit failed at step " + std::to_string(k) + ": " + e.what());
            } catch (const std::exception& e) {
                throw std::runtime_error("model fit failed at step " + std::to_string(k) + ": " + e.what());
            }
        } else {
            result.fit_mse[k] = fit_targets.size() ? fit_targets.squaredNorm() / double(fit_targets.size()) : 0.0;
        }

        Eigen::Index exercised = 0;
        for (Eigen::Index p = 0; p < n; ++p) {
            if (iv[p] > 0.0 && iv[p] > fitted[p]) {
                state.amount[p] = iv[p];
                state.date[p] = k;
                ++exercised;
            }
        }
        result.exercise_fraction[k] = double(exercised) / double(n);

        if (std::find(cfg.dump_dates.begin(), cfg.dump_dates.end(), k) != cfg.dump_dates.end()) {
            FitCurve curve{k, x, fitted, std::nullopt};
            if (cfg.true_continuation) curve.truth = cfg.true_continuation(x, k);
            run.dump.push_back(std::move(curve));
        }
        if (cfg.on_step) cfg.on_step(k, state);
    }

    const Vector discounted = regression_targets(state, 0, cfg.rate, dt);
    std::tie(result.price, result.std_error) = mean_and_stderr(discounted);
    std::reverse(run.dump.begin(), run.dump.end());
    return run;
}

PricingResult eurasian_price(const PathSet& paths, const Product& product, double rate) {
    product.validate(&paths);
    const int maturity = product.maturity_index();
    const Vector payoff = intrinsic_at(product, paths, maturity).cwiseMax(0.0) *
                          std::exp(-rate * maturity * paths.dt_years);
    PricingResult result;
    result.n_paths = paths.n_paths();
    result.seed = paths.seed;
    result.model_kind = "european";
    std::tie(result.price, result.std_error) = mean_and_stderr(payoff);
    result.exercise_fraction.assign(maturity + 1, 0.0);
    result.fit_mse.assign(maturity + 1, std::numeric_limits<double>::quiet_NaN());
    return result;
}

void write_fit_curve_csv(const FitCurve& curve, const std::string& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open " + file);
    out.precision(12);
    out << "path_id,date_index";
    for (Eigen::Index c = 0; c < curve.features.cols(); ++c) out << ",feature_" << c + 1;
    out << ",f_hat,f_true\n";
    for (Eigen::Index p = 0; p < curve.features.rows(); ++p) {
        out << p << ',' << curve.date;
        for (Eigen::Index c = 0; c < curve.features.cols(); ++c) out << ',' << curve.features(p, c);
        out << ',' << curve.fitted[p] << ',';
        if (curve.truth) out << (*curve.truth)[p];
        out << '\n';
    }
}

}  // namespace kanop
