#include "rokdeepc/harness.hpp"

#include <Eigen/SVD>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <thread>

namespace rokdeepc {

double realized_cost(const CostSpec& cost, const Mat& inputs, const Mat& outputs,
                     const Mat& reference) {
    if (inputs.cols() != outputs.cols() || outputs.cols() != reference.cols())
        throw DimensionError("realized_cost: stream lengths differ");
    double value = 0.0;
    for (Eigen::Index t = 0; t < inputs.cols(); ++t) {
        value += cost.r_u * inputs.col(t).squaredNorm() +
                 cost.q_y * (outputs.col(t) - reference.col(t)).squaredNorm();
        if (t > 0) value += cost.r_delta * (inputs.col(t) - inputs.col(t - 1)).squaredNorm();
    }
    return value;
}

ClosedLoopRecord closed_loop(Controller& controller, Plant& plant, const Mat& reference,
                             int total_steps, int k, const NoiseModel& noise,
                             bool theorem_diagnostics) {
    const Dims d = controller.dims();
    if (reference.rows() != d.p)
        throw DimensionError("closed_loop: reference must have p rows");
    if (reference.cols() < total_steps)
        throw DimensionError("closed_loop: reference shorter than total_steps");
    if (total_steps < d.t_ini)
        throw DimensionError("closed_loop: total_steps must be >= t_ini");
    if (k < 1 || k > d.horizon)
        throw DimensionError("closed_loop: control horizon k must be in [1, horizon]");

    ClosedLoopRecord rec;
    rec.inputs = Mat::Zero(d.m, total_steps);
    rec.outputs_clean = Mat::Zero(d.p, total_steps);
    rec.outputs_meas = Mat::Zero(d.p, total_steps);
    rec.reference = reference.leftCols(total_steps);

    GaussianStream noise_stream = noise.stream();

    // start-up: zero input while the window fills
    int t = 0;
    for (; t < d.t_ini; ++t) {
        const Vec y = plant.step(Vec::Zero(d.m));
        rec.outputs_clean.col(t) = y;
        rec.outputs_meas.col(t) = y + noise_stream.next_vec(d.p);
    }

    // one-time magnitude threshold for the lambda_k condition
    double lambda_k_required = 0.0;
    const KernelPredictorModel* model = controller.kernel_model();
    if (theorem_diagnostics && model != nullptr) {
        Eigen::JacobiSVD<Mat> svd(model->coefficients());
        lambda_k_required = std::sqrt(controller.cost().q_y) * svd.singularValues()(0);
    }

    while (t < total_steps) {
        InitialWindow window;
        window.u_ini.resize(d.m * d.t_ini);
        window.y_ini.resize(d.p * d.t_ini);
        for (int w = 0; w < d.t_ini; ++w) {
            window.u_ini.segment(w * d.m, d.m) = rec.inputs.col(t - d.t_ini + w);
            window.y_ini.segment(w * d.p, d.p) = rec.outputs_meas.col(t - d.t_ini + w);
        }

        Vec r_slice(d.y_len());
        for (int j = 0; j < d.horizon; ++j) {
            const int col = std::min<int>(t + j, static_cast<int>(reference.cols()) - 1);
            r_slice.segment(j * d.p, d.p) = reference.col(col);
        }

        const auto start = std::chrono::steady_clock::now();
        SolveResult res;
        try {
            res = controller.solve(window, r_slice);
        } catch (const std::exception& e) {
            throw SolverError("closed_loop: solver failed at step " + std::to_string(t) + ": " +
                              e.what());
        }
        const auto stop = std::chrono::steady_clock::now();
        rec.solve_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());

        if (theorem_diagnostics && model != nullptr) {
            auto preview = plant.clone();
            Vec y_sys(d.y_len());
            for (int j = 0; j < d.horizon; ++j)
                y_sys.segment(j * d.p, d.p) = preview->step(res.u_star.segment(j * d.m, d.m));
            const Vec y_prd = model->predict(window, res.u_star);

            CostSpec cycle_cost = controller.cost();
            cycle_cost.reference = r_slice;
            ClosedLoopRecord::CycleDiagnostics diag;
            diag.step = t;
            diag.c_opt = eval_cost_socp(*model, cycle_cost, res.equivalent, window, res.u_star,
                                        res.g_star);
            diag.c_realized = input_cost(cycle_cost, res.u_star, d.m) +
                              q_norm(cycle_cost, y_sys - r_slice);
            diag.pred_error_q = q_norm(cycle_cost, y_sys - y_prd);
            diag.lambda_k = res.equivalent.lambda_k;
            diag.lambda_k_required = lambda_k_required;
            diag.condition_ok = res.equivalent.lambda_k >= lambda_k_required;
            rec.cycles.push_back(diag);
        }

        for (int j = 0; j < k && t < total_steps; ++j, ++t) {
            const Vec u = res.u_star.segment(j * d.m, d.m);
            const Vec y = plant.step(u);
            rec.inputs.col(t) = u;
            rec.outputs_clean.col(t) = y;
            rec.outputs_meas.col(t) = y + noise_stream.next_vec(d.p);
        }
    }

    rec.realized_cost = realized_cost(controller.cost(), rec.inputs, rec.outputs_meas,
                                      rec.reference);
    return rec;
}

void write_closed_loop_csv(const ClosedLoopRecord& record, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("write_closed_loop_csv: cannot open '" + path + "'");
    const int m = static_cast<int>(record.inputs.rows());
    const int p = static_cast<int>(record.outputs_clean.rows());
    out << "step";
    for (int i = 0; i < p; ++i) out << ",r_" << i + 1;
    for (int i = 0; i < m; ++i) out << ",u_" << i + 1;
    for (int i = 0; i < p; ++i) out << ",y_meas_" << i + 1;
    for (int i = 0; i < p; ++i) out << ",y_clean_" << i + 1;
    out << "\n";
    char buf[64];
    for (Eigen::Index t = 0; t < record.inputs.cols(); ++t) {
        out << t;
        auto put = [&](double v) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << "," << buf;
        };
        for (int i = 0; i < p; ++i) put(record.reference(i, t));
        for (int i = 0; i < m; ++i) put(record.inputs(i, t));
        for (int i = 0; i < p; ++i) put(record.outputs_meas(i, t));
        for (int i = 0; i < p; ++i) put(record.outputs_clean(i, t));
        out << "\n";
    }
}

std::vector<PredictionBenchRow> open_loop_benchmark(Plant& plant,
                                                    const PredictionBenchConfig& config) {
    std::vector<PredictionBenchRow> rows;
    const int blocks = config.prediction_steps / config.horizon;
    if (blocks * config.horizon != config.prediction_steps)
        throw DimensionError("open_loop_benchmark: prediction_steps must be a multiple of the "
                             "horizon");

    for (double variance : config.noise_variances) {
        plant.reset();
        ExcitationSignal excitation{config.excitation_mean, config.excitation_variance,
                                    config.train_seed};
        const NoiseModel train_noise{variance, config.noise_seed};
        const CollectedData data = collect_data(plant, excitation, config.t_data, train_noise);
        const HankelPartition part = partition(data.measured, config.t_ini, config.horizon);

        // fresh validation run, scored against the clean response
        plant.reset();
        ExcitationSignal val_excitation{config.excitation_mean, config.excitation_variance,
                                        config.validation_seed};
        const NoiseModel val_noise{variance, config.noise_seed + 1};
        const CollectedData val =
            collect_data(plant, val_excitation, config.t_ini + config.prediction_steps, val_noise);

        InitialWindow window;
        window.u_ini = Eigen::Map<const Vec>(val.measured.inputs.data(),
                                             plant.input_dim() * config.t_ini);
        window.y_ini = Eigen::Map<const Vec>(val.measured.outputs.data(),
                                             plant.output_dim() * config.t_ini);
        const Mat u_block = val.measured.inputs.middleCols(config.t_ini, config.prediction_steps);
        const Vec u_long = Eigen::Map<const Vec>(u_block.data(), u_block.size());
        const Mat y_block = val.clean.outputs.middleCols(config.t_ini, config.prediction_steps);
        const Vec y_actual = Eigen::Map<const Vec>(y_block.data(), y_block.size());

        auto score = [&](const Predictor& predictor, const std::string& method) {
            const Vec y_hat = rollout(predictor, window, u_long);
            rows.push_back({method, variance, prediction_error(y_hat, y_actual)});
        };

        score(fit_linear(part), "linear");

        const auto samples = koopman_samples(data.measured, config.t_ini);
        const auto dict = KoopmanDictionary::poly_tps_random(
            (plant.input_dim() + plant.output_dim()) * config.t_ini, config.koopman_rbf,
            config.koopman_box, config.koopman_seed);
        const Dims kd{plant.input_dim(), plant.output_dim(), config.t_ini, config.horizon};
        score(fit_koopman(samples.states, samples.inputs, samples.next_states, dict, kd),
              "koopman");

        const auto source =
            variance == 0.0 ? GramMatrix::Source::perfect : GramMatrix::Source::noisy;
        for (const auto& spec : config.kernels)
            score(fit_kernel(part, spec, config.gamma, source), "kernel_" + spec.name());
    }
    return rows;
}

void write_prediction_csv(const std::vector<PredictionBenchRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("write_prediction_csv: cannot open '" + path + "'");
    out << "method,noise_variance,error\n";
    char buf[64];
    for (const auto& row : rows) {
        out << row.method;
        std::snprintf(buf, sizeof(buf), "%.17g", row.noise_variance);
        out << "," << buf;
        std::snprintf(buf, sizeof(buf), "%.17g", row.error);
        out << "," << buf << "\n";
    }
}

const MethodStats& BenchmarkSummary::stats(const std::string& method) const {
    for (const auto& m : methods)
        if (m.method == method) return m;
    throw ParseError("BenchmarkSummary: unknown method '" + method + "'");
}

BenchmarkSummary monte_carlo(const Experiment& experiment, const std::vector<std::uint64_t>& seeds,
                             int threads) {
    if (seeds.size() < 2) throw ConfigError("monte_carlo: needs at least 2 runs");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw ConfigError("monte_carlo: run seeds must be distinct");

    struct RunOutcome {
        std::map<std::string, double> values;
        std::string error;
        bool ok = false;
    };
    std::vector<RunOutcome> outcomes(seeds.size());
    std::atomic<size_t> next{0};

    auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= seeds.size()) return;
            try {
                outcomes[i].values = experiment(seeds[i]);
                outcomes[i].ok = true;
            } catch (const std::exception& e) {
                outcomes[i].error = e.what();
            }
        }
    };

    const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(seeds.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    BenchmarkSummary summary;
    summary.seeds = seeds;
    std::map<std::string, std::vector<double>> per_method;
    for (size_t i = 0; i < seeds.size(); ++i) {
        if (!outcomes[i].ok) {
            summary.failures.push_back("seed " + std::to_string(seeds[i]) + ": " +
                                       outcomes[i].error);
            continue;
        }
        summary.run_seeds.push_back(seeds[i]);
        for (const auto& [method, value] : outcomes[i].values)
            per_method[method].push_back(value);
    }
    for (auto& [method, values] : per_method) {
        MethodStats stats;
        stats.method = method;
        stats.values = values;
        const double n = static_cast<double>(values.size());
        double sum = 0.0;
        for (double v : values) sum += v;
        stats.mean = n > 0 ? sum / n : 0.0;
        double ss = 0.0;
        for (double v : values) ss += (v - stats.mean) * (v - stats.mean);
        stats.stddev = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        summary.methods.push_back(std::move(stats));
    }
    return summary;
}

BenchmarkSummary monte_carlo(const Experiment& experiment, int n_runs, std::uint64_t base_seed,
                             int threads) {
    std::vector<std::uint64_t> seeds(n_runs);
    for (int i = 0; i < n_runs; ++i) seeds[i] = base_seed + static_cast<std::uint64_t>(i);
    return monte_carlo(experiment, seeds, threads);
}

void write_benchmark_csv(const BenchmarkSummary& summary, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("write_benchmark_csv: cannot open '" + path + "'");
    out << "run,seed,method,value\n";
    char buf[64];
    for (size_t r = 0; r < summary.run_seeds.size(); ++r) {
        for (const auto& m : summary.methods) {
            std::snprintf(buf, sizeof(buf), "%.17g", m.values.at(r));
            out << r << "," << summary.run_seeds[r] << "," << m.method << "," << buf << "\n";
        }
    }
}

nlohmann::ordered_json to_json(const BenchmarkSummary& summary) {
    nlohmann::ordered_json j;
    j["experiment"] = summary.experiment;
    j["fingerprint"] = summary.fingerprint;
    j["seeds"] = summary.seeds;
    j["run_seeds"] = summary.run_seeds;
    j["failures"] = summary.failures;
    nlohmann::ordered_json methods = nlohmann::ordered_json::array();
    for (const auto& m : summary.methods) {
        methods.push_back({{"method", m.method},
                           {"mean", m.mean},
                           {"stddev", m.stddev},
                           {"count", m.values.size()},
                           {"values", m.values}});
    }
    j["methods"] = std::move(methods);
    return j;
}

BenchmarkSummary benchmark_from_json(const nlohmann::json& j) {
    BenchmarkSummary summary;
    summary.experiment = j.at("experiment").get<std::string>();
    summary.fingerprint = j.at("fingerprint").get<std::string>();
    summary.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    summary.run_seeds = j.at("run_seeds").get<std::vector<std::uint64_t>>();
    summary.failures = j.at("failures").get<std::vector<std::string>>();
    for (const auto& mj : j.at("methods")) {
        MethodStats m;
        m.method = mj.at("method").get<std::string>();
        m.mean = mj.at("mean").get<double>();
        m.stddev = mj.at("stddev").get<double>();
        m.values = mj.at("values").get<std::vector<double>>();
        summary.methods.push_back(std::move(m));
    }
    return summary;
}

TheoremReport theorem1_report(const ClosedLoopRecord& record) {
    TheoremReport report;
    report.cycles = static_cast<int>(record.cycles.size());
    if (record.cycles.empty()) return report;

    for (const auto& c : record.cycles) report.beta_e = std::max(report.beta_e, c.pred_error_q);
    report.min_slack = std::numeric_limits<double>::infinity();
    for (const auto& c : record.cycles) {
        const double slack = c.c_opt + report.beta_e - c.c_realized;
        report.min_slack = std::min(report.min_slack, slack);
        const bool violated = slack < -1e-9 * (1.0 + std::abs(c.c_opt));
        if (violated) ++report.violations;
        if (c.condition_ok) {
            ++report.condition_ok_cycles;
            if (violated) ++report.violations_condition_ok;
        }
    }
    return report;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string fingerprint_hex(const std::string& text) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(text)));
    return std::string(buf);
}

}  // namespace rokdeepc
