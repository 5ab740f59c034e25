#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "rokdeepc/plant.hpp"
#include "rokdeepc/solver.hpp"

namespace rokdeepc {

/// One receding-horizon run: applied inputs, clean and measured outputs, the
/// tracked reference, per-cycle solve times, and optional per-cycle
/// performance-inequality diagnostics.
struct ClosedLoopRecord {
    Mat inputs;         // m x steps
    Mat outputs_clean;  // p x steps
    Mat outputs_meas;   // p x steps
    Mat reference;      // p x steps
    std::vector<double> solve_ms;
    double realized_cost = 0.0;

    struct CycleDiagnostics {
        int step = 0;
        double c_opt = 0.0;         // SOCP-form cost at (u*, g*) with equivalent params
        double c_realized = 0.0;    // ell(u*) + |y_sys - r|_Q over the horizon
        double pred_error_q = 0.0;  // |y_sys - y_prd|_Q
        double lambda_k = 0.0;
        double lambda_k_required = 0.0;
        bool condition_ok = false;
    };
    std::vector<CycleDiagnostics> cycles;
};

/// Realized closed-loop cost recomputed from streams:
/// sum_t (r_u |u_t|^2 + q_y |y_t - r_t|^2) + sum_{t>=2} r_delta |u_t - u_{t-1}|^2.
double realized_cost(const CostSpec& cost, const Mat& inputs, const Mat& outputs,
                     const Mat& reference);

/// Receding-horizon simulation. The first t_ini steps apply zero input to
/// populate the window; afterwards each cycle solves from the most recent
/// t_ini measured outputs and applied inputs and applies the first k inputs.
/// With theorem_diagnostics set, each cycle also previews the plant response
/// to the full planned input sequence on a clone.
ClosedLoopRecord closed_loop(Controller& controller, Plant& plant, const Mat& reference,
                             int total_steps, int k, const NoiseModel& noise,
                             bool theorem_diagnostics = false);

void write_closed_loop_csv(const ClosedLoopRecord& record, const std::string& path);

// --- open-loop prediction benchmark -----------------------------------------

struct PredictionBenchConfig {
    int t_data = 600;
    int t_ini = 1;
    int horizon = 5;
    double gamma = 1e-2;
    int prediction_steps = 50;
    double excitation_mean = 0.0;
    double excitation_variance = 0.01;
    std::uint64_t train_seed = 1;
    std::uint64_t validation_seed = 2;
    std::uint64_t noise_seed = 3;
    std::vector<double> noise_variances = {0.0, 1e-3};
    std::vector<KernelSpec> kernels = {KernelSpec::polynomial(1.0, 10),
                                       KernelSpec::gaussian(0.4), KernelSpec::exponential(0.2)};
    int koopman_rbf = 10;
    double koopman_box = 1.5;
    std::uint64_t koopman_seed = 7;
};

struct PredictionBenchRow {
    std::string method;
    double noise_variance;
    double error;  // sum |dy|^2 over the chained prediction
};

/// Fits the linear, Koopman, and kernel predictors on one collected dataset
/// per noise level and scores a chained open-loop prediction on a fresh
/// validation run against the clean outputs.
std::vector<PredictionBenchRow> open_loop_benchmark(Plant& plant,
                                                    const PredictionBenchConfig& config);

void write_prediction_csv(const std::vector<PredictionBenchRow>& rows, const std::string& path);

// --- Monte Carlo -------------------------------------------------------------

struct MethodStats {
    std::string method;
    std::vector<double> values;  // aligned with BenchmarkSummary::run_seeds
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
};

struct BenchmarkSummary {
    std::string experiment;
    std::vector<std::uint64_t> seeds;      // all requested run seeds
    std::vector<std::uint64_t> run_seeds;  // seeds of successful runs, in order
    std::vector<MethodStats> methods;
    std::vector<std::string> failures;
    std::string fingerprint;

    const MethodStats& stats(const std::string& method) const;
};

using Experiment = std::function<std::map<std::string, double>(std::uint64_t seed)>;

/// Runs the experiment once per seed (seeds must be distinct), in parallel up
/// to the thread cap. Failed runs are recorded, excluded from statistics, and
/// counted. Aggregation order is deterministic (by seed position).
BenchmarkSummary monte_carlo(const Experiment& experiment, const std::vector<std::uint64_t>& seeds,
                             int threads = 1);
BenchmarkSummary monte_carlo(const Experiment& experiment, int n_runs, std::uint64_t base_seed,
                             int threads = 1);

void write_benchmark_csv(const BenchmarkSummary& summary, const std::string& path);
nlohmann::ordered_json to_json(const BenchmarkSummary& summary);
BenchmarkSummary benchmark_from_json(const nlohmann::json& j);

// --- performance-inequality report -------------------------------------------

/// Per-run summary of the single-cycle inequality
/// c_realized <= c_opt + beta_e with beta_e the maximum measured Q-weighted
/// prediction error over the run.
struct TheoremReport {
    int cycles = 0;
    double beta_e = 0.0;
    double min_slack = 0.0;
    int violations = 0;                // slack < 0 across all cycles
    int condition_ok_cycles = 0;       // lambda_k >= required magnitude
    int violations_condition_ok = 0;   // violations among those cycles
};
TheoremReport theorem1_report(const ClosedLoopRecord& record);

/// FNV-1a 64-bit hash, hex encoded; used for config fingerprints.
std::uint64_t fnv1a(const std::string& text);
std::string fingerprint_hex(const std::string& text);

}  // namespace rokdeepc
