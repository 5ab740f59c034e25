#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rokdeepc/kernel.hpp"
#include "rokdeepc/plant.hpp"
#include "rokdeepc/solver.hpp"
#include "rokdeepc/types.hpp"

namespace rokdeepc {

/// Parsed value of one `key = value` config entry.
using ConfigValue = std::variant<bool, double, std::string, std::vector<double>>;

/// Sectioned key-value config text: [section] headers, `key = value` lines,
/// `#` comments. Values are booleans, numbers, quoted strings, or flat
/// numeric arrays. Parsing is total: malformed input raises ParseError or
/// ConfigError, never crashes.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_text(const std::string& text, const std::string& origin = "<string>");

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;

    double number(const std::string& section, const std::string& key) const;
    double number_or(const std::string& section, const std::string& key, double fallback) const;
    int integer(const std::string& section, const std::string& key) const;
    int integer_or(const std::string& section, const std::string& key, int fallback) const;
    std::uint64_t seed_or(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const;
    bool boolean_or(const std::string& section, const std::string& key, bool fallback) const;
    std::string text(const std::string& section, const std::string& key) const;
    std::string text_or(const std::string& section, const std::string& key,
                        const std::string& fallback) const;
    std::vector<double> array_or(const std::string& section, const std::string& key,
                                 const std::vector<double>& fallback) const;

    /// Deterministic "section.key=value" dump used for fingerprinting.
    std::string canonical_string() const;

private:
    const ConfigValue* find(const std::string& section, const std::string& key) const;
    std::map<std::string, std::map<std::string, ConfigValue>> sections_;
    std::string origin_;
};

/// Controller method requested in a benchmark run.
struct MethodSpec {
    enum class Kind { rokdeepc, kernel_mpc, deepc, koopman_mpc };
    Kind kind;
    std::string kernel;  // for rokdeepc / kernel_mpc
    std::string label;   // e.g. "rokdeepc-gaussian"
};

/// Validated experiment configuration with the benchmark defaults.
struct RunConfig {
    // plant
    std::string plant_kind = "polynomial_siso";

    // data collection & predictor structure
    int t_data = 600;
    int t_ini = 1;
    int horizon = 5;
    double gamma = 1e-2;

    ExcitationSignal excitation{0.0, 0.01, 1};
    NoiseModel noise{0.0, 11};

    // kernels
    std::vector<std::string> kernel_names = {"gaussian", "exponential", "polynomial"};
    double gaussian_two_sigma_sq = 0.4;
    double exponential_scale = 0.2;
    double polynomial_offset = 1.0;
    int polynomial_degree = 10;
    double hybrid_two_sigma_sq = 0.4;

    // koopman lifting
    int koopman_rbf = 10;
    double koopman_box = 1.5;
    std::uint64_t koopman_seed = 7;

    CostSpec cost{1.0, 100.0, 1000.0, {}};
    std::vector<std::pair<int, double>> reference_breakpoints = {{50, 0.1}, {150, 0.05}};

    RobustConfig robust;
    GDConfig gd;
    DeepcConfig deepc;
    std::optional<double> u_min, u_max, y_min, y_max;

    // experiment
    int steps = 200;
    int control_horizon = 1;
    int n_runs = 20;
    std::uint64_t base_seed = 100;
    double mc_noise_variance = 1.5e-3;
    std::vector<MethodSpec> methods;

    std::string out_dir = "out";
    std::string fingerprint;

    KernelSpec kernel_by_name(const std::string& name) const;
    BoxSet input_box() const;
    BoxSet output_box() const;
};

/// Build and validate a RunConfig; every error names the offending
/// section/field.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_file(const ConfigFile& file);
MethodSpec parse_method(const std::string& token);

}  // namespace rokdeepc
