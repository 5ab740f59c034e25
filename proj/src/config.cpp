#include "rokdeepc/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rokdeepc/harness.hpp"

namespace rokdeepc {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

double parse_number(const std::string& token, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0')
        throw ParseError(where + ": malformed number '" + token + "'");
    return v;
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("config: cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str(), path);
}

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& origin) {
    ConfigFile file;
    file.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = origin + ":" + std::to_string(line_no);
        const size_t hash = line.find('#');
        // '#' inside quotes is content, not a comment
        const size_t quote = line.find('"');
        std::string body = line;
        if (hash != std::string::npos && (quote == std::string::npos || hash < quote))
            body = line.substr(0, hash);
        body = trim(body);
        if (body.empty()) continue;

        if (body.front() == '[') {
            if (body.back() != ']') throw ParseError(where + ": unterminated section header");
            section = trim(body.substr(1, body.size() - 2));
            if (!valid_name(section))
                throw ParseError(where + ": invalid section name '" + section + "'");
            file.sections_[section];
            continue;
        }

        const size_t eq = body.find('=');
        if (eq == std::string::npos)
            throw ParseError(where + ": expected 'key = value'");
        const std::string key = trim(body.substr(0, eq));
        std::string value = trim(body.substr(eq + 1));
        if (!valid_name(key)) throw ParseError(where + ": invalid key '" + key + "'");
        if (section.empty())
            throw ParseError(where + ": key '" + key + "' appears before any [section]");
        if (value.empty()) throw ParseError(where + ": empty value for '" + key + "'");

        ConfigValue parsed;
        if (value == "true" || value == "false") {
            parsed = (value == "true");
        } else if (value.front() == '"') {
            if (value.size() < 2 || value.back() != '"')
                throw ParseError(where + ": unterminated string for '" + key + "'");
            parsed = value.substr(1, value.size() - 2);
        } else if (value.front() == '[') {
            if (value.back() != ']')
                throw ParseError(where + ": unterminated array for '" + key + "'");
            std::vector<double> items;
            std::string inner = trim(value.substr(1, value.size() - 2));
            if (!inner.empty()) {
                std::stringstream ss(inner);
                std::string tok;
                while (std::getline(ss, tok, ','))
                    items.push_back(parse_number(trim(tok), where));
            }
            parsed = std::move(items);
        } else {
            parsed = parse_number(value, where);
        }
        file.sections_[section][key] = std::move(parsed);
    }
    return file;
}

bool ConfigFile::has_section(const std::string& section) const {
    return sections_.count(section) > 0;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

const ConfigValue* ConfigFile::find(const std::string& section, const std::string& key) const {
    const auto sit = sections_.find(section);
    if (sit == sections_.end()) return nullptr;
    const auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return nullptr;
    return &kit->second;
}

double ConfigFile::number(const std::string& section, const std::string& key) const {
    const ConfigValue* v = find(section, key);
    if (v == nullptr) throw ConfigError("config: missing required field " + section + "." + key);
    if (const double* d = std::get_if<double>(v)) return *d;
    throw ConfigError("config: field " + section + "." + key + " must be a number");
}

double ConfigFile::number_or(const std::string& section, const std::string& key,
                             double fallback) const {
    return find(section, key) == nullptr ? fallback : number(section, key);
}

int ConfigFile::integer(const std::string& section, const std::string& key) const {
    const double d = number(section, key);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d)
        throw ConfigError("config: field " + section + "." + key + " must be an integer");
    return i;
}

int ConfigFile::integer_or(const std::string& section, const std::string& key,
                           int fallback) const {
    return find(section, key) == nullptr ? fallback : integer(section, key);
}

std::uint64_t ConfigFile::seed_or(const std::string& section, const std::string& key,
                                  std::uint64_t fallback) const {
    if (find(section, key) == nullptr) return fallback;
    const double d = number(section, key);
    if (d < 0 || static_cast<double>(static_cast<std::uint64_t>(d)) != d)
        throw ConfigError("config: field " + section + "." + key +
                          " must be a nonnegative integer seed");
    return static_cast<std::uint64_t>(d);
}

bool ConfigFile::boolean_or(const std::string& section, const std::string& key,
                            bool fallback) const {
    const ConfigValue* v = find(section, key);
    if (v == nullptr) return fallback;
    if (const bool* b = std::get_if<bool>(v)) return *b;
    throw ConfigError("config: field " + section + "." + key + " must be true or false");
}

std::string ConfigFile::text(const std::string& section, const std::string& key) const {
    const ConfigValue* v = find(section, key);
    if (v == nullptr) throw ConfigError("config: missing required field " + section + "." + key);
    if (const std::string* s = std::get_if<std::string>(v)) return *s;
    throw ConfigError("config: field " + section + "." + key + " must be a quoted string");
}

std::string ConfigFile::text_or(const std::string& section, const std::string& key,
                                const std::string& fallback) const {
    return find(section, key) == nullptr ? fallback : text(section, key);
}

std::vector<double> ConfigFile::array_or(const std::string& section, const std::string& key,
                                         const std::vector<double>& fallback) const {
    const ConfigValue* v = find(section, key);
    if (v == nullptr) return fallback;
    if (const auto* a = std::get_if<std::vector<double>>(v)) return *a;
    throw ConfigError("config: field " + section + "." + key + " must be an array of numbers");
}

std::string ConfigFile::canonical_string() const {
    std::string out;
    char buf[64];
    for (const auto& [section, entries] : sections_) {
        for (const auto& [key, value] : entries) {
            out += section + "." + key + "=";
            if (const bool* b = std::get_if<bool>(&value)) {
                out += *b ? "true" : "false";
            } else if (const double* d = std::get_if<double>(&value)) {
                std::snprintf(buf, sizeof(buf), "%.17g", *d);
                out += buf;
            } else if (const std::string* s = std::get_if<std::string>(&value)) {
                out += '"' + *s + '"';
            } else if (const auto* a = std::get_if<std::vector<double>>(&value)) {
                out += '[';
                for (size_t i = 0; i < a->size(); ++i) {
                    std::snprintf(buf, sizeof(buf), "%.17g", (*a)[i]);
                    out += (i == 0 ? "" : ",");
                    out += buf;
                }
                out += ']';
            }
            out += '\n';
        }
    }
    return out;
}

MethodSpec parse_method(const std::string& token) {
    MethodSpec spec;
    spec.label = token;
    if (token == "deepc") {
        spec.kind = MethodSpec::Kind::deepc;
        return spec;
    }
    if (token == "koopman_mpc") {
        spec.kind = MethodSpec::Kind::koopman_mpc;
        return spec;
    }
    const size_t dash = token.find('-');
    if (dash != std::string::npos) {
        const std::string head = token.substr(0, dash);
        const std::string kernel = token.substr(dash + 1);
        if (head == "rokdeepc") {
            spec.kind = MethodSpec::Kind::rokdeepc;
            spec.kernel = kernel;
            return spec;
        }
        if (head == "kernel_mpc") {
            spec.kind = MethodSpec::Kind::kernel_mpc;
            spec.kernel = kernel;
            return spec;
        }
    }
    throw ConfigError("config: unknown method '" + token +
                      "' (expected deepc, koopman_mpc, rokdeepc-<kernel>, or "
                      "kernel_mpc-<kernel>)");
}

KernelSpec RunConfig::kernel_by_name(const std::string& name) const {
    if (name == "gaussian") return KernelSpec::gaussian(gaussian_two_sigma_sq);
    if (name == "exponential") return KernelSpec::exponential(exponential_scale);
    if (name == "polynomial") return KernelSpec::polynomial(polynomial_offset, polynomial_degree);
    if (name == "hybrid") {
        Dims d{1, 1, t_ini, horizon};
        return KernelSpec::hybrid(hybrid_two_sigma_sq, d.u_len());
    }
    throw ConfigError("config: unknown kernel '" + name + "'");
}

BoxSet RunConfig::input_box() const {
    const Dims d{1, 1, t_ini, horizon};
    if (!u_min && !u_max) return BoxSet{};
    BoxSet box = BoxSet::unbounded(d.u_len());
    if (u_min) box.lower.setConstant(*u_min);
    if (u_max) box.upper.setConstant(*u_max);
    box.validate();
    return box;
}

BoxSet RunConfig::output_box() const {
    const Dims d{1, 1, t_ini, horizon};
    if (!y_min && !y_max) return BoxSet{};
    BoxSet box = BoxSet::unbounded(d.y_len());
    if (y_min) box.lower.setConstant(*y_min);
    if (y_max) box.upper.setConstant(*y_max);
    box.validate();
    return box;
}

RunConfig run_config_from_file(const ConfigFile& file) {
    if (!file.has_section("plant"))
        throw ConfigError("config: missing required section 'plant'");

    RunConfig cfg;
    cfg.plant_kind = file.text_or("plant", "kind", "polynomial_siso");
    if (cfg.plant_kind != "polynomial_siso")
        throw ConfigError("config: plant.kind must be \"polynomial_siso\"");

    cfg.t_data = file.integer_or("data", "T", cfg.t_data);
    cfg.t_ini = file.integer_or("data", "T_ini", cfg.t_ini);
    cfg.horizon = file.integer_or("data", "N", cfg.horizon);
    cfg.gamma = file.number_or("data", "gamma", cfg.gamma);
    if (cfg.t_data < cfg.t_ini + cfg.horizon)
        throw ConfigError("config: data.T must be >= T_ini + N");
    if (cfg.t_ini < 1 || cfg.horizon < 1)
        throw ConfigError("config: data.T_ini and data.N must be >= 1");
    if (cfg.gamma <= 0.0) throw ConfigError("config: data.gamma must be > 0");

    cfg.excitation.mean = file.number_or("excitation", "mean", cfg.excitation.mean);
    cfg.excitation.variance = file.number_or("excitation", "variance", cfg.excitation.variance);
    cfg.excitation.seed = file.seed_or("excitation", "seed", cfg.excitation.seed);
    if (cfg.excitation.variance < 0.0)
        throw ConfigError("config: excitation.variance must be >= 0");

    cfg.noise.variance = file.number_or("noise", "variance", cfg.noise.variance);
    cfg.noise.seed = file.seed_or("noise", "seed", cfg.noise.seed);
    if (cfg.noise.variance < 0.0) throw ConfigError("config: noise.variance must be >= 0");

    cfg.gaussian_two_sigma_sq =
        file.number_or("kernels", "gaussian_two_sigma_sq", cfg.gaussian_two_sigma_sq);
    cfg.exponential_scale = file.number_or("kernels", "exponential_scale", cfg.exponential_scale);
    cfg.polynomial_offset = file.number_or("kernels", "polynomial_offset", cfg.polynomial_offset);
    cfg.polynomial_degree = file.integer_or("kernels", "polynomial_degree", cfg.polynomial_degree);
    cfg.hybrid_two_sigma_sq =
        file.number_or("kernels", "hybrid_two_sigma_sq", cfg.hybrid_two_sigma_sq);
    {
        std::stringstream ss(file.text_or("kernels", "list", "gaussian exponential polynomial"));
        std::string tok;
        cfg.kernel_names.clear();
        while (ss >> tok) cfg.kernel_names.push_back(tok);
        if (cfg.kernel_names.empty())
            throw ConfigError("config: kernels.list must name at least one kernel");
        for (const auto& name : cfg.kernel_names) cfg.kernel_by_name(name).validate();
    }

    cfg.koopman_rbf = file.integer_or("koopman", "n_rbf", cfg.koopman_rbf);
    cfg.koopman_box = file.number_or("koopman", "box", cfg.koopman_box);
    cfg.koopman_seed = file.seed_or("koopman", "seed", cfg.koopman_seed);
    if (cfg.koopman_rbf < 0) throw ConfigError("config: koopman.n_rbf must be >= 0");

    cfg.cost.r_u = file.number_or("cost", "r_u", cfg.cost.r_u);
    cfg.cost.r_delta = file.number_or("cost", "r_delta", cfg.cost.r_delta);
    cfg.cost.q_y = file.number_or("cost", "q_y", cfg.cost.q_y);
    cfg.cost.validate();

    {
        const auto times = file.array_or("reference", "step_times", {50, 150});
        const auto values = file.array_or("reference", "step_values", {0.1, 0.05});
        if (times.size() != values.size())
            throw ConfigError("config: reference.step_times and step_values lengths differ");
        cfg.reference_breakpoints.clear();
        for (size_t i = 0; i < times.size(); ++i) {
            const int idx = static_cast<int>(times[i]);
            if (static_cast<double>(idx) != times[i])
                throw ConfigError("config: reference.step_times must hold integers");
            cfg.reference_breakpoints.emplace_back(idx, values[i]);
        }
        for (size_t i = 1; i < cfg.reference_breakpoints.size(); ++i)
            if (cfg.reference_breakpoints[i].first <= cfg.reference_breakpoints[i - 1].first)
                throw ConfigError("config: reference.step_times must be strictly increasing");
    }

    cfg.robust.lambda_k_prime =
        file.number_or("controller", "lambda_k_prime", cfg.robust.lambda_k_prime);
    cfg.robust.lambda_g = file.number_or("controller", "lambda_g", cfg.robust.lambda_g);
    cfg.robust.gamma = cfg.gamma;
    cfg.robust.pin_rho2 = file.boolean_or("controller", "pin_rho2", cfg.robust.pin_rho2);
    cfg.robust.pinned_rho = file.number_or("controller", "pinned_rho", cfg.robust.pinned_rho);
    cfg.robust.validate();

    cfg.gd.alpha = file.number_or("controller", "alpha", cfg.gd.alpha);
    cfg.gd.i_max = file.integer_or("controller", "i_max", cfg.gd.i_max);
    cfg.gd.xi = file.number_or("controller", "xi", cfg.gd.xi);
    cfg.gd.warm_start = file.boolean_or("controller", "warm_start", cfg.gd.warm_start);
    cfg.gd.backtracking = file.boolean_or("controller", "backtracking", cfg.gd.backtracking);
    cfg.gd.validate();

    cfg.deepc.lambda_g = file.number_or("controller", "deepc_lambda_g", cfg.deepc.lambda_g);
    cfg.deepc.lambda_y = file.number_or("controller", "deepc_lambda_y", cfg.deepc.lambda_y);
    if (cfg.deepc.lambda_g <= 0.0 || cfg.deepc.lambda_y < 0.0)
        throw ConfigError("config: controller.deepc_lambda_g must be > 0 and deepc_lambda_y >= 0");

    if (file.has("controller", "u_min")) cfg.u_min = file.number("controller", "u_min");
    if (file.has("controller", "u_max")) cfg.u_max = file.number("controller", "u_max");
    if (file.has("controller", "y_min")) cfg.y_min = file.number("controller", "y_min");
    if (file.has("controller", "y_max")) cfg.y_max = file.number("controller", "y_max");
    cfg.input_box();
    cfg.output_box();

    cfg.steps = file.integer_or("experiment", "steps", cfg.steps);
    cfg.control_horizon = file.integer_or("experiment", "k", cfg.control_horizon);
    cfg.n_runs = file.integer_or("experiment", "n_runs", cfg.n_runs);
    cfg.base_seed = file.seed_or("experiment", "base_seed", cfg.base_seed);
    cfg.mc_noise_variance =
        file.number_or("experiment", "mc_noise_variance", cfg.mc_noise_variance);
    if (cfg.steps < 1) throw ConfigError("config: experiment.steps must be >= 1");
    if (cfg.control_horizon < 1 || cfg.control_horizon > cfg.horizon)
        throw ConfigError("config: experiment.k must be in [1, N]");
    if (cfg.mc_noise_variance < 0.0)
        throw ConfigError("config: experiment.mc_noise_variance must be >= 0");

    {
        std::stringstream ss(file.text_or(
            "experiment", "methods",
            "rokdeepc-gaussian rokdeepc-exponential rokdeepc-polynomial deepc koopman_mpc"));
        std::string tok;
        cfg.methods.clear();
        while (ss >> tok) cfg.methods.push_back(parse_method(tok));
        for (const auto& m : cfg.methods)
            if (!m.kernel.empty()) cfg.kernel_by_name(m.kernel).validate();
    }

    cfg.out_dir = file.text_or("output", "dir", cfg.out_dir);
    cfg.fingerprint = fingerprint_hex(file.canonical_string());
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from_file(ConfigFile::parse_file(path));
}

}  // namespace rokdeepc
