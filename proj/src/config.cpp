#include "macalloc/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace macalloc {

namespace {

// ---------------------------------------------------------------------------
// TOML subset scanner
// ---------------------------------------------------------------------------
class TomlScanner {
  public:
    explicit TomlScanner(const std::string& text) : text_(text) {}

    nlohmann::json parse() {
        nlohmann::json root = nlohmann::json::object();
        nlohmann::json* section = &root;
        while (true) {
            skip_blank(true);
            if (eof()) break;
            if (peek() == '[') {
                section = &open_section(root);
                continue;
            }
            parse_key_value(*section);
            skip_spaces();
            if (!eof() && peek() == '#') skip_comment();
            if (!eof() && peek() != '\n')
                fail("expected end of line after value");
        }
        return root;
    }

  private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("TOML parse error at line " + std::to_string(line_) + ": " + msg);
    }

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }
    char take() {
        const char c = text_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }
    void skip_spaces() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) take();
    }
    void skip_comment() {
        while (!eof() && peek() != '\n') take();
    }
    void skip_blank(bool newlines) {
        while (!eof()) {
            skip_spaces();
            if (eof()) return;
            if (peek() == '#') {
                skip_comment();
                continue;
            }
            if (newlines && peek() == '\n') {
                take();
                continue;
            }
            return;
        }
    }

    std::string parse_bare_key() {
        std::string key;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                          peek() == '-'))
            key += take();
        if (key.empty()) fail("expected a key");
        return key;
    }

    nlohmann::json& open_section(nlohmann::json& root) {
        take();  // '['
        nlohmann::json* node = &root;
        while (true) {
            skip_spaces();
            const std::string part = parse_bare_key();
            node = &(*node)[part];
            if (!node->is_object() && !node->is_null()) fail("section redefines a value");
            if (node->is_null()) *node = nlohmann::json::object();
            skip_spaces();
            if (!eof() && peek() == '.') {
                take();
                continue;
            }
            break;
        }
        if (eof() || take() != ']') fail("unterminated section header");
        skip_spaces();
        if (!eof() && peek() == '#') skip_comment();
        if (!eof() && peek() != '\n') fail("junk after section header");
        return *node;
    }

    void parse_key_value(nlohmann::json& obj) {
        skip_spaces();
        std::string key;
        if (peek() == '"')
            key = parse_string();
        else
            key = parse_bare_key();
        skip_spaces();
        if (eof() || take() != '=') fail("expected '=' after key '" + key + "'");
        skip_spaces();
        obj[key] = parse_value();
    }

    nlohmann::json parse_value() {
        if (eof()) fail("expected a value");
        const char c = peek();
        if (c == '"') return parse_string();
        if (c == '[') return parse_array();
        if (c == '{') return parse_inline_table();
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::string word = parse_bare_key();
            if (word == "true") return true;
            if (word == "false") return false;
            fail("unsupported literal '" + word + "'");
        }
        return parse_number();
    }

    std::string parse_string() {
        take();  // opening quote
        std::string out;
        while (!eof()) {
            char c = take();
            if (c == '"') return out;
            if (c == '\n') fail("unterminated string");
            if (c == '\\') {
                if (eof()) fail("dangling escape");
                const char e = take();
                switch (e) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: fail("unsupported escape sequence");
                }
            } else {
                out += c;
            }
        }
        fail("unterminated string");
    }

    nlohmann::json parse_number() {
        std::string tok;
        while (!eof()) {
            const char c = peek();
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' ||
                c == '.' || c == 'e' || c == 'E' || c == '_') {
                tok += take();
            } else {
                break;
            }
        }
        if (tok.empty()) fail("expected a number");
        tok.erase(std::remove(tok.begin(), tok.end(), '_'), tok.end());
        const bool is_float = tok.find_first_of(".eE") != std::string::npos;
        try {
            if (is_float) return std::stod(tok);
            return static_cast<std::int64_t>(std::stoll(tok));
        } catch (const std::exception&) {
            fail("malformed number '" + tok + "'");
        }
    }

    nlohmann::json parse_array() {
        take();  // '['
        nlohmann::json arr = nlohmann::json::array();
        while (true) {
            skip_blank(true);
            if (eof()) fail("unterminated array");
            if (peek() == ']') {
                take();
                return arr;
            }
            arr.push_back(parse_value());
            skip_blank(true);
            if (eof()) fail("unterminated array");
            if (peek() == ',') {
                take();
                continue;
            }
            if (peek() == ']') {
                take();
                return arr;
            }
            fail("expected ',' or ']' in array");
        }
    }

    nlohmann::json parse_inline_table() {
        take();  // '{'
        nlohmann::json obj = nlohmann::json::object();
        skip_spaces();
        if (!eof() && peek() == '}') {
            take();
            return obj;
        }
        while (true) {
            parse_key_value(obj);
            skip_spaces();
            if (eof()) fail("unterminated inline table");
            if (peek() == ',') {
                take();
                continue;
            }
            if (peek() == '}') {
                take();
                return obj;
            }
            fail("expected ',' or '}' in inline table");
        }
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

// ---------------------------------------------------------------------------
// Typed extraction helpers
// ---------------------------------------------------------------------------
const nlohmann::json* find(const nlohmann::json& obj, const std::string& key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double get_number(const nlohmann::json& obj, const std::string& field, double fallback,
                  bool required = false) {
    const nlohmann::json* v = find(obj, field);
    if (!v) {
        if (required) throw ConfigError("missing required field", field);
        return fallback;
    }
    if (!v->is_number()) throw ConfigError("field must be a number", field);
    return v->get<double>();
}

std::int64_t get_integer(const nlohmann::json& obj, const std::string& field,
                         std::int64_t fallback, bool required = false) {
    const nlohmann::json* v = find(obj, field);
    if (!v) {
        if (required) throw ConfigError("missing required field", field);
        return fallback;
    }
    if (!v->is_number_integer()) throw ConfigError("field must be an integer", field);
    return v->get<std::int64_t>();
}

std::string get_string(const nlohmann::json& obj, const std::string& field,
                       const std::string& fallback, bool required = false) {
    const nlohmann::json* v = find(obj, field);
    if (!v) {
        if (required) throw ConfigError("missing required field", field);
        return fallback;
    }
    if (!v->is_string()) throw ConfigError("field must be a string", field);
    return v->get<std::string>();
}

// Accepts a scalar (broadcast to all users) or an array of length M.
std::vector<double> get_user_vector(const nlohmann::json& obj, const std::string& field,
                                    int users, bool required,
                                    const std::vector<double>& fallback = {}) {
    const nlohmann::json* v = find(obj, field);
    if (!v) {
        if (required) throw ConfigError("missing required field", field);
        return fallback;
    }
    std::vector<double> out;
    if (v->is_number()) {
        out.assign(static_cast<std::size_t>(users), v->get<double>());
    } else if (v->is_array()) {
        for (const auto& e : *v) {
            if (!e.is_number()) throw ConfigError("array entries must be numbers", field);
            out.push_back(e.get<double>());
        }
        if (static_cast<int>(out.size()) != users)
            throw ConfigError("array length must equal the user count", field);
    } else {
        throw ConfigError("field must be a number or an array", field);
    }
    return out;
}

std::vector<std::vector<double>> get_vector_list(const nlohmann::json& obj,
                                                 const std::string& field, int users) {
    const nlohmann::json* v = find(obj, field);
    std::vector<std::vector<double>> out;
    if (!v) return out;
    if (!v->is_array()) throw ConfigError("field must be an array of vectors", field);
    for (const auto& row : *v) {
        if (!row.is_array() || static_cast<int>(row.size()) != users)
            throw ConfigError("each entry must be an array of length M", field);
        std::vector<double> r;
        for (const auto& e : row) r.push_back(e.get<double>());
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

nlohmann::json parse_toml(const std::string& text) { return TomlScanner(text).parse(); }

nlohmann::json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const bool looks_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
    if (looks_json) {
        try {
            return nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("JSON parse error: ") + e.what());
        }
    }
    return parse_toml(text);
}

FadingModel ScenarioConfig::fading() const {
    const int m = scenario.num_users;
    const std::string type = get_string(fading_spec_, "type", "", true);
    std::vector<Marginal> marginals;
    if (type == "exponential") {
        const auto mean = get_user_vector(fading_spec_, "mean", m, true);
        for (double v : mean) marginals.push_back(Marginal::exponential(v));
    } else if (type == "uniform") {
        const auto lo = get_user_vector(fading_spec_, "low", m, true);
        const auto hi = get_user_vector(fading_spec_, "high", m, true);
        for (int i = 0; i < m; ++i)
            marginals.push_back(Marginal::uniform(lo[static_cast<std::size_t>(i)],
                                                  hi[static_cast<std::size_t>(i)]));
    } else if (type == "lognormal") {
        const auto mu = get_user_vector(fading_spec_, "mu", m, true);
        const auto sigma = get_user_vector(fading_spec_, "sigma", m, true);
        for (int i = 0; i < m; ++i)
            marginals.push_back(Marginal::lognormal(mu[static_cast<std::size_t>(i)],
                                                    sigma[static_cast<std::size_t>(i)]));
    } else if (type == "point_mass") {
        const auto value = get_user_vector(fading_spec_, "value", m, true);
        for (double v : value) marginals.push_back(Marginal::point_mass(v));
    } else {
        throw ConfigError("unknown fading type '" + type + "'", "fading.type");
    }

    const nlohmann::json* cov = find(fading_spec_, "cov");
    if (!cov) return FadingModel::independent(std::move(marginals));
    if (!cov->is_array() || static_cast<int>(cov->size()) != m)
        throw ConfigError("covariance must be an MxM matrix", "fading.cov");
    SquareMatrix k(m);
    for (int i = 0; i < m; ++i) {
        const auto& row = (*cov)[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<int>(row.size()) != m)
            throw ConfigError("covariance must be an MxM matrix", "fading.cov");
        for (int j = 0; j < m; ++j) k.at(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
    return FadingModel::gaussian_copula(std::move(marginals), k);
}

UtilityFunction ScenarioConfig::utility() const {
    const int m = scenario.num_users;
    const std::string type = get_string(utility_spec_, "type", "", true);
    if (type == "linear") {
        return UtilityFunction::linear(get_user_vector(utility_spec_, "mu", m, true));
    }
    if (type == "weighted_log") {
        const auto w = get_user_vector(utility_spec_, "weights", m, false,
                                       std::vector<double>(static_cast<std::size_t>(m), 1.0));
        return UtilityFunction::weighted_log(w, get_number(utility_spec_, "shift", 0.01));
    }
    if (type == "alpha_fair") {
        const auto w = get_user_vector(utility_spec_, "weights", m, false,
                                       std::vector<double>(static_cast<std::size_t>(m), 1.0));
        return UtilityFunction::alpha_fair(w, get_number(utility_spec_, "alpha", 0.0, true),
                                           get_number(utility_spec_, "shift", 0.01));
    }
    throw ConfigError("unknown utility type '" + type + "'", "utility.type");
}

PowerBudget ScenarioConfig::budget() const {
    if (mode != RunMode::power_control)
        throw ModeError("average power budget is only defined in power-control mode");
    return PowerBudget{avg_power};
}

ScenarioConfig make_scenario_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config root must be a table");
    ScenarioConfig cfg;

    const nlohmann::json* sc = find(doc, "scenario");
    if (!sc || !sc->is_object()) throw ConfigError("missing [scenario] table", "scenario");
    cfg.scenario.num_users = static_cast<int>(get_integer(*sc, "users", 0, true));
    if (cfg.scenario.num_users < 1 || cfg.scenario.num_users > PolymatroidRegion::kMaxUsers)
        throw ConfigError("users must be between 1 and 16", "scenario.users");
    cfg.scenario.noise = get_number(*sc, "noise", 1.0);

    const std::string mode = get_string(*sc, "mode", "fixed-power");
    if (mode == "fixed-power")
        cfg.mode = RunMode::fixed_power;
    else if (mode == "power-control")
        cfg.mode = RunMode::power_control;
    else
        throw ConfigError("mode must be 'fixed-power' or 'power-control'", "scenario.mode");

    const int m = cfg.scenario.num_users;
    if (cfg.mode == RunMode::fixed_power) {
        cfg.scenario.powers = get_user_vector(*sc, "power", m, true);
    } else {
        cfg.avg_power = get_user_vector(*sc, "avg_power", m, true);
        for (double p : cfg.avg_power)
            if (!(p > 0.0)) throw ConfigError("average powers must be positive", "scenario.avg_power");
        // per-state powers are decided by the allocation; keep placeholders
        cfg.scenario.powers = get_user_vector(*sc, "power", m, false, cfg.avg_power);
    }
    cfg.scenario.validate();

    const std::int64_t seed = get_integer(*sc, "seed", 0);
    cfg.seed = static_cast<std::uint64_t>(seed);
    const std::int64_t samples = get_integer(*sc, "samples", 10000);
    if (samples < 1) throw ConfigError("samples must be positive", "scenario.samples");
    cfg.samples = static_cast<std::size_t>(samples);

    const nlohmann::json* fading = find(doc, "fading");
    if (!fading || !fading->is_object())
        throw ConfigError("missing [fading] table", "fading");
    cfg.fading_spec_ = *fading;

    const nlohmann::json* utility = find(doc, "utility");
    if (!utility || !utility->is_object())
        throw ConfigError("missing [utility] table", "utility");
    cfg.utility_spec_ = *utility;

    if (const nlohmann::json* solver = find(doc, "solver")) {
        if (!solver->is_object()) throw ConfigError("solver must be a table", "solver");
        cfg.solver.gap_tol = get_number(*solver, "gap_tol", cfg.solver.gap_tol);
        if (!(cfg.solver.gap_tol > 0.0))
            throw ConfigError("gap_tol must be positive", "solver.gap_tol");
        cfg.solver.max_iter =
            static_cast<int>(get_integer(*solver, "max_iter", cfg.solver.max_iter));
        cfg.solver.quad_tol = get_number(*solver, "quad_tol", cfg.solver.quad_tol);
        cfg.solver.power_rel_tol =
            get_number(*solver, "power_rel_tol", cfg.solver.power_rel_tol);
        const std::string rule = get_string(*solver, "step_rule", "limited-max");
        if (rule == "limited-max")
            cfg.solver.step_rule = StepRule::limited_max;
        else if (rule == "armijo")
            cfg.solver.step_rule = StepRule::armijo;
        else
            throw ConfigError("step_rule must be 'limited-max' or 'armijo'", "solver.step_rule");
    }

    if (const nlohmann::json* bounds = find(doc, "bounds")) {
        if (!bounds->is_object()) throw ConfigError("bounds must be a table", "bounds");
        if (const nlohmann::json* grid = find(*bounds, "epsilon_grid")) {
            if (!grid->is_array()) throw ConfigError("epsilon_grid must be an array", "bounds.epsilon_grid");
            for (const auto& e : *grid) {
                const double eps = e.get<double>();
                if (!(eps > 0.0 && eps <= 1.0))
                    throw ConfigError("epsilon values must lie in (0,1]", "bounds.epsilon_grid");
                cfg.bounds.epsilon_grid.push_back(eps);
            }
        }
        if (const nlohmann::json* scales = find(*bounds, "cov_scales")) {
            if (!scales->is_array()) throw ConfigError("cov_scales must be an array", "bounds.cov_scales");
            cfg.bounds.cov_scales.clear();
            for (const auto& e : *scales) cfg.bounds.cov_scales.push_back(e.get<double>());
        }
        cfg.bounds.constant_states = static_cast<std::size_t>(
            get_integer(*bounds, "constant_states", static_cast<std::int64_t>(cfg.bounds.constant_states)));
        cfg.bounds.points_per_state = static_cast<std::size_t>(
            get_integer(*bounds, "points_per_state", static_cast<std::int64_t>(cfg.bounds.points_per_state)));
    }
    if (cfg.bounds.epsilon_grid.empty())
        for (int i = 1; i <= 20; ++i) cfg.bounds.epsilon_grid.push_back(i / 20.0);

    if (const nlohmann::json* sim = find(doc, "simulate")) {
        if (!sim->is_object()) throw ConfigError("simulate must be a table", "simulate");
        cfg.simulate.policy = get_string(*sim, "policy", "greedy");
        if (cfg.simulate.policy == "linear_greedy")
            cfg.simulate.policy_mu = get_user_vector(*sim, "mu", m, true);
        else if (cfg.simulate.policy == "fixed")
            cfg.simulate.policy_rates = get_user_vector(*sim, "rates", m, true);
        else if (cfg.simulate.policy != "greedy")
            throw ConfigError("policy must be greedy, linear_greedy or fixed", "simulate.policy");
    }

    if (const nlohmann::json* regions = find(doc, "regions")) {
        if (!regions->is_object()) throw ConfigError("regions must be a table", "regions");
        cfg.region_states = get_vector_list(*regions, "states", m);
    }
    if (const nlohmann::json* boundary = find(doc, "boundary")) {
        if (!boundary->is_object()) throw ConfigError("boundary must be a table", "boundary");
        cfg.boundary_mu = get_vector_list(*boundary, "mu", m);
    }
    if (const nlohmann::json* output = find(doc, "output")) {
        if (!output->is_object()) throw ConfigError("output must be a table", "output");
        cfg.out_dir = get_string(*output, "dir", cfg.out_dir);
    }

    // eagerly construct the model and utility so field errors surface as
    // config errors at load time
    const FadingModel fm = cfg.fading();
    const UtilityFunction u = cfg.utility();
    if (u.dim() != m) throw ConfigError("utility dimension must equal the user count", "utility");
    if (cfg.mode == RunMode::power_control) {
        if (!fm.is_independent())
            throw ConfigError("power-control mode requires independent fading", "fading.cov");
        if (!fm.is_continuous())
            throw ConfigError("power-control mode requires continuous fading marginals", "fading.type");
    }

    // canonical defaults-applied view
    nlohmann::json canon;
    canon["scenario"] = {{"users", cfg.scenario.num_users},
                         {"noise", cfg.scenario.noise},
                         {"mode", mode},
                         {"seed", seed},
                         {"samples", samples}};
    if (cfg.mode == RunMode::fixed_power)
        canon["scenario"]["power"] = cfg.scenario.powers;
    else
        canon["scenario"]["avg_power"] = cfg.avg_power;
    canon["fading"] = cfg.fading_spec_;
    canon["utility"] = cfg.utility_spec_;
    canon["solver"] = {{"gap_tol", cfg.solver.gap_tol},
                       {"max_iter", cfg.solver.max_iter},
                       {"quad_tol", cfg.solver.quad_tol},
                       {"power_rel_tol", cfg.solver.power_rel_tol},
                       {"step_rule", cfg.solver.step_rule == StepRule::armijo ? "armijo" : "limited-max"}};
    canon["bounds"] = {{"epsilon_grid", cfg.bounds.epsilon_grid},
                       {"cov_scales", cfg.bounds.cov_scales},
                       {"constant_states", cfg.bounds.constant_states},
                       {"points_per_state", cfg.bounds.points_per_state}};
    canon["simulate"] = {{"policy", cfg.simulate.policy}};
    if (!cfg.simulate.policy_mu.empty()) canon["simulate"]["mu"] = cfg.simulate.policy_mu;
    if (!cfg.simulate.policy_rates.empty())
        canon["simulate"]["rates"] = cfg.simulate.policy_rates;
    canon["regions"] = {{"states", cfg.region_states}};
    canon["boundary"] = {{"mu", cfg.boundary_mu}};
    canon["output"] = {{"dir", cfg.out_dir}};
    cfg.canonical = std::move(canon);
    return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) {
    return make_scenario_config(load_config_file(path));
}

std::string config_hash(const nlohmann::json& canonical) {
    const std::string dump = canonical.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace macalloc
