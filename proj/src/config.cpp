#include "phage/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace phage {

ConfigError::ConfigError(const std::string& message, int line, std::string field)
    : std::runtime_error(message), line_(line), field_(std::move(field)) {}

namespace {

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

struct Entry {
    std::string value;
    int line;
};

std::string where(const std::string& source, int line) {
    return line > 0 ? fmt::format("{}:{}", source, line) : source;
}

class Reader {
public:
    Reader(std::map<std::string, Entry> entries, std::string source)
        : entries_(std::move(entries)), source_(std::move(source)) {}

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    double number(const std::string& key, double fallback) {
        if (!has(key)) {
            return fallback;
        }
        return to_double(key, entry(key));
    }

    double required_number(const std::string& key) {
        if (!has(key)) {
            throw ConfigError(fmt::format("{}: missing required field '{}'", source_, key), 0, key);
        }
        return number(key, 0.0);
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) {
            return fallback;
        }
        const Entry& e = entry(key);
        std::uint64_t v = 0;
        const auto* first = e.value.data();
        const auto* last = first + e.value.size();
        const auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc{} || res.ptr != last) {
            fail(key, e, "expected a non-negative integer");
        }
        return v;
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) {
            return fallback;
        }
        const Entry& e = entry(key);
        std::string v = e.value;
        std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
        if (v == "true" || v == "1" || v == "yes" || v == "on") {
            return true;
        }
        if (v == "false" || v == "0" || v == "no" || v == "off") {
            return false;
        }
        fail(key, e, "expected true or false");
    }

    std::string text(const std::string& key, const std::string& fallback) {
        return has(key) ? entry(key).value : fallback;
    }

    std::vector<double> list(const std::string& key) {
        const Entry& e = entry(key);
        return parse_number_list(e.value, key, e.line);
    }

    int line_of(const std::string& key) const { return has(key) ? entries_.at(key).line : 0; }

    [[noreturn]] void fail(const std::string& key, const Entry& e, const std::string& why) const {
        throw ConfigError(fmt::format("{}: field '{}' = '{}': {}", where(source_, e.line), key, e.value, why), e.line,
                          key);
    }

    template <class F>
    void guard(const std::string& key, F&& f) {
        try {
            f();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& ex) {
            const int line = line_of(key);
            throw ConfigError(fmt::format("{}: field '{}': {}", where(source_, line), key, ex.what()), line, key);
        }
    }

    const std::map<std::string, Entry>& entries() const { return entries_; }

private:
    const Entry& entry(const std::string& key) {
        used_.insert(key);
        return entries_.at(key);
    }

    double to_double(const std::string& key, const Entry& e) const {
        double v = 0.0;
        const auto* first = e.value.data();
        const auto* last = first + e.value.size();
        const auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc{} || res.ptr != last) {
            fail(key, e, "expected a real number");
        }
        return v;
    }

    std::map<std::string, Entry> entries_;
    std::string source_;
    std::set<std::string> used_;
};

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "delayed",        "output",      "model.alpha", "model.k",      "model.d",       "model.m",
        "model.b",        "model.mu",    "model.zeta",  "model.M",      "model.bridge",  "model.C_bound",
        "init.family",    "init.S0",     "init.Q0",     "init.a_S",     "init.a_Q",      "grid.dt",
        "grid.t_end",     "grid.align_to_delay",         "noise.eps",   "noise.seed",    "noise.scheme",
        "query.rho",      "query.interval",             "query.kappas", "query.paths",   "query.threads"};
    return keys;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text, const std::string& field, int line) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        double v = 0.0;
        const auto* first = item.data();
        const auto* last = first + item.size();
        const auto res = std::from_chars(first, last, v);
        if (item.empty() || res.ec != std::errc{} || res.ptr != last) {
            throw ConfigError(fmt::format("field '{}': '{}' is not a comma-separated list of reals", field, text),
                              line, field);
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw ConfigError(fmt::format("field '{}': empty list", field), line, field);
    }
    return out;
}

RunConfig parse_config(const std::string& text, const std::string& source) {
    std::map<std::string, Entry> entries;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    static const std::set<std::string> sections = {"model", "init", "grid", "noise", "query"};
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (const auto hash = line.find_first_of("#;"); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(fmt::format("{}: malformed section header '{}'", where(source, line_no), line),
                                  line_no);
            }
            section = trim(line.substr(1, line.size() - 2));
            if (!sections.count(section)) {
                throw ConfigError(fmt::format("{}: unknown section [{}]", where(source, line_no), section), line_no);
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(fmt::format("{}: expected key = value, got '{}'", where(source, line_no), line),
                              line_no);
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;
        if (!known_keys().count(full)) {
            throw ConfigError(fmt::format("{}: unknown field '{}'", where(source, line_no), full), line_no, full);
        }
        if (entries.count(full)) {
            throw ConfigError(fmt::format("{}: duplicate field '{}'", where(source, line_no), full), line_no, full);
        }
        entries[full] = {value, line_no};
    }

    Reader r(std::move(entries), source);
    RunConfig cfg;

    cfg.delayed = r.boolean("delayed", cfg.delayed);
    cfg.output = r.text("output", cfg.output);

    auto& p = cfg.model;
    p.alpha = r.required_number("model.alpha");
    p.k = r.required_number("model.k");
    p.d = r.required_number("model.d");
    p.m = r.required_number("model.m");
    p.b = r.required_number("model.b");
    p.mu = r.required_number("model.mu");
    p.zeta = r.required_number("model.zeta");
    p.sigma_cfg.M = r.required_number("model.M");
    r.guard("model.bridge", [&] {
        p.sigma_cfg.bridge = bridge_from_string(r.text("model.bridge", to_string(p.sigma_cfg.bridge)));
    });
    p.sigma_cfg.C_bound = r.number("model.C_bound", p.sigma_cfg.C_bound);
    try {
        p.validate();
    } catch (const std::exception& ex) {
        throw ConfigError(fmt::format("{}: [model]: {}", source, ex.what()), 0, "model");
    }

    const std::string family = r.text("init.family", to_string(cfg.init.family));
    if (family == "constant") {
        cfg.init = InitialCondition::constant(r.number("init.S0", 0.0), r.number("init.Q0", 0.0));
    } else if (family == "exponential") {
        cfg.init = InitialCondition::exponential(r.number("init.a_S", 4.8), r.number("init.a_Q", 0.0));
    } else {
        throw ConfigError(fmt::format("{}: field 'init.family' = '{}': expected constant or exponential",
                                      where(source, r.line_of("init.family")), family),
                          r.line_of("init.family"), "init.family");
    }

    cfg.grid.dt = r.number("grid.dt", cfg.grid.dt);
    cfg.grid.t_end = r.number("grid.t_end", cfg.grid.t_end);
    cfg.grid.align_to_delay = r.boolean("grid.align_to_delay", cfg.grid.align_to_delay);
    if (!(cfg.grid.dt > 0.0)) {
        throw ConfigError(fmt::format("{}: field 'grid.dt' must be > 0", where(source, r.line_of("grid.dt"))),
                          r.line_of("grid.dt"), "grid.dt");
    }
    if (!(cfg.grid.t_end > 0.0)) {
        throw ConfigError(fmt::format("{}: field 'grid.t_end' must be > 0", where(source, r.line_of("grid.t_end"))),
                          r.line_of("grid.t_end"), "grid.t_end");
    }

    if (r.has("noise.eps") || r.has("noise.seed") || r.has("noise.scheme")) {
        NoiseSettings noise;
        if (r.has("noise.eps")) {
            noise.eps = r.list("noise.eps");
        }
        noise.seed = r.unsigned_integer("noise.seed", noise.seed);
        r.guard("noise.scheme", [&] { noise.scheme = scheme_from_string(r.text("noise.scheme", "em")); });
        cfg.noise = noise;
    }

    auto& q = cfg.query;
    q.rho = r.number("query.rho", q.rho);
    if (r.has("query.interval")) {
        const auto v = r.list("query.interval");
        if (v.size() != 2 || !(v[0] < v[1])) {
            throw ConfigError(fmt::format("{}: field 'query.interval' needs two increasing times a,b",
                                          where(source, r.line_of("query.interval"))),
                              r.line_of("query.interval"), "query.interval");
        }
        q.interval = Interval{v[0], v[1]};
    }
    if (r.has("query.kappas")) {
        const auto v = r.list("query.kappas");
        if (v.size() != 3) {
            throw ConfigError(fmt::format("{}: field 'query.kappas' needs kappa1,kappa2,c",
                                          where(source, r.line_of("query.kappas"))),
                              r.line_of("query.kappas"), "query.kappas");
        }
        q.kappas = std::array<double, 3>{v[0], v[1], v[2]};
    }
    q.paths = static_cast<std::size_t>(r.unsigned_integer("query.paths", q.paths));
    q.threads = static_cast<unsigned>(r.unsigned_integer("query.threads", q.threads));
    if (!(q.rho > 0.0)) {
        throw ConfigError(fmt::format("{}: field 'query.rho' must be > 0", where(source, r.line_of("query.rho"))),
                          r.line_of("query.rho"), "query.rho");
    }
    if (q.paths < 1) {
        throw ConfigError(fmt::format("{}: field 'query.paths' must be >= 1", where(source, r.line_of("query.paths"))),
                          r.line_of("query.paths"), "query.paths");
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot read config file '{}'", path));
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? "," : "") + num(v[i]);
    }
    return out;
}

}  // namespace

std::string dump_config(const RunConfig& cfg) {
    std::string s;
    s += fmt::format("delayed = {}\n", cfg.delayed ? "true" : "false");
    s += fmt::format("output = {}\n", cfg.output);
    const auto& p = cfg.model;
    s += "\n[model]\n";
    s += fmt::format("alpha = {}\nk = {}\nd = {}\nm = {}\nb = {}\nmu = {}\nzeta = {}\nM = {}\n", num(p.alpha),
                     num(p.k), num(p.d), num(p.m), num(p.b), num(p.mu), num(p.zeta), num(p.sigma_cfg.M));
    s += fmt::format("bridge = {}\nC_bound = {}\n", to_string(p.sigma_cfg.bridge), num(p.sigma_cfg.C_bound));
    s += "\n[init]\n";
    s += fmt::format("family = {}\n", to_string(cfg.init.family));
    if (cfg.init.family == InitialCondition::Family::constant) {
        s += fmt::format("S0 = {}\nQ0 = {}\n", num(cfg.init.S0), num(cfg.init.Q0));
    } else {
        s += fmt::format("a_S = {}\na_Q = {}\n", num(cfg.init.a_S), num(cfg.init.a_Q));
    }
    s += "\n[grid]\n";
    s += fmt::format("dt = {}\nt_end = {}\nalign_to_delay = {}\n", num(cfg.grid.dt), num(cfg.grid.t_end),
                     cfg.grid.align_to_delay ? "true" : "false");
    if (cfg.noise) {
        s += "\n[noise]\n";
        if (!cfg.noise->eps.empty()) {
            s += fmt::format("eps = {}\n", join(cfg.noise->eps));
        }
        s += fmt::format("seed = {}\nscheme = {}\n", cfg.noise->seed, to_string(cfg.noise->scheme));
    }
    const auto& q = cfg.query;
    s += "\n[query]\n";
    s += fmt::format("rho = {}\n", num(q.rho));
    if (q.interval) {
        s += fmt::format("interval = {},{}\n", num(q.interval->lo), num(q.interval->hi));
    }
    if (q.kappas) {
        s += fmt::format("kappas = {},{},{}\n", num((*q.kappas)[0]), num((*q.kappas)[1]), num((*q.kappas)[2]));
    }
    s += fmt::format("paths = {}\nthreads = {}\n", q.paths, q.threads);
    return s;
}

}  // namespace phage
