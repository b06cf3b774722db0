#include "rosch/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "rosch/errors.hpp"
#include "rosch/io.hpp"

namespace rosch {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

double parse_double(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos == s.size() && std::isfinite(v)) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("'" + key + "' expects a number, got '" + s + "'");
}

long long parse_int(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos == s.size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("'" + key + "' expects an integer, got '" + s + "'");
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t k = 0; k < items.size(); ++k) {
        out += (k ? "," : "") + items[k];
    }
    return out;
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "problem.kind",          "problem.epsilon",      "problem.p",          "grid.dx",
        "decomp.M1",             "decomp.M2",            "decomp.dx_o",        "decomp.dx_b",
        "sampling.N",            "sampling.R",           "sampling.D",         "sampling.seed",
        "sampling.test_fraction", "surrogate.delta1",    "surrogate.init",     "surrogate.buffered",
        "surrogate.init_seed",   "train.epochs",         "train.batch_fraction", "train.lr",
        "train.beta1",           "train.beta2",          "train.adam_eps",     "train.decay_rate",
        "train.decay_every",     "train.mu",             "train.seed",         "train.eval_every",
        "schwarz.delta0",        "schwarz.max_iter",     "schwarz.modes",      "schwarz.bcs",
        "solver.newton_tol",     "solver.newton_max_iter", "solver.pgd_tol",   "solver.pgd_max_iter",
        "solver.armijo_c1",      "solver.armijo_factor", "solver.armijo_initial_step",
        "solver.pgd_preconditioner", "spectrum.epsilons", "spectrum.dxs",      "run.threads",
        "paths.workdir",
    };
    return keys;
}

} // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& source) {
    KeyValueConfig kv;
    kv.source_ = source;
    std::stringstream ss(text);
    std::string line;
    int n = 0;
    while (std::getline(ss, line)) {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(n) + ": expected 'key = value'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(source + ":" + std::to_string(n) + ": empty key");
        }
        if (kv.values_.count(key)) {
            throw ConfigError(source + ":" + std::to_string(n) + ": duplicate key '" + key + "'");
        }
        kv.values_[key] = value;
    }
    return kv;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file '" + path.string() + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? parse_double(key, values_.at(key)) : fallback;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    return has(key) ? parse_int(key, values_.at(key)) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) {
        return fallback;
    }
    const std::string& v = values_.at(key);
    if (v == "yes" || v == "true" || v == "1") {
        return true;
    }
    if (v == "no" || v == "false" || v == "0") {
        return false;
    }
    throw ConfigError("'" + key + "' expects yes/no, got '" + v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) {
        return fallback;
    }
    std::vector<double> out;
    for (const auto& s : split_list(values_.at(key))) {
        out.push_back(parse_double(key, s));
    }
    return out;
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key,
                                                     const std::vector<std::string>& fallback) const {
    return has(key) ? split_list(values_.at(key)) : fallback;
}

std::string KeyValueConfig::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        out += k + " = " + v + "\n";
    }
    return out;
}

std::string to_string(InitKind kind) { return kind == InitKind::Svd ? "svd" : "random"; }

ExperimentConfig ExperimentConfig::from(const KeyValueConfig& kv) {
    for (const auto& [k, v] : kv.values()) {
        if (!known_keys().count(k)) {
            throw ConfigError("unknown config key '" + k + "'");
        }
    }
    ExperimentConfig c;
    const std::string kind = kv.get_string("problem.kind", "semilinear");
    try {
        switch (problem_kind_from_string(kind)) {
        case ProblemKind::Semilinear: c.problem = ProblemSpec::semilinear(kv.get_double("problem.epsilon", 0.125)); break;
        case ProblemKind::PLaplace: c.problem = ProblemSpec::plaplace(kv.get_double("problem.p", 6.0)); break;
        case ProblemKind::LinearDiffusion:
            throw ConfigError("problem.kind must be semilinear or plaplace");
        }
    } catch (const LookupError& e) {
        throw ConfigError(e.what());
    }
    const bool plap = c.problem.kind == ProblemKind::PLaplace;

    c.dx = kv.get_double("grid.dx", c.dx);
    c.M1 = static_cast<int>(kv.get_int("decomp.M1", c.M1));
    c.M2 = static_cast<int>(kv.get_int("decomp.M2", c.M2));
    c.dx_o = kv.get_double("decomp.dx_o", plap ? 0.03125 : c.dx_o);
    c.dx_b = kv.get_double("decomp.dx_b", plap ? 0.09375 : c.dx_b);

    c.N = static_cast<int>(kv.get_int("sampling.N", c.N));
    c.law.R = kv.get_double("sampling.R", plap ? 10.0 : 1000.0);
    c.law.D = kv.get_double("sampling.D", 3.0);
    c.law.seed = static_cast<std::uint64_t>(kv.get_int("sampling.seed", 1));
    c.test_fraction = kv.get_double("sampling.test_fraction", c.test_fraction);

    c.delta1 = kv.get_double("surrogate.delta1", c.delta1);
    const std::string init = kv.get_string("surrogate.init", "svd");
    if (init == "svd") {
        c.init = InitKind::Svd;
    } else if (init == "random") {
        c.init = InitKind::Random;
    } else {
        throw ConfigError("surrogate.init must be svd or random, got '" + init + "'");
    }
    c.buffered = kv.get_bool("surrogate.buffered", true);
    c.init_seed = static_cast<std::uint64_t>(kv.get_int("surrogate.init_seed", 1));

    TrainConfig& t = c.train;
    t.epochs = static_cast<int>(kv.get_int("train.epochs", 1500));
    t.batch_fraction = kv.get_double("train.batch_fraction", t.batch_fraction);
    t.lr = kv.get_double("train.lr", t.lr);
    t.adam.beta1 = kv.get_double("train.beta1", t.adam.beta1);
    t.adam.beta2 = kv.get_double("train.beta2", t.adam.beta2);
    t.adam.eps = kv.get_double("train.adam_eps", t.adam.eps);
    t.decay_rate = kv.get_double("train.decay_rate", t.decay_rate);
    t.decay_every = static_cast<int>(kv.get_int("train.decay_every", t.decay_every));
    t.mu = kv.get_double("train.mu", t.mu);
    t.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", 1));
    t.eval_every = static_cast<int>(kv.get_int("train.eval_every", 10));

    c.schwarz.delta0 = kv.get_double("schwarz.delta0", c.schwarz.delta0);
    c.schwarz.max_iter = static_cast<int>(kv.get_int("schwarz.max_iter", c.schwarz.max_iter));
    if (kv.has("schwarz.modes")) {
        c.modes.clear();
        for (const auto& m : kv.get_strings("schwarz.modes", {})) {
            c.modes.push_back(schwarz_mode_from_string(m));
        }
    }
    if (kv.has("schwarz.bcs")) {
        c.bcs.clear();
        for (const auto& b : kv.get_strings("schwarz.bcs", {})) {
            c.bcs.push_back(static_cast<int>(parse_int("schwarz.bcs", b)));
        }
    }

    SolveOptions& s = c.solver;
    s.newton_tol = kv.get_double("solver.newton_tol", s.newton_tol);
    s.newton_max_iter = static_cast<int>(kv.get_int("solver.newton_max_iter", s.newton_max_iter));
    s.pgd_tol = kv.get_double("solver.pgd_tol", s.pgd_tol);
    s.pgd_max_iter = static_cast<int>(kv.get_int("solver.pgd_max_iter", s.pgd_max_iter));
    s.armijo.c1 = kv.get_double("solver.armijo_c1", s.armijo.c1);
    s.armijo.factor = kv.get_double("solver.armijo_factor", s.armijo.factor);
    s.armijo.initial_step = kv.get_double("solver.armijo_initial_step", s.armijo.initial_step);
    const std::string pre = kv.get_string("solver.pgd_preconditioner", "hessian");
    if (pre == "hessian") {
        s.pgd_preconditioner = DescentPreconditioner::Hessian;
    } else if (pre == "stiffness") {
        s.pgd_preconditioner = DescentPreconditioner::Stiffness;
    } else {
        throw ConfigError("solver.pgd_preconditioner must be hessian or stiffness, got '" + pre + "'");
    }

    c.spectrum_epsilons = kv.get_doubles("spectrum.epsilons", c.spectrum_epsilons);
    c.spectrum_dxs = kv.get_doubles("spectrum.dxs", c.spectrum_dxs);
    c.threads = static_cast<int>(kv.get_int("run.threads", c.threads));
    c.workdir = kv.get_string("paths.workdir", c.workdir.string());
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    return from(KeyValueConfig::load(path));
}

KeyValueConfig ExperimentConfig::to_key_values() const {
    KeyValueConfig kv;
    kv.set("problem.kind", std::string(to_string(problem.kind)));
    if (problem.kind == ProblemKind::Semilinear) {
        kv.set("problem.epsilon", format_double(problem.epsilon));
    } else {
        kv.set("problem.p", format_double(problem.p));
    }
    kv.set("grid.dx", format_double(dx));
    kv.set("decomp.M1", std::to_string(M1));
    kv.set("decomp.M2", std::to_string(M2));
    kv.set("decomp.dx_o", format_double(dx_o));
    kv.set("decomp.dx_b", format_double(dx_b));
    kv.set("sampling.N", std::to_string(N));
    kv.set("sampling.R", format_double(law.R));
    kv.set("sampling.D", format_double(law.D));
    kv.set("sampling.seed", std::to_string(law.seed));
    kv.set("sampling.test_fraction", format_double(test_fraction));
    kv.set("surrogate.delta1", format_double(delta1));
    kv.set("surrogate.init", to_string(init));
    kv.set("surrogate.buffered", buffered ? "yes" : "no");
    kv.set("surrogate.init_seed", std::to_string(init_seed));
    kv.set("train.epochs", std::to_string(train.epochs));
    kv.set("train.batch_fraction", format_double(train.batch_fraction));
    kv.set("train.lr", format_double(train.lr));
    kv.set("train.beta1", format_double(train.adam.beta1));
    kv.set("train.beta2", format_double(train.adam.beta2));
    kv.set("train.adam_eps", format_double(train.adam.eps));
    kv.set("train.decay_rate", format_double(train.decay_rate));
    kv.set("train.decay_every", std::to_string(train.decay_every));
    kv.set("train.mu", format_double(train.mu));
    kv.set("train.seed", std::to_string(train.seed));
    kv.set("train.eval_every", std::to_string(train.eval_every));
    kv.set("schwarz.delta0", format_double(schwarz.delta0));
    kv.set("schwarz.max_iter", std::to_string(schwarz.max_iter));
    std::vector<std::string> ms;
    for (SchwarzMode m : modes) {
        ms.push_back(to_string(m));
    }
    kv.set("schwarz.modes", join(ms));
    std::vector<std::string> bs;
    for (int b : bcs) {
        bs.push_back(std::to_string(b));
    }
    kv.set("schwarz.bcs", join(bs));
    kv.set("solver.newton_tol", format_double(solver.newton_tol));
    kv.set("solver.newton_max_iter", std::to_string(solver.newton_max_iter));
    kv.set("solver.pgd_tol", format_double(solver.pgd_tol));
    kv.set("solver.pgd_max_iter", std::to_string(solver.pgd_max_iter));
    kv.set("solver.armijo_c1", format_double(solver.armijo.c1));
    kv.set("solver.armijo_factor", format_double(solver.armijo.factor));
    kv.set("solver.armijo_initial_step", format_double(solver.armijo.initial_step));
    kv.set("solver.pgd_preconditioner",
           solver.pgd_preconditioner == DescentPreconditioner::Hessian ? "hessian" : "stiffness");
    std::vector<std::string> es;
    for (double e : spectrum_epsilons) {
        es.push_back(format_double(e));
    }
    kv.set("spectrum.epsilons", join(es));
    std::vector<std::string> ds;
    for (double d : spectrum_dxs) {
        ds.push_back(format_double(d));
    }
    kv.set("spectrum.dxs", join(ds));
    kv.set("run.threads", std::to_string(threads));
    kv.set("paths.workdir", workdir.string());
    return kv;
}

std::string ExperimentConfig::hash() const {
    KeyValueConfig kv = to_key_values();
    // Where the run happens and how many threads it uses do not change results.
    kv.set("paths.workdir", "");
    kv.set("run.threads", "");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(kv.canonical())));
    return buf;
}

void ExperimentConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) {
            throw ConfigError(std::string(name) + " must be positive");
        }
    };
    positive(dx, "grid.dx");
    positive(dx_o, "decomp.dx_o");
    positive(dx_b, "decomp.dx_b");
    positive(delta1, "surrogate.delta1");
    positive(law.R, "sampling.R");
    if (M1 < 1 || M2 < 1) {
        throw ConfigError("decomp.M1 and decomp.M2 must be at least 1");
    }
    if (N < 1) {
        throw ConfigError("sampling.N must be at least 1");
    }
    if (!(law.D >= 0.0)) {
        throw ConfigError("sampling.D must be nonnegative");
    }
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
        throw ConfigError("sampling.test_fraction must lie in [0, 1)");
    }
    if (threads < 1) {
        throw ConfigError("run.threads must be at least 1");
    }
    for (int b : bcs) {
        if (b < 1 || b > 3) {
            throw ConfigError("schwarz.bcs entries must be 1, 2 or 3");
        }
    }
    for (double e : spectrum_epsilons) {
        positive(e, "spectrum.epsilons");
    }
    for (double d : spectrum_dxs) {
        positive(d, "spectrum.dxs");
    }
    try {
        train.validate();
        solver.validate();
        schwarz.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    try {
        const GridSpec global = GridSpec::build({0.0, 0.0}, {1.0, 1.0}, dx);
        Decomposition::build(M1, M2, dx_o, dx_b, global);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("geometry: ") + e.what());
    }
    if (dx_o + dx_b > 1.0 / std::max(M1, M2) + 1e-12 && std::min(M1, M2) >= 3) {
        throw ConfigError("decomp.dx_o + decomp.dx_b must not exceed the patch width so buffered patches stay inside the domain");
    }
}

} // namespace rosch
