#include "ctdelay/experiment.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ctdelay/dataset_io.hpp"

namespace ctdelay {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& field, const std::string& what) {
    throw std::invalid_argument("config: " + field + ": " + what);
}

template <class T>
T get(const json& j, const std::string& key, const std::string& path, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        bad(path + key, "wrong type");
    }
}

template <class T>
T require(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key) || j[key].is_null()) bad(path + key, "missing");
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        bad(path + key, "wrong type");
    }
}

std::string delay_label(double v) {
    std::ostringstream os;
    os << v << "s";
    return os.str();
}

SchemeSpec parse_scheme(const json& j, std::size_t index) {
    const std::string path = "schemes[" + std::to_string(index) + "].";
    if (!j.is_object()) bad(path, "expected an object");
    SchemeSpec s;
    const std::string kind = require<std::string>(j, "kind", path);
    s.name = get<std::string>(j, "name", path, kind);
    if (kind == "regular") {
        s.sampling.kind = SamplingSpec::Kind::Regular;
        s.sampling.h = require<double>(j, "h", path);
        s.excitation.clock_period = get<double>(j, "clock_period", path, s.sampling.h);
    } else if (kind == "irregular") {
        s.sampling.kind = SamplingSpec::Kind::IrregularUniform;
        s.sampling.lo = require<double>(j, "lo", path);
        s.sampling.hi = require<double>(j, "hi", path);
        s.excitation.clock_period = require<double>(j, "clock_period", path);
    } else {
        bad(path + "kind", "expected 'regular' or 'irregular', got '" + kind + "'");
    }
    s.sampling.n_samples = require<std::size_t>(j, "n_samples", path);
    return s;
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::Redundant: return "redundant";
        case Method::SingleFilter: return "single-filter";
        case Method::BaselineAlg2: return "baseline-alg2";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    if (name == "redundant") return Method::Redundant;
    if (name == "single-filter") return Method::SingleFilter;
    if (name == "baseline-alg2") return Method::BaselineAlg2;
    throw std::invalid_argument("unknown method '" + std::string(name) +
                                "' (expected redundant, single-filter or baseline-alg2)");
}

void ExperimentConfig::validate() const {
    if (n < 1 || m < 0 || m >= n) bad("orders", "need n >= 1 and 0 <= m < n");
    if (schemes.empty()) bad("schemes", "at least one sampling scheme is required");
    for (std::size_t i = 0; i < schemes.size(); ++i) {
        try {
            schemes[i].sampling.validate();
            schemes[i].excitation.validate();
        } catch (const std::invalid_argument& e) {
            bad("schemes[" + std::to_string(i) + "]", e.what());
        }
        for (std::size_t j = 0; j < i; ++j)
            if (schemes[j].name == schemes[i].name) bad("schemes", "duplicate name '" + schemes[i].name + "'");
    }
    if (snr_db.empty()) bad("snr_db", "at least one level is required");
    if (initial_delays.empty()) bad("initial_delays", "at least one entry is required");
    for (const auto& c : initial_delays) {
        if (c.fixed && (*c.fixed < gn.tau_min || *c.fixed > gn.tau_max)) bad("initial_delays", c.label + " outside [tau_min, tau_max]");
        if (!c.fixed && !(c.lo >= gn.tau_min && c.hi <= gn.tau_max && c.lo < c.hi))
            bad("initial_delays", "random range must satisfy tau_min <= lo < hi <= tau_max");
    }
    try {
        gn.validate();
    } catch (const std::invalid_argument& e) {
        bad("gn", e.what());
    }
    if (!(omega_svf > 0.0)) bad("omega_svf", "must be > 0");
    if (!(eps_outer > 0.0)) bad("eps_outer", "must be > 0");
    if (max_outer < 1) bad("max_outer", "must be >= 1");
    if (runs < 1) bad("runs", "must be >= 1");
    if (!(success_percent > 0.0)) bad("success_percent", "must be > 0");
    if (!(baseline_fraction > 0.0 && baseline_fraction <= 1.0)) bad("baseline_fraction", "must be in (0, 1]");
    if (!system.is_stable()) bad("system.den", "the true system must be stable");
    if (!(system.delay() > 0.0)) bad("system.delay", "the relative error needs a true delay > 0");
    if (bank.cutoffs.empty() && (bank.n_f < 2 || !(bank.beta > 1.0))) bad("bank", "need n_f >= 2 and beta > 1");
    if (bank.order < 1) bad("bank.order", "must be >= 1");
    if (method == Method::SingleFilter) {
        const int size = bank.cutoffs.empty() ? bank.n_f : static_cast<int>(bank.cutoffs.size());
        if (filter_index < 1 || filter_index > size) bad("filter_index", "outside the bank");
    }
}

double ExperimentConfig::system_bandwidth() const { return bank.bandwidth ? *bank.bandwidth : bandwidth(system); }

FilterBank ExperimentConfig::make_bank() const {
    if (!bank.cutoffs.empty()) return bank_from_cutoffs(bank.cutoffs, bank.order);
    return design_bank(system_bandwidth(), bank.beta, bank.n_f, bank.order, bank.theorem_mode);
}

RedundancyConfig ExperimentConfig::redundancy() const {
    RedundancyConfig r;
    r.bank = make_bank();
    r.gn = gn;
    r.n = n;
    r.m = m;
    r.omega_svf = omega_svf;
    r.eps_outer = eps_outer;
    r.max_outer = max_outer;
    return r;
}

ExperimentConfig parse_experiment(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    if (!j.is_object()) bad("(root)", "expected an object");

    ExperimentConfig c;
    c.name = get<std::string>(j, "name", "", c.name);

    if (!j.contains("system")) bad("system", "missing");
    const auto& sys = j["system"];
    try {
        c.system = CtModel(require<std::vector<double>>(sys, "num", "system."), require<std::vector<double>>(sys, "den", "system."),
                           require<double>(sys, "delay", "system."));
    } catch (const std::invalid_argument& e) {
        bad("system", e.what());
    }
    c.n = c.system.order();
    c.m = c.system.num_order();
    if (j.contains("orders")) {
        c.n = get<int>(j["orders"], "n", "orders.", c.n);
        c.m = get<int>(j["orders"], "m", "orders.", c.m);
    }

    ExcitationSpec exc;
    if (j.contains("excitation")) {
        exc.stages = get<int>(j["excitation"], "stages", "excitation.", exc.stages);
        exc.amplitude = get<double>(j["excitation"], "amplitude", "excitation.", exc.amplitude);
    }
    if (!j.contains("schemes") || !j["schemes"].is_array()) bad("schemes", "expected an array");
    for (std::size_t i = 0; i < j["schemes"].size(); ++i) {
        SchemeSpec s = parse_scheme(j["schemes"][i], i);
        s.excitation.stages = exc.stages;
        s.excitation.amplitude = exc.amplitude;
        c.schemes.push_back(std::move(s));
    }

    const json snr = j.contains("snr_db") ? j["snr_db"] : json(nullptr);
    const json snr_list = snr.is_array() ? snr : json::array({snr});
    for (const auto& v : snr_list) {
        if (v.is_null())
            c.snr_db.emplace_back();
        else if (v.is_number())
            c.snr_db.emplace_back(v.get<double>());
        else
            bad("snr_db", "expected numbers or null");
    }

    if (!j.contains("initial_delays") || !j["initial_delays"].is_array()) bad("initial_delays", "expected an array");
    for (const auto& v : j["initial_delays"]) {
        DelayCell cell;
        if (v.is_number()) {
            cell.fixed = v.get<double>();
            cell.label = delay_label(*cell.fixed);
        } else if (v.is_object() && v.contains("random") && v["random"].is_array() && v["random"].size() == 2) {
            cell.lo = v["random"][0].get<double>();
            cell.hi = v["random"][1].get<double>();
            std::ostringstream os;
            os << "U[" << cell.lo << "," << cell.hi << "]";
            cell.label = os.str();
        } else {
            bad("initial_delays", "entries are numbers or {\"random\": [lo, hi]}");
        }
        c.initial_delays.push_back(std::move(cell));
    }

    if (j.contains("bank")) {
        const auto& b = j["bank"];
        c.bank.beta = get<double>(b, "beta", "bank.", c.bank.beta);
        c.bank.n_f = get<int>(b, "n_f", "bank.", c.bank.n_f);
        c.bank.order = get<int>(b, "order", "bank.", c.bank.order);
        c.bank.cutoffs = get<std::vector<double>>(b, "cutoffs", "bank.", {});
        c.bank.theorem_mode = get<bool>(b, "theorem_mode", "bank.", false);
        if (b.contains("bandwidth") && !b["bandwidth"].is_null()) c.bank.bandwidth = get<double>(b, "bandwidth", "bank.", 0.0);
    }
    if (j.contains("gn")) {
        const auto& g = j["gn"];
        c.gn.tau_min = get<double>(g, "tau_min", "gn.", c.gn.tau_min);
        c.gn.tau_max = get<double>(g, "tau_max", "gn.", c.gn.tau_max);
        c.gn.dtau_min = get<double>(g, "dtau_min", "gn.", c.gn.dtau_min);
        c.gn.dtau_max = get<double>(g, "dtau_max", "gn.", c.gn.dtau_max);
        c.gn.mu_halvings_max = get<int>(g, "mu_halvings_max", "gn.", c.gn.mu_halvings_max);
        c.gn.max_iter = get<int>(g, "max_iter", "gn.", c.gn.max_iter);
        c.gn.eps = get<double>(g, "eps", "gn.", c.gn.eps);
        c.gn.srivc_iters = get<int>(g, "srivc_iters", "gn.", c.gn.srivc_iters);
    }
    c.omega_svf = get<double>(j, "omega_svf", "", c.omega_svf);
    c.eps_outer = get<double>(j, "eps_outer", "", c.eps_outer);
    c.max_outer = get<int>(j, "max_outer", "", c.max_outer);
    c.method = parse_method(get<std::string>(j, "method", "", "redundant"));
    c.filter_index = get<int>(j, "filter_index", "", c.filter_index);
    c.baseline_fraction = get<double>(j, "baseline_fraction", "", c.baseline_fraction);
    c.success_percent = get<double>(j, "success_percent", "", c.success_percent);
    c.runs = get<int>(j, "runs", "", c.runs);
    c.master_seed = get<std::uint64_t>(j, "master_seed", "", c.master_seed);
    c.validate();
    return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed for " + path.string());
    try {
        return parse_experiment(ss.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> words) {
    std::uint64_t h = splitmix64(master);
    for (auto w : words) h = splitmix64(h ^ splitmix64(w));
    return h;
}

std::uint64_t label_hash(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

RunSeeds run_seeds(std::uint64_t master, std::string_view scheme, std::optional<double> snr_db, int run) {
    const std::uint64_t snr_word = snr_db ? std::bit_cast<std::uint64_t>(*snr_db) : 0x7FF8DEADULL;
    const auto r = static_cast<std::uint64_t>(run);
    const std::uint64_t s = label_hash(scheme);
    return {derive_seed(master, {s, snr_word, r, 1}), derive_seed(master, {s, snr_word, r, 2}),
            derive_seed(master, {s, snr_word, r, 3})};
}

double initial_delay(const DelayCell& cell, std::uint64_t delay_seed) {
    if (cell.fixed) return *cell.fixed;
    std::mt19937_64 rng(derive_seed(delay_seed, {label_hash(cell.label)}));
    return std::uniform_real_distribution<double>(cell.lo, cell.hi)(rng);
}

}  // namespace ctdelay
