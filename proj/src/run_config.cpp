#include "dpacq/run_config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <functional>
#include <map>
#include <sstream>

#include "dpacq/csv.hpp"
#include "dpacq/error.hpp"

namespace dpacq {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

long as_long(const std::string& key, const std::string& v) {
    try {
        return parse_long(v);
    } catch (const Error&) {
        throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
    }
}

int as_int(const std::string& key, const std::string& v) { return static_cast<int>(as_long(key, v)); }

double as_double(const std::string& key, const std::string& v) {
    if (v == "inf") return std::numeric_limits<double>::infinity();
    double d = 0;
    try {
        d = parse_double(v);
    } catch (const Error&) {
        throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
    }
    if (std::isnan(d)) throw ConfigError("key '" + key + "' must not be nan");
    return d;
}

bool as_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "' expects true/false, got '" + v + "'");
}

std::string num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return format_double(v);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
    Setter set;
    Getter get;
    bool affects_results = true;
};

const std::map<std::string, Key>& keys() {
    static const std::map<std::string, Key> table = [] {
        std::map<std::string, Key> t;
        t["corpus"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                           if (v == "synthetic") c.corpus = CorpusSource::synthetic;
                           else if (v == "pack") c.corpus = CorpusSource::pack;
                           else if (v == "pgm") c.corpus = CorpusSource::pgm;
                           else throw ConfigError("corpus must be synthetic, pack or pgm");
                       },
                       [](const RunConfig& c) {
                           return std::string(c.corpus == CorpusSource::synthetic ? "synthetic"
                                              : c.corpus == CorpusSource::pack  ? "pack"
                                                                                : "pgm");
                       }};
        t["corpus_n"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.corpus_n = as_int(k, v); },
                         [](const RunConfig& c) { return std::to_string(c.corpus_n); }};
        t["resolution"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.resolution = as_int(k, v); },
                           [](const RunConfig& c) { return std::to_string(c.resolution); }};
        t["corpus_path"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.corpus_path = v; },
                            [](const RunConfig& c) { return c.corpus_path; }};
        t["descriptor"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                               if (v == "pca") c.descriptor = DescriptorSource::pca;
                               else if (v == "import") c.descriptor = DescriptorSource::import;
                               else throw ConfigError("descriptor must be pca or import");
                           },
                           [](const RunConfig& c) {
                               return std::string(c.descriptor == DescriptorSource::pca ? "pca" : "import");
                           }};
        t["latent_dim"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.latent_dim = as_int(k, v); },
                           [](const RunConfig& c) { return std::to_string(c.latent_dim); }};
        t["latent_path"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.latent_path = v; },
                            [](const RunConfig& c) { return c.latent_path; }};
        t["E_solid"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.material.E_solid = as_double(k, v); },
                        [](const RunConfig& c) { return num(c.material.E_solid); }};
        t["void_ratio"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.material.void_ratio = as_double(k, v); },
                           [](const RunConfig& c) { return num(c.material.void_ratio); }};
        t["nu"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.material.nu = as_double(k, v); },
                   [](const RunConfig& c) { return num(c.material.nu); }};
        t["k"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.k = as_int(k, v); },
                  [](const RunConfig& c) { return std::to_string(c.acq.k); }};
        t["epsilon"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.epsilon = as_double(k, v); },
                        [](const RunConfig& c) { return num(c.acq.epsilon); }};
        t["tau1"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.tau1 = as_double(k, v); },
                     [](const RunConfig& c) { return num(c.acq.tau1); }};
        t["tau2"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.tau2 = as_double(k, v); },
                     [](const RunConfig& c) { return num(c.acq.tau2); }};
        t["i_tol"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.i_tol = as_int(k, v); },
                      [](const RunConfig& c) { return std::to_string(c.acq.i_tol); }};
        t["i_max"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.i_max = as_int(k, v); },
                      [](const RunConfig& c) { return std::to_string(c.acq.i_max); }};
        t["dv"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.dv = as_long(k, v); },
                   [](const RunConfig& c) { return std::to_string(c.acq.dv); }};
        t["target_size"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.target_size = as_int(k, v); },
                            [](const RunConfig& c) { return std::to_string(c.acq.target_size); }};
        t["shape_bandwidth"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                    if (v == "median") {
                                        c.acq.shape_bandwidth_median = true;
                                    } else {
                                        c.acq.shape_bandwidth_median = false;
                                        c.acq.shape_bandwidth = as_double(k, v);
                                    }
                                },
                                [](const RunConfig& c) {
                                    return c.acq.shape_bandwidth_median ? std::string("median") : num(c.acq.shape_bandwidth);
                                }};
        t["property_bandwidth"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.property_bandwidth = as_double(k, v); },
                                   [](const RunConfig& c) { return num(c.acq.property_bandwidth); }};
        t["quality"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.acq.quality.kind = parse_quality_kind(v); },
                        [](const RunConfig& c) { return to_string(c.acq.quality.kind); }};
        t["quality_delta"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.quality.delta = as_double(k, v); },
                              [](const RunConfig& c) { return num(c.acq.quality.delta); }};
        t["activation_slope"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.quality.activation_slope = as_double(k, v); },
                                 [](const RunConfig& c) { return num(c.acq.quality.activation_slope); }};
        t["activation_direction"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.acq.quality.direction = parse_direction(v); },
                                     [](const RunConfig& c) { return to_string(c.acq.quality.direction); }};
        t["seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         const long s = as_long(k, v);
                         if (s < 0) throw ConfigError("seed must be non-negative");
                         c.acq.master_seed = static_cast<std::uint64_t>(s);
                     },
                     [](const RunConfig& c) { return std::to_string(c.acq.master_seed); }};
        t["refit_every"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.refit_every = as_int(k, v); },
                            [](const RunConfig& c) { return std::to_string(c.acq.refit_every); }};
        t["n_rep"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.n_rep = as_int(k, v); },
                      [](const RunConfig& c) { return std::to_string(c.acq.n_rep); }};
        t["track_gains"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.track_gains = as_bool(k, v); },
                            [](const RunConfig& c) { return std::string(c.acq.track_gains ? "true" : "false"); }};
        t["gp_restarts"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.gp.restarts = as_int(k, v); },
                            [](const RunConfig& c) { return std::to_string(c.acq.gp.restarts); }};
        t["gp_max_iter"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.gp.max_iter = as_int(k, v); },
                            [](const RunConfig& c) { return std::to_string(c.acq.gp.max_iter); }};
        t["gp_omega_lower"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.gp.omega_lower = as_double(k, v); },
                               [](const RunConfig& c) { return num(c.acq.gp.omega_lower); }};
        t["gp_omega_upper"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.gp.omega_upper = as_double(k, v); },
                               [](const RunConfig& c) { return num(c.acq.gp.omega_upper); }};
        t["gp_restart_margin"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.gp.restart_margin = as_double(k, v); },
                                  [](const RunConfig& c) { return num(c.acq.gp.restart_margin); }};
        t["gp_warm_restarts"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.gp.warm_restarts = as_bool(k, v); },
                                 [](const RunConfig& c) { return std::string(c.acq.gp.warm_restarts ? "true" : "false"); }};
        t["gp_nugget"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                              if (v == "estimate") {
                                  c.acq.gp.estimate_nugget = true;
                              } else if (v == "jitter") {
                                  c.acq.gp.estimate_nugget = false;
                              } else {
                                  throw ConfigError("'" + k + "' must be estimate or jitter, got '" + v + "'");
                              }
                          },
                          [](const RunConfig& c) { return std::string(c.acq.gp.estimate_nugget ? "estimate" : "jitter"); }};
        t["gp_nugget_log10_lower"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.gp.nugget_log10_lower = as_double(k, v); },
                                      [](const RunConfig& c) { return num(c.acq.gp.nugget_log10_lower); }};
        t["gp_nugget_log10_upper"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.gp.nugget_log10_upper = as_double(k, v); },
                                      [](const RunConfig& c) { return num(c.acq.gp.nugget_log10_upper); }};
        t["gp_nugget_max"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.acq.gp.nugget_max = as_double(k, v); },
                              [](const RunConfig& c) { return num(c.acq.gp.nugget_max); }};
        t["reference_properties"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.reference_properties = v; },
                                     [](const RunConfig& c) { return c.reference_properties; }};
        t["output_dir"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
                           [](const RunConfig& c) { return c.output_dir; }, false};
        t["checkpoint_every"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.checkpoint_every = as_int(k, v); },
                                 [](const RunConfig& c) { return std::to_string(c.checkpoint_every); }, false};
        t["threads"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.threads = as_int(k, v); },
                        [](const RunConfig& c) { return std::to_string(c.threads); }, false};
        return t;
    }();
    return table;
}

std::string dump(const RunConfig& cfg, bool results_only) {
    std::ostringstream os;
    for (const auto& [name, key] : keys()) {
        if (results_only && !key.affects_results) continue;
        os << name << " = " << key.get(cfg) << '\n';
    }
    return os.str();
}

}  // namespace

void RunConfig::validate() const {
    if (corpus == CorpusSource::synthetic && corpus_n < 1) throw ConfigError("corpus_n must be at least 1");
    if (corpus != CorpusSource::synthetic && corpus_path.empty()) throw ConfigError("corpus_path is required for pack/pgm corpora");
    if (resolution < 10) throw ConfigError("resolution must be at least 10");
    if (descriptor == DescriptorSource::pca && latent_dim < 1) throw ConfigError("latent_dim must be at least 1");
    if (descriptor == DescriptorSource::import && latent_path.empty()) throw ConfigError("latent_path is required for descriptor = import");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be at least 1");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    material.validate();
    acq.validate();
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto it = keys().find(key);
    if (it == keys().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(cfg, key, value);
}

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            set_config_value(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_run_config(ss.str());
}

std::string resolved_config(const RunConfig& cfg) { return dump(cfg, false); }

std::string run_fingerprint(const RunConfig& cfg) { return dump(cfg, true); }

}  // namespace dpacq
