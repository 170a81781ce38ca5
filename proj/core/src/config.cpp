#include "feelsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <map>
#include <sstream>

#include "feelsim/errors.hpp"
#include "feelsim/io.hpp"

namespace feelsim {

std::string SnrPoint::label() const {
    if (noiseless) return "noiseless";
    return fmt_g17(snr_db);
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

struct RawEntry {
    std::string value;
    int line = 0;
};

// key -> (value, line). Duplicate keys: last one wins, like shell config files.
class KeyTable {
  public:
    KeyTable(const std::string& text, std::string origin) : origin_(std::move(origin)) {
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) {
                line = line.substr(0, hash);
            }
            const std::string stripped = trim(line);
            if (stripped.empty()) continue;
            const std::size_t eq = stripped.find('=');
            if (eq == std::string::npos) {
                fail(line_no, "expected `key = value`");
            }
            const std::string key = trim(stripped.substr(0, eq));
            const std::string value = trim(stripped.substr(eq + 1));
            if (key.empty()) {
                fail(line_no, "empty key");
            }
            table_[key] = RawEntry{value, line_no};
        }
    }

    [[noreturn]] void fail(int line, const std::string& msg) const {
        throw ConfigError(origin_ + ":" + std::to_string(line) + ": " + msg);
    }

    [[noreturn]] void fail_key(const std::string& key, const std::string& msg) const {
        const auto it = table_.find(key);
        const int line = it == table_.end() ? 0 : it->second.line;
        throw ConfigError(origin_ + ":" + std::to_string(line) + ": key `" + key +
                          "`: " + msg);
    }

    std::optional<std::string> take(const std::string& key) {
        auto it = table_.find(key);
        if (it == table_.end()) return std::nullopt;
        pending_.emplace(key, it->second);
        std::string v = it->second.value;
        table_.erase(it);
        return v;
    }

    // Everything not consumed is an unknown key.
    void finish() const {
        if (table_.empty()) return;
        const auto& [key, entry] = *table_.begin();
        throw ConfigError(origin_ + ":" + std::to_string(entry.line) +
                          ": unknown key `" + key + "`");
    }

    [[nodiscard]] const std::string& origin() const { return origin_; }

    int line_of(const std::string& key) const {
        auto it = pending_.find(key);
        return it == pending_.end() ? 0 : it->second.line;
    }

  private:
    std::string origin_;
    std::map<std::string, RawEntry> table_;
    std::map<std::string, RawEntry> pending_;  // consumed, kept for error lines
};

class Reader {
  public:
    Reader(const std::string& text, const std::string& origin) : table_(text, origin) {}

    [[noreturn]] void fail_key(const std::string& key, const std::string& msg) const {
        throw ConfigError(table_.origin() + ":" + std::to_string(table_.line_of(key)) +
                          ": key `" + key + "`: " + msg);
    }

    void get_string(const std::string& key, std::string& out) {
        if (auto v = table_.take(key)) out = *v;
    }

    void get_bool(const std::string& key, bool& out) {
        if (auto v = table_.take(key)) {
            if (*v == "true" || *v == "1" || *v == "yes") out = true;
            else if (*v == "false" || *v == "0" || *v == "no") out = false;
            else fail_key(key, "expected a boolean (true/false)");
        }
    }

    double parse_double(const std::string& key, const std::string& v) const {
        try {
            std::size_t used = 0;
            const double x = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            fail_key(key, "not a number: `" + v + "`");
        }
    }

    long long parse_int(const std::string& key, const std::string& v) const {
        try {
            std::size_t used = 0;
            const long long x = std::stoll(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            fail_key(key, "not an integer: `" + v + "`");
        }
    }

    void get_double(const std::string& key, double& out) {
        if (auto v = table_.take(key)) out = parse_double(key, *v);
    }

    void get_int(const std::string& key, int& out) {
        if (auto v = table_.take(key)) {
            const long long x = parse_int(key, *v);
            if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
                fail_key(key, "out of range");
            }
            out = static_cast<int>(x);
        }
    }

    void get_u64(const std::string& key, std::uint64_t& out) {
        if (auto v = table_.take(key)) {
            try {
                std::size_t used = 0;
                const unsigned long long x = std::stoull(*v, &used);
                if (used != v->size()) throw std::invalid_argument(*v);
                out = x;
            } catch (const std::exception&) {
                fail_key(key, "not an unsigned integer: `" + *v + "`");
            }
        }
    }

    std::vector<std::string> split_list(const std::string& v) const {
        std::vector<std::string> items;
        std::string cur;
        std::istringstream in(v);
        while (std::getline(in, cur, ',')) {
            const std::string t = trim(cur);
            if (!t.empty()) items.push_back(t);
        }
        return items;
    }

    void get_double_list(const std::string& key, std::vector<double>& out) {
        if (auto v = table_.take(key)) {
            out.clear();
            for (const std::string& item : split_list(*v)) {
                out.push_back(parse_double(key, item));
            }
        }
    }

    void get_u64_list(const std::string& key, std::vector<std::uint64_t>& out) {
        if (auto v = table_.take(key)) {
            out.clear();
            for (const std::string& item : split_list(*v)) {
                try {
                    std::size_t used = 0;
                    const unsigned long long x = std::stoull(item, &used);
                    if (used != item.size()) throw std::invalid_argument(item);
                    out.push_back(x);
                } catch (const std::exception&) {
                    fail_key(key, "not an unsigned integer: `" + item + "`");
                }
            }
        }
    }

    template <typename T, typename ParseFn>
    void get_enum(const std::string& key, T& out, const ParseFn& parse) {
        if (auto v = table_.take(key)) {
            try {
                out = parse(*v);
            } catch (const ParameterError& e) {
                fail_key(key, e.what());
            }
        }
    }

    template <typename T, typename ParseFn>
    void get_enum_list(const std::string& key, std::vector<T>& out, const ParseFn& parse) {
        if (auto v = table_.take(key)) {
            out.clear();
            for (const std::string& item : split_list(*v)) {
                try {
                    out.push_back(parse(item));
                } catch (const ParameterError& e) {
                    fail_key(key, e.what());
                }
            }
        }
    }

    void get_snr_list(const std::string& key, std::vector<SnrPoint>& out) {
        if (auto v = table_.take(key)) {
            out.clear();
            for (const std::string& item : split_list(*v)) {
                SnrPoint p;
                if (item == "noiseless") {
                    p.noiseless = true;
                } else {
                    p.snr_db = parse_double(key, item);
                }
                out.push_back(p);
            }
        }
    }

    void finish() const { table_.finish(); }

  private:
    KeyTable table_;
};

void require(bool ok, const std::string& key, const std::string& msg,
             const std::string& origin) {
    if (!ok) {
        throw ConfigError(origin + ": key `" + key + "`: " + msg);
    }
}

}  // namespace

ModelSpec ExperimentConfig::model_spec() const {
    ModelSpec spec;
    spec.arch = hidden > 0 ? Arch::mlp : Arch::logistic;
    spec.feature_dim = feature_dim;
    spec.classes = classes;
    spec.hidden = hidden;
    return spec;
}

TrainConfig ExperimentConfig::train_config(std::uint64_t run_seed) const {
    TrainConfig t;
    t.mode = mode;
    t.method = method;
    t.rounds = rounds;
    t.lr = lr;
    t.lr_schedule = lr_schedule;
    t.batch_size = batch_size;
    t.beta = beta;
    t.beta_decay = beta_decay;
    t.mu_prox = mu_prox;
    t.eval_every = eval_every;
    t.seed = run_seed;
    t.threads = threads;
    return t;
}

ChannelSpec ExperimentConfig::channel_spec() const {
    ChannelSpec c;
    c.mode = noise_mode;
    c.value = noise_mode == NoiseMode::sigma ? sigma : snr_db;
    c.power_ref = power_ref;
    return c;
}

void ExperimentConfig::validate() const {
    const std::string o = "config";
    require(devices >= 1, "devices", "must be >= 1", o);
    require(samples_per_device >= 1, "samples_per_device", "must be >= 1", o);
    require(classes >= 2, "classes", "must be >= 2", o);
    require(feature_dim >= 1, "feature_dim", "must be >= 1", o);
    require(hidden >= 0, "hidden", "must be >= 0", o);
    require(mean_radius > 0.0, "mean_radius", "must be > 0", o);
    require(class_std > 0.0, "class_std", "must be > 0", o);
    require(dirichlet_alpha > 0.0, "dirichlet_alpha", "must be > 0", o);
    require(oversample >= 1.0, "oversample", "must be >= 1", o);
    require(test_size >= 1, "test_size", "must be >= 1", o);
    require(rounds >= 0, "rounds", "must be >= 0", o);
    require(lr > 0.0, "lr", "must be > 0", o);
    require(batch_size >= 1, "batch_size", "must be >= 1", o);
    require(beta >= 0.0, "beta", "must be >= 0", o);
    require(beta_decay > 0.0 && beta_decay <= 1.0, "beta_decay", "must be in (0, 1]", o);
    require(mu_prox >= 0.0, "mu_prox", "must be >= 0", o);
    require(eval_every >= 1, "eval_every", "must be >= 1", o);
    require(threads >= 1, "threads", "must be >= 1", o);
    require(er_p > 0.0 && er_p <= 1.0, "er_p", "must be in (0, 1]", o);
    require(sigma >= 0.0, "sigma", "must be >= 0", o);
    require(probe_models >= 10, "probe_models", "must be >= 10", o);
    require(probe_scale > 0.0, "probe_scale", "must be > 0", o);
    require(!seeds.empty(), "seeds", "must not be empty", o);
    require(!out_dir.empty(), "out_dir", "must not be empty", o);
    for (double s : dfl_sigma_scales) {
        require(s >= 0.0, "dfl_sigma_scales", "entries must be >= 0", o);
    }
    if (!dfl_sigma_scales.empty()) {
        require(static_cast<int>(dfl_sigma_scales.size()) == devices, "dfl_sigma_scales",
                "needs one entry per device", o);
    }
    for (double a : sweep_alpha) {
        require(a > 0.0, "sweep_alpha", "entries must be > 0", o);
    }
    for (double l : sweep_lr) {
        require(l > 0.0, "sweep_lr", "entries must be > 0", o);
    }
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    Reader r(text, origin);
    ExperimentConfig cfg;
    r.get_int("devices", cfg.devices);
    r.get_int("samples_per_device", cfg.samples_per_device);
    r.get_int("classes", cfg.classes);
    r.get_int("feature_dim", cfg.feature_dim);
    r.get_int("hidden", cfg.hidden);
    r.get_double("mean_radius", cfg.mean_radius);
    r.get_double("class_std", cfg.class_std);
    r.get_double("dirichlet_alpha", cfg.dirichlet_alpha);
    r.get_double("oversample", cfg.oversample);
    r.get_int("test_size", cfg.test_size);

    r.get_enum("mode", cfg.mode, mode_from_string);
    r.get_enum("method", cfg.method, method_from_string);
    r.get_int("rounds", cfg.rounds);
    r.get_double("lr", cfg.lr);
    r.get_enum("lr_schedule", cfg.lr_schedule, lr_schedule_from_string);
    r.get_int("batch_size", cfg.batch_size);
    r.get_double("beta", cfg.beta);
    r.get_double("beta_decay", cfg.beta_decay);
    r.get_double("mu_prox", cfg.mu_prox);
    r.get_int("eval_every", cfg.eval_every);
    r.get_int("threads", cfg.threads);

    r.get_enum("topology", cfg.topology, graph_kind_from_string);
    r.get_double("er_p", cfg.er_p);
    r.get_double_list("dfl_sigma_scales", cfg.dfl_sigma_scales);

    r.get_enum("noise_mode", cfg.noise_mode, noise_mode_from_string);
    r.get_double("snr_db", cfg.snr_db);
    r.get_double("sigma", cfg.sigma);
    r.get_enum("power_ref", cfg.power_ref, power_ref_from_string);

    r.get_int("probe_models", cfg.probe_models);
    r.get_double("probe_scale", cfg.probe_scale);

    r.get_u64("seed", cfg.seed);
    r.get_u64_list("seeds", cfg.seeds);
    r.get_string("out_dir", cfg.out_dir);
    r.get_bool("plots", cfg.plots);

    r.get_double_list("sweep_alpha", cfg.sweep_alpha);
    r.get_enum_list("sweep_topology", cfg.sweep_topology, graph_kind_from_string);
    r.get_snr_list("sweep_snr_db", cfg.sweep_snr_db);
    r.get_enum_list("sweep_method", cfg.sweep_method, method_from_string);
    r.get_double_list("sweep_lr", cfg.sweep_lr);
    r.get_u64_list("sweep_seed", cfg.sweep_seed);

    r.finish();
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    return parse_config_text(read_file(path), path);
}

namespace {

template <typename T>
std::string join_list(const std::vector<T>& xs, const std::string& (*)(const T&)) = delete;

std::string join_doubles(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += fmt_g17(xs[i]);
    }
    return out;
}

std::string join_u64(const std::vector<std::uint64_t>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(xs[i]);
    }
    return out;
}

}  // namespace

std::string render_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "# resolved experiment config\n";
    out << "devices = " << cfg.devices << "\n";
    out << "samples_per_device = " << cfg.samples_per_device << "\n";
    out << "classes = " << cfg.classes << "\n";
    out << "feature_dim = " << cfg.feature_dim << "\n";
    out << "hidden = " << cfg.hidden << "\n";
    out << "mean_radius = " << fmt_g17(cfg.mean_radius) << "\n";
    out << "class_std = " << fmt_g17(cfg.class_std) << "\n";
    out << "dirichlet_alpha = " << fmt_g17(cfg.dirichlet_alpha) << "\n";
    out << "oversample = " << fmt_g17(cfg.oversample) << "\n";
    out << "test_size = " << cfg.test_size << "\n";
    out << "mode = " << to_string(cfg.mode) << "\n";
    out << "method = " << to_string(cfg.method) << "\n";
    out << "rounds = " << cfg.rounds << "\n";
    out << "lr = " << fmt_g17(cfg.lr) << "\n";
    out << "lr_schedule = " << to_string(cfg.lr_schedule) << "\n";
    out << "batch_size = " << cfg.batch_size << "\n";
    out << "beta = " << fmt_g17(cfg.beta) << "\n";
    out << "beta_decay = " << fmt_g17(cfg.beta_decay) << "\n";
    out << "mu_prox = " << fmt_g17(cfg.mu_prox) << "\n";
    out << "eval_every = " << cfg.eval_every << "\n";
    out << "threads = " << cfg.threads << "\n";
    out << "topology = " << to_string(cfg.topology) << "\n";
    out << "er_p = " << fmt_g17(cfg.er_p) << "\n";
    if (!cfg.dfl_sigma_scales.empty()) {
        out << "dfl_sigma_scales = " << join_doubles(cfg.dfl_sigma_scales) << "\n";
    }
    out << "noise_mode = " << to_string(cfg.noise_mode) << "\n";
    out << "snr_db = " << fmt_g17(cfg.snr_db) << "\n";
    out << "sigma = " << fmt_g17(cfg.sigma) << "\n";
    out << "power_ref = " << to_string(cfg.power_ref) << "\n";
    out << "probe_models = " << cfg.probe_models << "\n";
    out << "probe_scale = " << fmt_g17(cfg.probe_scale) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "seeds = " << join_u64(cfg.seeds) << "\n";
    out << "out_dir = " << cfg.out_dir << "\n";
    out << "plots = " << (cfg.plots ? "true" : "false") << "\n";
    if (!cfg.sweep_alpha.empty()) {
        out << "sweep_alpha = " << join_doubles(cfg.sweep_alpha) << "\n";
    }
    if (!cfg.sweep_topology.empty()) {
        out << "sweep_topology = ";
        for (std::size_t i = 0; i < cfg.sweep_topology.size(); ++i) {
            if (i) out << ",";
            out << to_string(cfg.sweep_topology[i]);
        }
        out << "\n";
    }
    if (!cfg.sweep_snr_db.empty()) {
        out << "sweep_snr_db = ";
        for (std::size_t i = 0; i < cfg.sweep_snr_db.size(); ++i) {
            if (i) out << ",";
            out << cfg.sweep_snr_db[i].label();
        }
        out << "\n";
    }
    if (!cfg.sweep_method.empty()) {
        out << "sweep_method = ";
        for (std::size_t i = 0; i < cfg.sweep_method.size(); ++i) {
            if (i) out << ",";
            out << to_string(cfg.sweep_method[i]);
        }
        out << "\n";
    }
    if (!cfg.sweep_lr.empty()) {
        out << "sweep_lr = " << join_doubles(cfg.sweep_lr) << "\n";
    }
    if (!cfg.sweep_seed.empty()) {
        out << "sweep_seed = " << join_u64(cfg.sweep_seed) << "\n";
    }
    return out.str();
}

BoundInputs parse_bound_inputs_text(const std::string& text, const std::string& origin) {
    Reader r(text, origin);
    BoundInputs in;
    BoundConstants& c = in.constants;
    int devices = 1;
    int samples = 1;
    int rounds = 0;
    long long dim = 0;
    std::vector<double> xi;
    std::vector<double> dvals;
    std::vector<double> eta;
    std::vector<double> mi;

    r.get_double("R", c.R);
    r.get_double("L", c.L);
    r.get_double_list("xi", xi);
    r.get_double_list("D", dvals);
    r.get_double("sigma_sq", c.sigma_sq);
    r.get_double("lambda", c.lambda);
    {
        int d_int = 0;
        r.get_int("d", d_int);
        dim = d_int;
    }
    r.get_int("devices", devices);
    r.get_int("samples_per_device", samples);
    r.get_int("rounds", rounds);
    r.get_double_list("eta", eta);
    r.get_double_list("mi", mi);
    r.finish();

    if (devices < 1) r.fail_key("devices", "must be >= 1");
    if (samples < 1) r.fail_key("samples_per_device", "must be >= 1");
    if (rounds < 0) r.fail_key("rounds", "must be >= 0");
    if (dim < 0) r.fail_key("d", "must be >= 0");

    c.n_devices = devices;
    c.samples_per_device = samples;
    c.rounds = rounds;
    c.d = static_cast<std::size_t>(dim);
    in.sigma_given = c.sigma_sq > 0.0;

    auto broadcast = [&](std::vector<double>& v, int count, const char* key) {
        if (v.empty()) {
            v.assign(count, 0.0);
        } else if (v.size() == 1) {
            v.assign(count, v.front());
        } else if (static_cast<int>(v.size()) != count) {
            r.fail_key(key, "expected 1 or " + std::to_string(count) + " entries");
        }
    };
    broadcast(xi, devices, "xi");
    broadcast(dvals, devices, "D");
    if (eta.empty() && rounds > 0) {
        r.fail_key("eta", "required when rounds > 0");
    }
    if (eta.size() == 1 && rounds != 1) {
        eta.assign(static_cast<std::size_t>(rounds), eta.front());
    }
    if (static_cast<int>(eta.size()) != rounds) {
        r.fail_key("eta", "expected 1 or " + std::to_string(rounds) + " entries");
    }
    c.xi = std::move(xi);
    c.D = std::move(dvals);
    c.eta = std::move(eta);
    if (!mi.empty()) {
        if (static_cast<int>(mi.size()) == devices) {
            in.mi = Vec(mi.begin(), mi.end());
        } else if (mi.size() == 1) {
            in.mi = Vec(static_cast<std::size_t>(devices), mi.front());
        } else {
            r.fail_key("mi", "expected 1 or " + std::to_string(devices) + " entries");
        }
    }
    try {
        c.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return in;
}

BoundInputs parse_bound_inputs(const std::string& path) {
    return parse_bound_inputs_text(read_file(path), path);
}

}  // namespace feelsim
