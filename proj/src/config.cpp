#include "softcca/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace softcca {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

} // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& name) {
    ConfigFile cfg;
    cfg.name_ = name;
    cfg.text_ = text;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(name + ":" + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(name + ":" + std::to_string(lineno) + ": empty section name");
            cfg.sections_[section]; // sections may be empty
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(name + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
        if (section.empty())
            throw ConfigError(name + ":" + std::to_string(lineno) + ": key outside any section");
        auto [it, inserted] = cfg.sections_[section].emplace(key, Entry{value, lineno, false});
        if (!inserted)
            throw ConfigError(name + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                              "' in [" + section + "]");
    }
    return cfg;
}

const ConfigFile::Entry* ConfigFile::find(const std::string& section, const std::string& key) const {
    auto sit = sections_.find(section);
    if (sit == sections_.end()) return nullptr;
    auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return nullptr;
    return &kit->second;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    e->used = true;
    return e->value;
}

std::string ConfigFile::require_string(const std::string& section, const std::string& key) {
    const Entry* e = find(section, key);
    if (!e) throw ConfigError(name_ + ": missing required key '" + key + "' in [" + section + "]");
    e->used = true;
    return e->value;
}

double ConfigFile::get_double(const std::string& section, const std::string& key, double fallback) {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    e->used = true;
    try {
        std::size_t pos = 0;
        const double v = std::stod(e->value, &pos);
        if (pos != e->value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(name_ + ":" + std::to_string(e->line) + ": '" + key +
                          "' is not a number: " + e->value);
    }
}

std::int64_t ConfigFile::get_int(const std::string& section, const std::string& key,
                                 std::int64_t fallback) {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    e->used = true;
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(e->value, &pos);
        if (pos != e->value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(name_ + ":" + std::to_string(e->line) + ": '" + key +
                          "' is not an integer: " + e->value);
    }
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key, bool fallback) {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    e->used = true;
    if (e->value == "true" || e->value == "1") return true;
    if (e->value == "false" || e->value == "0") return false;
    throw ConfigError(name_ + ":" + std::to_string(e->line) + ": '" + key +
                      "' must be true/false: " + e->value);
}

std::vector<double> ConfigFile::get_double_list(const std::string& section, const std::string& key,
                                                const std::vector<double>& fallback) {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    e->used = true;
    std::vector<double> out;
    std::stringstream ss(e->value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError(name_ + ":" + std::to_string(e->line) + ": bad list entry '" + item + "'");
        }
    }
    return out;
}

std::vector<std::size_t> ConfigFile::get_size_list(const std::string& section,
                                                   const std::string& key,
                                                   const std::vector<std::size_t>& fallback) {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    std::vector<double> vals = get_double_list(section, key, {});
    std::vector<std::size_t> out;
    for (double v : vals) {
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
            throw ConfigError(name_ + ":" + std::to_string(e->line) + ": '" + key +
                              "' entries must be nonnegative integers");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

void ConfigFile::finish() const {
    for (const auto& [section, keys] : sections_) {
        for (const auto& [key, entry] : keys) {
            if (!entry.used)
                throw ConfigError(name_ + ":" + std::to_string(entry.line) + ": unknown key '" +
                                  key + "' in [" + section + "]");
        }
    }
}

namespace {

DataSpec load_data_spec(ConfigFile& cfg) {
    DataSpec d;
    d.kind = cfg.require_string("data", "kind");
    if (d.kind == "mnist_halves" || d.kind == "mnist") {
        d.images = cfg.require_string("data", "images");
        d.labels = cfg.require_string("data", "labels");
        d.test_images = cfg.get_string("data", "test_images", "");
        d.test_labels = cfg.get_string("data", "test_labels", "");
        d.subset = static_cast<std::size_t>(cfg.get_int("data", "subset", 0));
        d.subset_seed = static_cast<std::uint64_t>(cfg.get_int("data", "subset_seed", 7));
    } else if (d.kind == "synth_pair") {
        d.synth.n = static_cast<std::size_t>(cfg.get_int("data", "n", 10000));
        d.synth.d1 = static_cast<std::size_t>(cfg.get_int("data", "d1", 20));
        d.synth.d2 = static_cast<std::size_t>(cfg.get_int("data", "d2", 20));
        d.synth.rho = cfg.get_double_list("data", "rho", {0.9, 0.7, 0.5});
        d.synth.k_shared = static_cast<std::size_t>(
            cfg.get_int("data", "k_shared", static_cast<std::int64_t>(d.synth.rho.size())));
        d.synth.seed = static_cast<std::uint64_t>(cfg.get_int("data", "data_seed", 1234));
        d.heldout = static_cast<std::size_t>(cfg.get_int("data", "heldout", 0));
    } else {
        throw ConfigError("data.kind must be mnist_halves, mnist or synth_pair, got '" + d.kind + "'");
    }
    return d;
}

void validate_common(double lr, double momentum, std::size_t batch, double alpha) {
    if (lr < 0) throw ConfigError("training.lr must be nonnegative");
    if (momentum < 0 || momentum >= 1) throw ConfigError("training.momentum must be in [0, 1)");
    if (batch < 2) throw ConfigError("training.batch_size must be at least 2");
    if (alpha < 0 || alpha >= 1) throw ConfigError("losses.alpha must be in [0, 1)");
}

} // namespace

CcaExperiment load_cca_experiment(ConfigFile& cfg) {
    CcaExperiment e;
    e.train.hidden = cfg.get_size_list("model", "hidden", {500, 300});
    e.train.embed_dim = static_cast<std::size_t>(cfg.get_int("model", "k", 50));
    e.train.lambda = cfg.get_double("losses", "lambda", 1.0);
    e.train.alpha = cfg.get_double("losses", "alpha", 0.9);
    e.train.sdl_reset_per_epoch = cfg.get_bool("losses", "reset_per_epoch", false);
    e.train.lr = cfg.get_double("training", "lr", 0.01);
    e.train.momentum = cfg.get_double("training", "momentum", 0.9);
    e.train.batch_size = static_cast<std::size_t>(cfg.get_int("training", "batch_size", 100));
    e.train.epochs = static_cast<std::size_t>(cfg.get_int("training", "epochs", 10));
    e.train.seed = static_cast<std::uint64_t>(cfg.get_int("training", "seed", 0));
    e.train.drop_last = cfg.get_bool("training", "drop_last", false);
    e.train.max_steps = static_cast<std::uint64_t>(cfg.get_int("training", "max_steps", 0));
    if (e.train.lambda < 0) throw ConfigError("losses.lambda must be nonnegative");
    validate_common(e.train.lr, e.train.momentum, e.train.batch_size, e.train.alpha);
    e.data = load_data_spec(cfg);
    e.out_dir = cfg.get_string("output", "dir", "out");
    e.checkpoint_every =
        static_cast<std::uint64_t>(cfg.get_int("output", "checkpoint_every", 0));
    e.eval_heldout = cfg.get_bool("output", "eval_heldout", true);
    cfg.finish();
    return e;
}

FaeExperiment load_fae_experiment(ConfigFile& cfg) {
    FaeExperiment e;
    e.train.class_dim = static_cast<std::size_t>(cfg.get_int("model", "p", 10));
    e.train.style_dim = static_cast<std::size_t>(cfg.get_int("model", "q", 10));
    e.train.enc_hidden = cfg.get_size_list("model", "enc_hidden", {1000, 1000});
    e.train.dec_hidden = cfg.get_size_list("model", "dec_hidden", {1000, 1000});
    e.train.lambda1 = cfg.get_double("losses", "lambda1", 1.0);
    e.train.lambda2 = cfg.get_double("losses", "lambda2", 1.0);
    e.train.alpha = cfg.get_double("losses", "alpha", 0.9);
    e.train.decorr = decorr_kind_from_string(cfg.get_string("losses", "variant", "sdl"));
    e.train.sdl_reset_per_epoch = cfg.get_bool("losses", "reset_per_epoch", false);
    e.train.lr = cfg.get_double("training", "lr", 0.05);
    e.train.momentum = cfg.get_double("training", "momentum", 0.9);
    e.train.batch_size = static_cast<std::size_t>(cfg.get_int("training", "batch_size", 100));
    e.train.epochs = static_cast<std::size_t>(cfg.get_int("training", "epochs", 10));
    e.train.seed = static_cast<std::uint64_t>(cfg.get_int("training", "seed", 0));
    e.train.drop_last = cfg.get_bool("training", "drop_last", false);
    e.train.max_steps = static_cast<std::uint64_t>(cfg.get_int("training", "max_steps", 0));
    if (e.train.lambda1 < 0 || e.train.lambda2 < 0)
        throw ConfigError("losses.lambda1/lambda2 must be nonnegative");
    validate_common(e.train.lr, e.train.momentum, e.train.batch_size, e.train.alpha);
    e.data = load_data_spec(cfg);
    if (e.data.kind == "mnist_halves")
        throw ConfigError("train-fae expects data.kind = mnist (whole images)");
    e.out_dir = cfg.get_string("output", "dir", "out");
    e.checkpoint_every =
        static_cast<std::uint64_t>(cfg.get_int("output", "checkpoint_every", 0));
    cfg.finish();
    return e;
}

} // namespace softcca
