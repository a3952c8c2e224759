#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "softcca/cca.hpp"
#include "softcca/data.hpp"
#include "softcca/fae.hpp"

namespace softcca {

// INI-style experiment configuration: [section] headers, key = value lines,
// '#'/';' comments. Every key must be consumed by the command loading it;
// unknown sections or keys are hard errors, with line numbers.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text, const std::string& name = "<config>");

    const std::string& text() const { return text_; }

    bool has(const std::string& section, const std::string& key) const;

    // Typed getters; each marks the key as consumed.
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback);
    std::string require_string(const std::string& section, const std::string& key);
    double get_double(const std::string& section, const std::string& key, double fallback);
    std::int64_t get_int(const std::string& section, const std::string& key,
                         std::int64_t fallback);
    bool get_bool(const std::string& section, const std::string& key, bool fallback);
    std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback);
    std::vector<std::size_t> get_size_list(const std::string& section, const std::string& key,
                                           const std::vector<std::size_t>& fallback);

    // Throws ConfigError naming the first unconsumed key (typo guard).
    void finish() const;

private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool used = false;
    };
    std::string name_;
    std::string text_;
    std::map<std::string, std::map<std::string, Entry>> sections_;

    const Entry* find(const std::string& section, const std::string& key) const;
};

// Where the training data comes from.
struct DataSpec {
    std::string kind; // "mnist_halves" | "mnist" | "synth_pair"
    std::string images, labels, test_images, test_labels;
    std::size_t subset = 0;        // 0 = use everything
    std::uint64_t subset_seed = 7;
    // synth_pair parameters
    SynthSpec synth;
    std::size_t heldout = 0; // held-out rows generated alongside synth data
};

struct CcaExperiment {
    SoftCcaConfig train;
    DataSpec data;
    std::string out_dir;
    std::uint64_t checkpoint_every = 0; // steps; 0 = only at the end
    bool eval_heldout = true;
};

struct FaeExperiment {
    FaeConfig train;
    DataSpec data;
    std::string out_dir;
    std::uint64_t checkpoint_every = 0;
};

CcaExperiment load_cca_experiment(ConfigFile& cfg);
FaeExperiment load_fae_experiment(ConfigFile& cfg);

} // namespace softcca
