#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rosch/local_solver.hpp"
#include "rosch/problems.hpp"
#include "rosch/sampling.hpp"
#include "rosch/schwarz.hpp"
#include "rosch/training.hpp"

namespace rosch {

/// Flat "section.key = value" text. Blank lines and lines starting with '#'
/// are ignored; a key may appear once.
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text, const std::string& source = "<string>");
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

    /// Sorted "key = value" lines.
    std::string canonical() const;

private:
    std::string source_;
    std::map<std::string, std::string> values_;
};

enum class InitKind { Svd, Random };

std::string to_string(InitKind kind);

struct ExperimentConfig {
    ProblemSpec problem = ProblemSpec::semilinear(0.125);
    double dx = 1.0 / 64.0;

    int M1 = 4;
    int M2 = 4;
    double dx_o = 1.0 / 16.0;
    double dx_b = 1.0 / 16.0;

    int N = 2000;
    SampleLaw law;
    double test_fraction = 0.1;

    double delta1 = 1e-2;
    InitKind init = InitKind::Svd;
    bool buffered = true;
    std::uint64_t init_seed = 1;
    TrainConfig train;

    SchwarzConfig schwarz;
    std::vector<SchwarzMode> modes{SchwarzMode::Classical, SchwarzMode::Surrogate, SchwarzMode::Linear};
    std::vector<int> bcs{1, 2, 3};

    SolveOptions solver;

    std::vector<double> spectrum_epsilons{0.25, 0.125, 0.0625};
    std::vector<double> spectrum_dxs{1.0 / 32.0, 1.0 / 64.0};

    int threads = 1;
    std::filesystem::path workdir = "work";

    /// Builds from key-value text; throws ConfigError on unknown keys,
    /// malformed values, or violated invariants.
    static ExperimentConfig from(const KeyValueConfig& kv);
    static ExperimentConfig load(const std::filesystem::path& path);

    /// Every field as key-value pairs (the inverse of from()).
    KeyValueConfig to_key_values() const;
    /// FNV-1a hash of the canonical text, in hex.
    std::string hash() const;

    void validate() const;
};

} // namespace rosch
