#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rosch/config.hpp"
#include "rosch/decomposition.hpp"
#include "rosch/schwarz.hpp"
#include "rosch/training.hpp"

namespace rosch {

namespace fs = std::filesystem;

/// File locations inside a workdir.
struct WorkdirLayout {
    fs::path root;

    static std::string data_tag(bool buffered) { return buffered ? "buffered" : "unbuffered"; }
    static std::string model_tag(InitKind init, bool buffered) { return to_string(init) + "_" + data_tag(buffered); }
    static std::string patch_name(PatchIndex m);

    fs::path dataset(bool buffered, PatchIndex m) const;
    fs::path model(InitKind init, bool buffered, PatchIndex m) const;
    fs::path loss_curve(InitKind init, bool buffered, PatchIndex m) const;
    fs::path manifest(const std::string& stage) const;
    fs::path errors_csv() const { return root / "results" / "errors.csv"; }
    fs::path residuals(const std::string& method, int bc) const;
    fs::path solution(const std::string& method, int bc) const;
    fs::path reference(int bc) const;
    fs::path spectrum(double epsilon, double dx) const;
};

/// Record of one stage: what it wrote, with sizes, under which config.
struct RunManifest {
    std::string stage;
    std::string config_hash;
    std::string version;
    /// Paths relative to the workdir, with byte lengths.
    std::map<std::string, std::uintmax_t> files;
    std::map<std::string, double> seconds;
    std::map<std::string, std::string> notes;

    void add_file(const fs::path& root, const fs::path& file);
    void write(const fs::path& path) const;
    static RunManifest read(const fs::path& path);
    /// Throws DependencyError when a listed file is missing or has changed size.
    void verify(const fs::path& root) const;
};

/// Exclusive ownership of a workdir for the lifetime of the object.
class WorkdirLock {
public:
    explicit WorkdirLock(const fs::path& workdir);
    ~WorkdirLock();
    WorkdirLock(const WorkdirLock&) = delete;
    WorkdirLock& operator=(const WorkdirLock&) = delete;

private:
    fs::path path_;
};

Decomposition make_decomposition(const ExperimentConfig& config);

/// The train/test split cmd_train uses for patch m.
std::pair<TrainingSet, TrainingSet> training_split(const ExperimentConfig& config, const Decomposition& decomp,
                                                   PatchIndex m, const TrainingSet& set);

/// The loss cmd_train minimizes for patch m.
LossSpec training_loss(const ExperimentConfig& config, const Decomposition& decomp, PatchIndex m);

/// Buffered or unbuffered datasets for every interior patch.
RunManifest cmd_gen_data(const ExperimentConfig& config);

/// One model and loss curve per interior patch for the configured init and
/// data variant. Throws DependencyError without matching datasets.
RunManifest cmd_train(const ExperimentConfig& config);

/// Loads the trained surrogates of the configured variant.
SurrogateSet load_surrogates(const ExperimentConfig& config, const Decomposition& decomp);

/// Method label of a mode under the configured variant ("classical",
/// "svd-nn", "rand-nn-nobuffer", ...).
std::string method_label(SchwarzMode mode, const ExperimentConfig& config);

/// Every configured (bc, mode) pair against the monodomain reference.
RunManifest cmd_solve(const ExperimentConfig& config);

/// Relative singular values of the linear map on patch (2, 2) over the
/// configured epsilon and dx sweeps.
RunManifest cmd_spectrum(const ExperimentConfig& config);

/// Merges every results/errors.csv under workdir into report/tables.csv and
/// report/tables.txt. Returns the number of rows.
std::size_t cmd_report(const fs::path& workdir);

/// Library version string.
std::string version_string();

} // namespace rosch
