#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "rosch/errors.hpp"
#include "rosch/experiment.hpp"
#include "rosch/io.hpp"
#include "rosch/linear_btb.hpp"
#include "rosch/network.hpp"

using namespace rosch;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "rosch_experiment_tests" / name;
    fs::remove_all(dir);
    return dir;
}

ExperimentConfig tiny(const fs::path& workdir, const std::string& extra = "") {
    ExperimentConfig c = ExperimentConfig::from(KeyValueConfig::parse(
        "grid.dx = 0.03125\n"
        "sampling.N = 24\n"
        "train.epochs = 4\n"
        "train.batch_fraction = 0.25\n"
        "schwarz.bcs = 1\n"
        "schwarz.modes = classical, surrogate, linear, oracle\n"
        "spectrum.dxs = 0.03125\n" +
        extra));
    c.workdir = workdir;
    return c;
}

std::map<std::string, std::uint64_t> hashes(const fs::path& dir) {
    std::map<std::string, std::uint64_t> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() != ".manifest") {
            out[fs::relative(e.path(), dir).generic_string()] = file_hash(e.path());
        }
    }
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ROSCH_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST(Pipeline, DatasetsPerInteriorPatchAndDeterministic) {
    const fs::path a = fresh_dir("gen_a");
    const fs::path b = fresh_dir("gen_b");
    const RunManifest m = cmd_gen_data(tiny(a));
    EXPECT_EQ(m.files.size(), 4u);
    ExperimentConfig threaded = tiny(b);
    threaded.threads = 3;
    cmd_gen_data(threaded);
    EXPECT_EQ(hashes(a), hashes(b));
}

TEST(Pipeline, EightByEightGivesThirtySixDatasets) {
    const fs::path dir = fresh_dir("gen_8x8");
    ExperimentConfig c = tiny(dir, "problem.kind = plaplace\ndecomp.M1 = 8\ndecomp.M2 = 8\n");
    c.dx = 1.0 / 64;
    c.N = 2;
    EXPECT_EQ(cmd_gen_data(c).files.size(), 36u);
}

TEST(Pipeline, TrainNeedsData) {
    EXPECT_THROW(cmd_train(tiny(fresh_dir("no_data"))), DependencyError);
}

TEST(Pipeline, TrainRejectsDataFromAnotherConfig) {
    const fs::path dir = fresh_dir("stale");
    cmd_gen_data(tiny(dir));
    ExperimentConfig other = tiny(dir);
    other.law.seed = 2;
    EXPECT_THROW(cmd_train(other), DependencyError);
}

TEST(Pipeline, ZeroEpochModelIsTheInitialization) {
    const fs::path dir = fresh_dir("epochs0");
    ExperimentConfig c = tiny(dir);
    c.train.epochs = 0;
    cmd_gen_data(c);
    cmd_train(c);
    const Decomposition d = make_decomposition(c);
    const TruncatedSvd s = svd_truncate(q_linear_matrix(c.problem, d, {2, 2}).Q, c.delta1);
    const TwoLayerNet init = init_from_svd(s.U, s.S, s.V);
    const TwoLayerNet stored = read_model(WorkdirLayout{dir}.model(InitKind::Svd, true, {2, 2}));
    EXPECT_EQ(stored.hidden_dim(), 2 * s.rank());
    EXPECT_EQ(stored.W1, init.W1);
    EXPECT_EQ(stored.W2, init.W2);
}

TEST(Pipeline, RandomInitUnbufferedVariant) {
    const fs::path dir = fresh_dir("random");
    ExperimentConfig c = tiny(dir);
    c.init = InitKind::Random;
    c.buffered = false;
    cmd_gen_data(c);
    const RunManifest m = cmd_train(c);
    EXPECT_TRUE(fs::exists(WorkdirLayout{dir}.model(InitKind::Random, false, {3, 3})));
    EXPECT_TRUE(m.notes.count("patch_3_3.final_test_loss"));
    EXPECT_EQ(read_dataset(WorkdirLayout{dir}.dataset(false, {2, 2})).buffer, 0.0);
}

TEST(Pipeline, SolveWritesRowsPerModeAndReportSorts) {
    const fs::path dir = fresh_dir("solve");
    ExperimentConfig c = tiny(dir);
    cmd_gen_data(c);
    cmd_train(c);
    const RunManifest m = cmd_solve(c);
    for (const auto& [file, size] : m.files) {
        EXPECT_TRUE(fs::exists(dir / file)) << file;
        EXPECT_EQ(fs::file_size(dir / file), size);
    }
    const CsvTable t = read_csv(WorkdirLayout{dir}.errors_csv());
    ASSERT_EQ(t.rows.size(), 4u);
    std::map<std::string, double> h1;
    for (const auto& r : t.rows) {
        h1[r[t.column("method")]] = std::stod(r[t.column("H1")]);
    }
    EXPECT_NEAR(h1.at("oracle"), h1.at("classical"), 1e-12);
    EXPECT_GT(h1.at("linear"), h1.at("classical"));

    // Rerunning one mode replaces its row instead of appending.
    c.modes = {SchwarzMode::Classical};
    cmd_solve(c);
    EXPECT_EQ(read_csv(WorkdirLayout{dir}.errors_csv()).rows.size(), 4u);

    EXPECT_EQ(cmd_report(dir), 4u);
    const CsvTable rep = read_csv(dir / "report" / "tables.csv");
    for (std::size_t k = 1; k < rep.rows.size(); ++k) {
        const auto& a = rep.rows[k - 1];
        const auto& b = rep.rows[k];
        EXPECT_LE(std::tie(a[0], a[2], a[1]), std::tie(b[0], b[2], b[1]));
    }
    EXPECT_TRUE(fs::exists(dir / "report" / "tables.txt"));
}

TEST(Pipeline, SolveNeedsModels) {
    const fs::path dir = fresh_dir("no_models");
    ExperimentConfig c = tiny(dir);
    c.modes = {SchwarzMode::Surrogate};
    EXPECT_THROW(cmd_solve(c), DependencyError);
}

TEST(Pipeline, SpectrumSweep) {
    const fs::path dir = fresh_dir("spectrum");
    const RunManifest m = cmd_spectrum(tiny(dir));
    EXPECT_EQ(m.files.size(), 3u);
    for (const auto& [file, size] : m.files) {
        const CsvTable t = read_csv(dir / file);
        EXPECT_EQ(t.columns, (std::vector<std::string>{"index", "sigma_rel"}));
        EXPECT_EQ(std::stod(t.rows.front()[1]), 1.0);
        for (std::size_t k = 1; k < t.rows.size(); ++k) {
            EXPECT_LE(std::stod(t.rows[k][1]), std::stod(t.rows[k - 1][1]));
        }
    }
}

TEST(Pipeline, EmptyReport) { EXPECT_EQ(cmd_report(fresh_dir("empty")), 0u); }

TEST(Workdir, LockIsExclusive) {
    const fs::path dir = fresh_dir("lock");
    {
        WorkdirLock first(dir);
        EXPECT_THROW(WorkdirLock second(dir), IoError);
    }
    EXPECT_NO_THROW(WorkdirLock again(dir));
}

TEST(Workdir, ManifestDetectsChangedFiles) {
    const fs::path dir = fresh_dir("manifest");
    cmd_gen_data(tiny(dir));
    const RunManifest m = RunManifest::read(WorkdirLayout{dir}.manifest("gen-data_buffered"));
    EXPECT_NO_THROW(m.verify(dir));
    fs::resize_file(WorkdirLayout{dir}.dataset(true, {2, 2}), 10);
    EXPECT_THROW(m.verify(dir), DependencyError);
}

TEST(Cli, ExitCodes) {
    const fs::path dir = fresh_dir("cli");
    fs::create_directories(dir);
    const fs::path conf = dir / "bad.conf";
    std::ofstream(conf) << "grid.dxx = 1\n";
    EXPECT_EQ(run_cli("--config " + conf.string() + " gen-data"), 2);
    EXPECT_EQ(run_cli("--workdir " + (dir / "w").string() + " train"), 3);
    EXPECT_EQ(run_cli("--workdir " + (dir / "w").string() + " report"), 0);
    EXPECT_EQ(run_cli("--mode bogus solve"), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);
    const fs::path ok = dir / "ok.conf";
    std::ofstream(ok) << "grid.dx = 0.03125\nspectrum.dxs = 0.03125\nspectrum.epsilons = 0.125\n";
    EXPECT_EQ(run_cli("--config " + ok.string() + " --workdir " + (dir / "s").string() + " spectrum"), 0);
    EXPECT_TRUE(fs::exists(WorkdirLayout{dir / "s"}.spectrum(0.125, 0.03125)));
}
