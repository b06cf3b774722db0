#include "rosch/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include <Eigen/Core>

#include "rosch/errors.hpp"
#include "rosch/io.hpp"
#include "rosch/linear_btb.hpp"
#include "rosch/network.hpp"
#include "rosch/sampling.hpp"
#include "rosch/training.hpp"

#ifndef ROSCH_VERSION
#define ROSCH_VERSION "unknown"
#endif

namespace rosch {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string tag_number(double v) {
    std::ostringstream ss;
    ss << std::setprecision(10) << v;
    return ss.str();
}

void log(const std::string& stage, const std::string& msg) { std::cerr << "[" << stage << "] " << msg << '\n'; }

/// Runs f(k) for k < n on up to `threads` workers, rethrowing the first
/// failure in index order.
template <class F>
void for_each_index(std::size_t n, int threads, F&& f) {
    const auto t = static_cast<std::size_t>(std::max(1, threads));
    std::vector<std::exception_ptr> errors(n);
    auto run = [&](std::size_t w) {
        for (std::size_t k = w; k < n; k += t) {
            try {
                f(k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    if (t == 1 || n <= 1) {
        run(0);
        if (t > 1) {
            for (std::size_t w = 1; w < t; ++w) {
                run(w);
            }
        }
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(t, n); ++w) {
            pool.emplace_back(run, w);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

std::uint64_t patch_seed(std::uint64_t seed, const Decomposition& decomp, PatchIndex m) {
    return seed * 0x9e3779b97f4a7c15ULL + decomp.id(m) + 1;
}

void check_dataset(const TrainingSet& set, const ExperimentConfig& config, const Decomposition& decomp,
                   PatchIndex m, const fs::path& path) {
    const double buffer = config.buffered ? config.dx_b : 0.0;
    const bool matches = set.patch == m && set.problem == config.problem.kind && set.law.R == config.law.R &&
                         set.law.D == config.law.D && set.law.seed == config.law.seed &&
                         std::abs(set.buffer - buffer) <= 1e-12 && set.size() + set.skipped == config.N &&
                         static_cast<std::size_t>(set.input_dim()) == decomp.patch_grid(m).trace_length() &&
                         static_cast<std::size_t>(set.output_dim()) == decomp.output_size(m);
    if (!matches) {
        throw DependencyError("dataset '" + path.string() +
                              "' was generated with a different configuration; rerun gen-data");
    }
}

} // namespace

std::string version_string() {
    return std::string("rosch ") + ROSCH_VERSION + ", eigen " + std::to_string(EIGEN_WORLD_VERSION) + "." +
           std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION);
}

std::string WorkdirLayout::patch_name(PatchIndex m) {
    return "patch_" + std::to_string(m.m1) + "_" + std::to_string(m.m2);
}

fs::path WorkdirLayout::dataset(bool buffered, PatchIndex m) const {
    return root / "data" / data_tag(buffered) / (patch_name(m) + ".dataset");
}

fs::path WorkdirLayout::model(InitKind init, bool buffered, PatchIndex m) const {
    return root / "models" / model_tag(init, buffered) / (patch_name(m) + ".model");
}

fs::path WorkdirLayout::loss_curve(InitKind init, bool buffered, PatchIndex m) const {
    return root / "curves" / model_tag(init, buffered) / (patch_name(m) + "_loss.csv");
}

fs::path WorkdirLayout::manifest(const std::string& stage) const { return root / "manifests" / (stage + ".manifest"); }

fs::path WorkdirLayout::residuals(const std::string& method, int bc) const {
    return root / "results" / "residuals" / (method + "_bc" + std::to_string(bc) + ".csv");
}

fs::path WorkdirLayout::solution(const std::string& method, int bc) const {
    return root / "results" / "fields" / (method + "_bc" + std::to_string(bc) + ".field");
}

fs::path WorkdirLayout::reference(int bc) const {
    return root / "results" / "fields" / ("reference_bc" + std::to_string(bc) + ".field");
}

fs::path WorkdirLayout::spectrum(double epsilon, double dx) const {
    const std::string eps = epsilon > 0.0 ? "eps" + tag_number(epsilon) + "_" : "";
    return root / "spectrum" / ("sigma_" + eps + "dx" + tag_number(dx) + ".csv");
}

void RunManifest::add_file(const fs::path& root, const fs::path& file) {
    files[fs::relative(file, root).generic_string()] = fs::file_size(file);
}

void RunManifest::write(const fs::path& path) const {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write manifest '" + path.string() + "'");
    }
    out << "stage " << stage << '\n' << "config_hash " << config_hash << '\n' << "version " << version << '\n';
    for (const auto& [k, v] : notes) {
        out << "note " << k << ' ' << v << '\n';
    }
    for (const auto& [k, v] : seconds) {
        out << "seconds " << k << ' ' << format_double(v) << '\n';
    }
    for (const auto& [f, n] : files) {
        out << "file " << f << ' ' << n << '\n';
    }
}

RunManifest RunManifest::read(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DependencyError("missing manifest '" + path.string() + "'");
    }
    RunManifest m;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "stage") {
            ss >> m.stage;
        } else if (tag == "config_hash") {
            ss >> m.config_hash;
        } else if (tag == "version") {
            std::getline(ss >> std::ws, m.version);
        } else if (tag == "note") {
            std::string k;
            ss >> k;
            std::getline(ss >> std::ws, m.notes[k]);
        } else if (tag == "seconds") {
            std::string k;
            double v = 0.0;
            ss >> k >> v;
            m.seconds[k] = v;
        } else if (tag == "file") {
            std::string f;
            std::uintmax_t n = 0;
            ss >> f >> n;
            m.files[f] = n;
        } else if (!tag.empty()) {
            throw DependencyError("malformed manifest line '" + line + "' in '" + path.string() + "'");
        }
    }
    return m;
}

void RunManifest::verify(const fs::path& root) const {
    for (const auto& [f, n] : files) {
        const fs::path p = root / f;
        std::error_code ec;
        const auto size = fs::file_size(p, ec);
        if (ec) {
            throw DependencyError("file '" + p.string() + "' listed by the " + stage + " manifest is missing");
        }
        if (size != n) {
            throw DependencyError("file '" + p.string() + "' changed since the " + stage + " stage wrote it");
        }
    }
}

WorkdirLock::WorkdirLock(const fs::path& workdir) : path_(workdir / ".rosch.lock") {
    std::error_code ec;
    fs::create_directories(workdir, ec);
    if (ec) {
        throw IoError("cannot create workdir '" + workdir.string() + "': " + ec.message());
    }
    // "x" makes the open fail when the file exists.
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr) {
        throw IoError("workdir '" + workdir.string() + "' is locked by another run (remove " + path_.string() +
                      " if no run is active)");
    }
    std::fputs("locked\n", f);
    std::fclose(f);
}

WorkdirLock::~WorkdirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

Decomposition make_decomposition(const ExperimentConfig& config) {
    const GridSpec global = GridSpec::build({0.0, 0.0}, {1.0, 1.0}, config.dx);
    return Decomposition::build(config.M1, config.M2, config.dx_o, config.dx_b, global);
}

std::pair<TrainingSet, TrainingSet> training_split(const ExperimentConfig& config, const Decomposition& decomp,
                                                   PatchIndex m, const TrainingSet& set) {
    Rng rng(patch_seed(config.train.seed, decomp, m));
    return split_dataset(set, config.test_fraction, rng);
}

LossSpec training_loss(const ExperimentConfig& config, const Decomposition& decomp, PatchIndex m) {
    return {config.train.mu, config.dx, output_segments(decomp, m)};
}

RunManifest cmd_gen_data(const ExperimentConfig& config) {
    config.validate();
    WorkdirLock lock(config.workdir);
    const WorkdirLayout layout{config.workdir};
    const Decomposition decomp = make_decomposition(config);
    const auto& patches = decomp.interior();
    if (patches.empty()) {
        throw ConfigError("the decomposition has no interior patches");
    }
    const std::string stage = "gen-data_" + WorkdirLayout::data_tag(config.buffered);
    RunManifest manifest{stage, config.hash(), version_string(), {}, {}, {}};
    manifest.notes["patches"] = std::to_string(patches.size());
    const auto t0 = Clock::now();
    for (PatchIndex m : patches) {
        const auto tp = Clock::now();
        GenOptions gen;
        gen.buffer = config.buffered ? config.dx_b : 0.0;
        gen.threads = config.threads;
        SampleLaw law = config.law;
        const TrainingSet set = gen_dataset(config.problem, decomp, m, config.N, law, config.solver, gen);
        const fs::path path = layout.dataset(config.buffered, m);
        write_dataset(path, set);
        manifest.add_file(config.workdir, path);
        manifest.seconds[WorkdirLayout::patch_name(m)] = seconds_since(tp);
        log(stage, WorkdirLayout::patch_name(m) + ": " + std::to_string(set.size()) + " samples (" +
                       std::to_string(set.skipped) + " skipped) in " + tag_number(seconds_since(tp)) + " s");
    }
    manifest.seconds["total"] = seconds_since(t0);
    manifest.write(layout.manifest(stage));
    return manifest;
}

RunManifest cmd_train(const ExperimentConfig& config) {
    config.validate();
    WorkdirLock lock(config.workdir);
    const WorkdirLayout layout{config.workdir};
    const Decomposition decomp = make_decomposition(config);
    const auto& patches = decomp.interior();
    const std::string data_stage = "gen-data_" + WorkdirLayout::data_tag(config.buffered);
    RunManifest::read(layout.manifest(data_stage)).verify(config.workdir);

    const std::string tag = WorkdirLayout::model_tag(config.init, config.buffered);
    const std::string stage = "train_" + tag;
    RunManifest manifest{stage, config.hash(), version_string(), {}, {}, {}};
    const auto t0 = Clock::now();
    std::vector<TrainResult> results(patches.size());
    std::vector<double> secs(patches.size());
    std::vector<int> ranks(patches.size());
    for_each_index(patches.size(), config.threads, [&](std::size_t k) {
        const PatchIndex m = patches[k];
        const auto tp = Clock::now();
        const fs::path dpath = layout.dataset(config.buffered, m);
        if (!fs::exists(dpath)) {
            throw DependencyError("missing dataset '" + dpath.string() + "'; run gen-data first");
        }
        const TrainingSet set = read_dataset(dpath);
        check_dataset(set, config, decomp, m, dpath);
        const auto [train_set, test_set] = training_split(config, decomp, m, set);

        const TruncatedSvd svd = svd_truncate(q_linear_matrix(config.problem, decomp, m).Q, config.delta1);
        TwoLayerNet net = config.init == InitKind::Svd
                              ? init_from_svd(svd.U, svd.S, svd.V)
                              : init_random(set.input_dim(), 2 * svd.rank(), set.output_dim(),
                                            patch_seed(config.init_seed, decomp, m));
        net.patch = m;
        net.normalize = config.problem.kind == ProblemKind::PLaplace;
        net.dx = config.dx;

        const LossSpec spec = training_loss(config, decomp, m);
        TrainConfig tc = config.train;
        tc.seed = patch_seed(config.train.seed ^ 0x5bd1e995ULL, decomp, m);
        results[k] = train(std::move(net), train_set, test_set, spec, tc);
        ranks[k] = svd.rank();
        secs[k] = seconds_since(tp);
    });
    for (std::size_t k = 0; k < patches.size(); ++k) {
        const PatchIndex m = patches[k];
        const std::string name = WorkdirLayout::patch_name(m);
        write_model(layout.model(config.init, config.buffered, m), results[k].net);
        write_loss_curve(layout.loss_curve(config.init, config.buffered, m), results[k].curve);
        manifest.add_file(config.workdir, layout.model(config.init, config.buffered, m));
        manifest.add_file(config.workdir, layout.loss_curve(config.init, config.buffered, m));
        const LossRecord& last = results[k].curve.back();
        manifest.notes[name + ".rank"] = std::to_string(ranks[k]);
        manifest.notes[name + ".final_train_loss"] = format_double(last.train_loss);
        manifest.notes[name + ".final_test_loss"] = format_double(last.test_loss);
        manifest.seconds[name] = secs[k];
        log(stage, name + ": rank " + std::to_string(ranks[k]) + ", train " + format_double(last.train_loss) +
                       ", test " + format_double(last.test_loss) + " after " + std::to_string(last.epoch) +
                       " epochs (" + tag_number(secs[k]) + " s)");
    }
    manifest.seconds["total"] = seconds_since(t0);
    manifest.write(layout.manifest(stage));
    return manifest;
}

SurrogateSet load_surrogates(const ExperimentConfig& config, const Decomposition& decomp) {
    const WorkdirLayout layout{config.workdir};
    const std::string stage = "train_" + WorkdirLayout::model_tag(config.init, config.buffered);
    RunManifest::read(layout.manifest(stage)).verify(config.workdir);
    SurrogateSet out;
    for (PatchIndex m : decomp.interior()) {
        const fs::path path = layout.model(config.init, config.buffered, m);
        if (!fs::exists(path)) {
            throw DependencyError("missing model '" + path.string() + "'; run train first");
        }
        TwoLayerNet net = read_model(path);
        if (!(net.patch == m)) {
            throw DependencyError("model '" + path.string() + "' belongs to another patch");
        }
        out.emplace(m, surrogate_from_net(std::move(net)));
    }
    return out;
}

std::string method_label(SchwarzMode mode, const ExperimentConfig& config) {
    if (mode != SchwarzMode::Surrogate) {
        return to_string(mode);
    }
    std::string s = config.init == InitKind::Svd ? "svd-nn" : "rand-nn";
    return config.buffered ? s : s + "-nobuffer";
}

namespace {

void merge_error_rows(const fs::path& path, const std::vector<std::vector<std::string>>& rows) {
    CsvTable table{{"problem", "method", "bc", "L2", "H1", "Linf", "iters", "seconds", "interior_seconds_per_iter"},
                   {}};
    if (fs::exists(path)) {
        const CsvTable old = read_csv(path);
        if (old.columns == table.columns) {
            table.rows = old.rows;
        }
    }
    for (const auto& r : rows) {
        const auto same = [&](const std::vector<std::string>& o) { return o[0] == r[0] && o[1] == r[1] && o[2] == r[2]; };
        table.rows.erase(std::remove_if(table.rows.begin(), table.rows.end(), same), table.rows.end());
        table.rows.push_back(r);
    }
    std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
        return std::tie(a[0], a[2], a[1]) < std::tie(b[0], b[2], b[1]);
    });
    write_csv(path, table);
}

} // namespace

RunManifest cmd_solve(const ExperimentConfig& config) {
    config.validate();
    WorkdirLock lock(config.workdir);
    const WorkdirLayout layout{config.workdir};
    const Decomposition decomp = make_decomposition(config);
    RunManifest manifest{"solve", config.hash(), version_string(), {}, {}, {}};

    SurrogateSet nets;
    SurrogateSet linear;
    SurrogateSet oracle;
    for (SchwarzMode mode : config.modes) {
        if (mode == SchwarzMode::Surrogate && nets.empty()) {
            nets = load_surrogates(config, decomp);
        } else if (mode == SchwarzMode::Linear && linear.empty()) {
            for (PatchIndex m : decomp.interior()) {
                linear.emplace(m, surrogate_from_matrix(q_linear_matrix(config.problem, decomp, m).Q));
            }
        } else if (mode == SchwarzMode::Oracle && oracle.empty()) {
            oracle = oracle_surrogates(config.problem, decomp, config.solver);
        }
    }

    SchwarzConfig sc = config.schwarz;
    sc.threads = config.threads;
    std::vector<std::vector<std::string>> rows;
    const auto t0 = Clock::now();
    for (int bci : config.bcs) {
        const BoundaryCondition bc = bc_catalog(config.problem.kind, bci);
        const auto tr = Clock::now();
        const Field2D reference = monodomain_solve(config.problem, decomp.global(), bc, config.solver);
        manifest.seconds["reference_bc" + std::to_string(bci)] = seconds_since(tr);
        write_field(layout.reference(bci), reference);
        manifest.add_file(config.workdir, layout.reference(bci));
        for (SchwarzMode mode : config.modes) {
            const std::string method = method_label(mode, config);
            SchwarzResult r;
            switch (mode) {
            case SchwarzMode::Classical: r = run_classical(config.problem, decomp, bc, sc, config.solver); break;
            case SchwarzMode::Surrogate: r = run_nn(config.problem, decomp, nets, bc, sc, config.solver, mode); break;
            case SchwarzMode::Linear: r = run_nn(config.problem, decomp, linear, bc, sc, config.solver, mode); break;
            case SchwarzMode::Oracle: r = run_nn(config.problem, decomp, oracle, bc, sc, config.solver, mode); break;
            }
            const RelativeErrors e = compute_errors(r.global, reference);
            write_residuals(layout.residuals(method, bci), r.residual_history);
            write_field(layout.solution(method, bci), r.global);
            manifest.add_file(config.workdir, layout.residuals(method, bci));
            manifest.add_file(config.workdir, layout.solution(method, bci));
            manifest.seconds[method + "_bc" + std::to_string(bci)] = r.timing.total;
            rows.push_back({std::string(to_string(config.problem.kind)), method, std::to_string(bci), format_double(e.l2),
                            format_double(e.h1), format_double(e.linf), std::to_string(r.iterations),
                            format_double(r.timing.total), format_double(r.mean_interior_update())});
            log("solve", "bc " + std::to_string(bci) + " " + method + ": " + std::to_string(r.iterations) +
                             " iterations, rel. L2 " + format_double(e.l2) + ", H1 " + format_double(e.h1) +
                             ", Linf " + format_double(e.linf));
        }
    }
    merge_error_rows(layout.errors_csv(), rows);
    manifest.add_file(config.workdir, layout.errors_csv());
    manifest.seconds["total"] = seconds_since(t0);
    manifest.write(layout.manifest("solve"));
    return manifest;
}

RunManifest cmd_spectrum(const ExperimentConfig& config) {
    config.validate();
    WorkdirLock lock(config.workdir);
    const WorkdirLayout layout{config.workdir};
    RunManifest manifest{"spectrum", config.hash(), version_string(), {}, {}, {}};
    const PatchIndex m{2, 2};
    const bool semilinear = config.problem.kind == ProblemKind::Semilinear;
    const std::vector<double> epsilons = semilinear ? config.spectrum_epsilons : std::vector<double>{0.0};
    for (double eps : epsilons) {
        const ProblemSpec problem = semilinear ? ProblemSpec::semilinear(eps) : config.problem;
        for (double dx : config.spectrum_dxs) {
            const GridSpec global = GridSpec::build({0.0, 0.0}, {1.0, 1.0}, dx);
            const Decomposition decomp = Decomposition::build(config.M1, config.M2, config.dx_o, config.dx_b, global);
            if (!decomp.is_interior(m)) {
                throw ConfigError("spectrum needs patch (2,2) to be interior (M1, M2 >= 3)");
            }
            const auto sigma = svd_spectrum(problem, decomp, m);
            const fs::path path = layout.spectrum(eps, dx);
            write_spectrum(path, sigma);
            manifest.add_file(config.workdir, path);
            const auto drop = std::find_if(sigma.begin(), sigma.end(), [&](double s) { return s < config.delta1; });
            log("spectrum", path.filename().string() + ": " + std::to_string(sigma.size()) +
                                " values, first below delta1 at index " +
                                std::to_string(drop - sigma.begin() + 1));
        }
    }
    manifest.write(layout.manifest("spectrum"));
    return manifest;
}

std::size_t cmd_report(const fs::path& workdir) {
    CsvTable merged{{"problem", "method", "bc", "L2", "H1", "Linf", "iters", "seconds", "interior_seconds_per_iter"},
                    {}};
    if (fs::is_directory(workdir)) {
        std::vector<fs::path> sources;
        for (const auto& entry : fs::recursive_directory_iterator(workdir)) {
            if (entry.is_regular_file() && entry.path().filename() == "errors.csv" &&
                entry.path().parent_path().filename() == "results") {
                sources.push_back(entry.path());
            }
        }
        std::sort(sources.begin(), sources.end());
        for (const auto& src : sources) {
            const CsvTable t = read_csv(src);
            for (const auto& r : t.rows) {
                std::vector<std::string> row;
                for (const auto& c : merged.columns) {
                    row.push_back(r[t.column(c)]);
                }
                merged.rows.push_back(std::move(row));
            }
        }
    }
    if (merged.rows.empty()) {
        std::cerr << "[report] warning: no result rows found under '" << workdir.string() << "'; tables are empty\n";
        return 0;
    }
    std::stable_sort(merged.rows.begin(), merged.rows.end(), [](const auto& a, const auto& b) {
        return std::tie(a[0], a[2], a[1]) < std::tie(b[0], b[2], b[1]);
    });
    write_csv(workdir / "report" / "tables.csv", merged);

    std::ofstream txt(workdir / "report" / "tables.txt", std::ios::trunc);
    if (!txt) {
        throw IoError("cannot write report text");
    }
    std::string group;
    for (const auto& r : merged.rows) {
        const std::string g = r[0] + ", boundary condition " + r[2];
        if (g != group) {
            group = g;
            txt << '\n' << g << '\n';
            txt << std::left << std::setw(20) << "method" << std::right << std::setw(12) << "L2" << std::setw(12)
                << "H1" << std::setw(12) << "Linf" << std::setw(8) << "iters" << std::setw(12) << "seconds"
                << std::setw(16) << "s/iter (int.)" << '\n';
        }
        auto num = [](const std::string& s) {
            std::ostringstream ss;
            ss << std::setprecision(4) << std::stod(s);
            return ss.str();
        };
        txt << std::left << std::setw(20) << r[1] << std::right << std::setw(12) << num(r[3]) << std::setw(12)
            << num(r[4]) << std::setw(12) << num(r[5]) << std::setw(8) << r[6] << std::setw(12) << num(r[7])
            << std::setw(16) << num(r[8]) << '\n';
    }
    return merged.rows.size();
}

} // namespace rosch
