#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rosch/grid.hpp"
#include "rosch/network.hpp"
#include "rosch/sampling.hpp"
#include "rosch/training.hpp"

namespace rosch {

namespace fs = std::filesystem;

/// Binary artifacts share one layout: text lines "key value" terminated by
/// a line "end_header", followed by raw little-endian float64 blocks.
struct Header {
    std::string kind;
    std::map<std::string, std::string> entries;

    const std::string& at(const std::string& key) const;
    double number(const std::string& key) const;
    long long integer(const std::string& key) const;
};

/// Dataset: inputs (N x d) then outputs (N x p), row-major by sample.
void write_dataset(const fs::path& path, const TrainingSet& set);
TrainingSet read_dataset(const fs::path& path);

/// Model: W1 (h x d), b1, W2 (p x h), b2, matrices row-major.
void write_model(const fs::path& path, const TwoLayerNet& net);
TwoLayerNet read_model(const fs::path& path);

/// Field: nodal values row-major by (j, i).
void write_field(const fs::path& path, const Field2D& field);
Field2D read_field(const fs::path& path);

/// Header of any artifact without loading its payload.
Header read_header(const fs::path& path);

/// Columns epoch, train_loss, test_loss, lr.
void write_loss_curve(const fs::path& path, const std::vector<LossRecord>& curve);
/// Columns iteration, res.
void write_residuals(const fs::path& path, const std::vector<double>& history);
/// Columns index, sigma_rel.
void write_spectrum(const fs::path& path, const std::vector<double>& sigma_rel);

/// Minimal CSV table: a header row and string cells (no quoting needed for
/// the values written here).
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
};

void write_csv(const fs::path& path, const CsvTable& table);
CsvTable read_csv(const fs::path& path);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t file_hash(const fs::path& path);

} // namespace rosch
