#include "rosch/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rosch/errors.hpp"

namespace rosch {

namespace {

constexpr const char* kEndHeader = "end_header";

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    return in;
}

void write_header(std::ostream& out, const Header& h) {
    out << "rosch " << h.kind << '\n';
    for (const auto& [k, v] : h.entries) {
        out << k << ' ' << v << '\n';
    }
    out << kEndHeader << '\n';
}

Header parse_header(std::istream& in, const fs::path& path) {
    Header h;
    std::string line;
    if (!std::getline(in, line) || line.rfind("rosch ", 0) != 0) {
        throw IoError("'" + path.string() + "' is not a rosch artifact");
    }
    h.kind = line.substr(6);
    while (std::getline(in, line)) {
        if (line == kEndHeader) {
            return h;
        }
        const auto sp = line.find(' ');
        if (sp == std::string::npos) {
            throw IoError("malformed header line '" + line + "' in '" + path.string() + "'");
        }
        h.entries[line.substr(0, sp)] = line.substr(sp + 1);
    }
    throw IoError("'" + path.string() + "' has no end_header line");
}

void write_block(std::ostream& out, const double* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    } else {
        for (std::size_t k = 0; k < n; ++k) {
            auto bits = std::bit_cast<std::uint64_t>(data[k]);
            char buf[8];
            for (int b = 0; b < 8; ++b) {
                buf[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
            }
            out.write(buf, 8);
        }
    }
}

void read_block(std::istream& in, double* data, std::size_t n, const fs::path& path) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double)) {
        throw IoError("'" + path.string() + "' is truncated");
    }
    if constexpr (std::endian::native != std::endian::little) {
        for (std::size_t k = 0; k < n; ++k) {
            std::uint64_t bits = 0;
            std::memcpy(&bits, data + k, 8);
            std::uint64_t swapped = 0;
            for (int b = 0; b < 8; ++b) {
                swapped |= ((bits >> (8 * b)) & 0xff) << (8 * (7 - b));
            }
            data[k] = std::bit_cast<double>(swapped);
        }
    }
}

void write_columns_as_rows(std::ostream& out, const Eigen::MatrixXd& m) {
    // Column-major storage of m is exactly row-major storage of m^T.
    write_block(out, m.data(), static_cast<std::size_t>(m.size()));
}

void write_row_major(std::ostream& out, const Eigen::MatrixXd& m) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r = m;
    write_block(out, r.data(), static_cast<std::size_t>(r.size()));
}

Eigen::MatrixXd read_row_major(std::istream& in, Eigen::Index rows, Eigen::Index cols, const fs::path& path) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r(rows, cols);
    read_block(in, r.data(), static_cast<std::size_t>(r.size()), path);
    return r;
}

void expect_end(std::istream& in, const fs::path& path) {
    if (in.peek() != std::char_traits<char>::eof()) {
        throw IoError("'" + path.string() + "' has trailing bytes");
    }
}

void expect_kind(const Header& h, const std::string& kind, const fs::path& path) {
    if (h.kind != kind) {
        throw IoError("'" + path.string() + "' holds a " + h.kind + ", expected a " + kind);
    }
}

} // namespace

const std::string& Header::at(const std::string& key) const {
    const auto it = entries.find(key);
    if (it == entries.end()) {
        throw IoError("header of " + kind + " lacks '" + key + "'");
    }
    return it->second;
}

double Header::number(const std::string& key) const {
    const std::string& s = at(key);
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos == s.size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw IoError("header entry '" + key + "' is not a number: '" + s + "'");
}

long long Header::integer(const std::string& key) const {
    const std::string& s = at(key);
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw IoError("header entry '" + key + "' is not an integer: '" + s + "'");
    }
    return v;
}

std::string format_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

void write_dataset(const fs::path& path, const TrainingSet& set) {
    Header h{"dataset", {}};
    h.entries["patch"] = std::to_string(set.patch.m1) + "," + std::to_string(set.patch.m2);
    h.entries["problem"] = to_string(set.problem);
    h.entries["N"] = std::to_string(set.size());
    h.entries["d"] = std::to_string(set.input_dim());
    h.entries["p"] = std::to_string(set.output_dim());
    h.entries["R"] = format_double(set.law.R);
    h.entries["D"] = format_double(set.law.D);
    h.entries["seed"] = std::to_string(set.law.seed);
    h.entries["buffer"] = format_double(set.buffer);
    h.entries["skipped"] = std::to_string(set.skipped);
    h.entries["layout"] = "inputs_Nxd,outputs_Nxp,row_major,f64le";
    auto out = open_out(path, std::ios::binary);
    write_header(out, h);
    write_columns_as_rows(out, set.inputs);
    write_columns_as_rows(out, set.outputs);
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

TrainingSet read_dataset(const fs::path& path) {
    auto in = open_in(path);
    const Header h = parse_header(in, path);
    expect_kind(h, "dataset", path);
    TrainingSet set;
    const std::string& patch = h.at("patch");
    const auto comma = patch.find(',');
    if (comma == std::string::npos) {
        throw IoError("bad patch entry '" + patch + "' in '" + path.string() + "'");
    }
    set.patch = {std::stoi(patch.substr(0, comma)), std::stoi(patch.substr(comma + 1))};
    set.problem = problem_kind_from_string(h.at("problem"));
    set.law.R = h.number("R");
    set.law.D = h.number("D");
    set.law.seed = std::stoull(h.at("seed"));
    set.buffer = h.number("buffer");
    set.skipped = static_cast<int>(h.integer("skipped"));
    const auto N = static_cast<Eigen::Index>(h.integer("N"));
    const auto d = static_cast<Eigen::Index>(h.integer("d"));
    const auto p = static_cast<Eigen::Index>(h.integer("p"));
    if (N < 0 || d < 1 || p < 1) {
        throw IoError("bad dimensions in '" + path.string() + "'");
    }
    set.inputs.resize(d, N);
    set.outputs.resize(p, N);
    read_block(in, set.inputs.data(), static_cast<std::size_t>(set.inputs.size()), path);
    read_block(in, set.outputs.data(), static_cast<std::size_t>(set.outputs.size()), path);
    expect_end(in, path);
    return set;
}

void write_model(const fs::path& path, const TwoLayerNet& net) {
    net.validate();
    Header h{"model", {}};
    h.entries["patch"] = std::to_string(net.patch.m1) + "," + std::to_string(net.patch.m2);
    h.entries["d"] = std::to_string(net.input_dim());
    h.entries["h"] = std::to_string(net.hidden_dim());
    h.entries["p"] = std::to_string(net.output_dim());
    h.entries["normalize"] = net.normalize ? "1" : "0";
    h.entries["eps1"] = format_double(net.eps1);
    h.entries["dx"] = format_double(net.dx);
    h.entries["init"] = net.init;
    h.entries["layout"] = "W1_hxd,b1,W2_pxh,b2,row_major,f64le";
    auto out = open_out(path, std::ios::binary);
    write_header(out, h);
    write_row_major(out, net.W1);
    write_block(out, net.b1.data(), static_cast<std::size_t>(net.b1.size()));
    write_row_major(out, net.W2);
    write_block(out, net.b2.data(), static_cast<std::size_t>(net.b2.size()));
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

TwoLayerNet read_model(const fs::path& path) {
    auto in = open_in(path);
    const Header h = parse_header(in, path);
    expect_kind(h, "model", path);
    TwoLayerNet net;
    const std::string& patch = h.at("patch");
    const auto comma = patch.find(',');
    if (comma == std::string::npos) {
        throw IoError("bad patch entry '" + patch + "' in '" + path.string() + "'");
    }
    net.patch = {std::stoi(patch.substr(0, comma)), std::stoi(patch.substr(comma + 1))};
    const auto d = static_cast<Eigen::Index>(h.integer("d"));
    const auto hd = static_cast<Eigen::Index>(h.integer("h"));
    const auto p = static_cast<Eigen::Index>(h.integer("p"));
    if (d < 1 || hd < 1 || p < 1) {
        throw IoError("bad dimensions in '" + path.string() + "'");
    }
    net.normalize = h.integer("normalize") != 0;
    net.eps1 = h.number("eps1");
    net.dx = h.number("dx");
    net.init = h.at("init");
    net.W1 = read_row_major(in, hd, d, path);
    net.b1.resize(hd);
    read_block(in, net.b1.data(), static_cast<std::size_t>(hd), path);
    net.W2 = read_row_major(in, p, hd, path);
    net.b2.resize(p);
    read_block(in, net.b2.data(), static_cast<std::size_t>(p), path);
    expect_end(in, path);
    net.validate();
    return net;
}

void write_field(const fs::path& path, const Field2D& field) {
    Header h{"field", {}};
    h.entries["origin_x"] = format_double(field.grid.origin().x);
    h.entries["origin_y"] = format_double(field.grid.origin().y);
    h.entries["dx"] = format_double(field.grid.dx());
    h.entries["nx"] = std::to_string(field.grid.nx());
    h.entries["ny"] = std::to_string(field.grid.ny());
    h.entries["layout"] = "values_(ny+1)x(nx+1),row_major,f64le";
    auto out = open_out(path, std::ios::binary);
    write_header(out, h);
    write_block(out, field.values.data(), field.values.size());
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

Field2D read_field(const fs::path& path) {
    auto in = open_in(path);
    const Header h = parse_header(in, path);
    expect_kind(h, "field", path);
    const double dx = h.number("dx");
    const auto nx = h.integer("nx");
    const auto ny = h.integer("ny");
    const GridSpec g = GridSpec::build({h.number("origin_x"), h.number("origin_y")},
                                       {static_cast<double>(nx) * dx, static_cast<double>(ny) * dx}, dx);
    Field2D f(g);
    read_block(in, f.values.data(), f.values.size(), path);
    expect_end(in, path);
    return f;
}

Header read_header(const fs::path& path) {
    auto in = open_in(path);
    return parse_header(in, path);
}

void write_loss_curve(const fs::path& path, const std::vector<LossRecord>& curve) {
    CsvTable t{{"epoch", "train_loss", "test_loss", "lr"}, {}};
    for (const auto& r : curve) {
        t.rows.push_back({std::to_string(r.epoch), format_double(r.train_loss),
                          std::isnan(r.test_loss) ? std::string() : format_double(r.test_loss), format_double(r.lr)});
    }
    write_csv(path, t);
}

void write_residuals(const fs::path& path, const std::vector<double>& history) {
    CsvTable t{{"iteration", "res"}, {}};
    for (std::size_t k = 0; k < history.size(); ++k) {
        t.rows.push_back({std::to_string(k + 1), format_double(history[k])});
    }
    write_csv(path, t);
}

void write_spectrum(const fs::path& path, const std::vector<double>& sigma_rel) {
    CsvTable t{{"index", "sigma_rel"}, {}};
    for (std::size_t k = 0; k < sigma_rel.size(); ++k) {
        t.rows.push_back({std::to_string(k + 1), format_double(sigma_rel[k])});
    }
    write_csv(path, t);
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) {
        throw IoError("CSV has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - columns.begin());
}

void write_csv(const fs::path& path, const CsvTable& table) {
    auto out = open_out(path);
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            out << (k ? "," : "") << cells[k];
        }
        out << '\n';
    };
    line(table.columns);
    for (const auto& r : table.rows) {
        if (r.size() != table.columns.size()) {
            throw DimensionError("CSV row width does not match the header");
        }
        line(r);
    }
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

CsvTable read_csv(const fs::path& path) {
    auto in = open_in(path);
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (!s.empty() && s.back() == ',') {
            cells.emplace_back();
        }
        return cells;
    };
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError("'" + path.string() + "' is empty");
    }
    t.columns = split(line);
    int n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) {
            continue;
        }
        auto cells = split(line);
        if (cells.size() != t.columns.size()) {
            throw IoError("'" + path.string() + "' line " + std::to_string(n) + " has " +
                          std::to_string(cells.size()) + " cells, expected " + std::to_string(t.columns.size()));
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t file_hash(const fs::path& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a(ss.str());
}

} // namespace rosch
