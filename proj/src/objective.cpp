#include "cospar/objective.hpp"

#include "cospar/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace cospar {
namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& text, std::size_t line) {
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(value))
        throw ParseError("row " + std::to_string(line) + ": non-numeric value '" + text + "'");
    return value;
}

std::string format_number(double x) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", x);
    return buffer;
}

}  // namespace

ObjectiveTable sample_gp_objective(const ActionSpace& space, const KernelParams& kernel, Rng& rng) {
    const auto cov = prior_covariance(space, kernel);
    const auto chol = factorize_with_jitter(cov, "objective prior covariance");
    const Vector z = standard_normal_vector(rng, cov.rows());
    return {space, chol.llt.matrixL() * z};
}

ObjectiveTable load_objective_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open objective file " + path.string());
    return parse_objective_csv(in);
}

ObjectiveTable parse_objective_csv(std::istream& in) {
    std::string line;
    std::size_t line_number = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_number;
            if (!trim(line).empty()) return true;
        }
        return false;
    };

    if (!next_line()) throw ParseError("empty objective file");
    const auto directive = trim(line);
    const std::string prefix = "# orientation:";
    if (directive.rfind(prefix, 0) != 0)
        throw ParseError("row 1: expected '# orientation: cost|utility'");
    const auto orientation_text = trim(std::string_view(directive).substr(prefix.size()));
    Orientation orientation;
    if (orientation_text == "cost")
        orientation = Orientation::cost;
    else if (orientation_text == "utility")
        orientation = Orientation::utility;
    else
        throw ParseError("row " + std::to_string(line_number) + ": unknown orientation '" +
                         orientation_text + "'");

    if (!next_line()) throw ParseError("missing header row");
    const auto header = split(line);
    if (header.size() < 2 || header.back() != "value")
        throw ParseError("row " + std::to_string(line_number) + ": header must end with 'value'");
    const std::size_t d = header.size() - 1;

    struct Row {
        std::vector<double> x;
        double value;
        std::size_t line;
    };
    std::vector<Row> rows;
    while (next_line()) {
        const auto cells = split(line);
        if (cells.size() != d + 1)
            throw ParseError("row " + std::to_string(line_number) + ": expected " +
                             std::to_string(d + 1) + " columns");
        Row row{std::vector<double>(d), parse_number(cells[d], line_number), line_number};
        for (std::size_t k = 0; k < d; ++k) row.x[k] = parse_number(cells[k], line_number);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("objective file has no data rows");

    std::vector<std::vector<double>> axes(d);
    for (std::size_t k = 0; k < d; ++k) {
        for (const auto& r : rows) axes[k].push_back(r.x[k]);
        std::sort(axes[k].begin(), axes[k].end());
        axes[k].erase(std::unique(axes[k].begin(), axes[k].end()), axes[k].end());
    }
    std::vector<Dimension> dims;
    for (std::size_t k = 0; k < d; ++k) {
        const auto& axis = axes[k];
        Dimension dim{header[k], axis.front(), axis.back(), axis.size(), ""};
        for (std::size_t i = 0; i < axis.size(); ++i) {
            const double tolerance = 1e-9 * std::max(1.0, std::abs(dim.range()));
            if (std::abs(axis[i] - dim.value(i)) > tolerance)
                throw ParseError("column '" + header[k] + "' is not equally spaced");
        }
        dims.push_back(std::move(dim));
    }
    ActionSpace space(std::move(dims));

    Vector values(static_cast<Eigen::Index>(space.size()));
    std::vector<bool> seen(space.size(), false);
    std::vector<std::size_t> position(d);
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < d; ++k)
            position[k] = static_cast<std::size_t>(
                std::lower_bound(axes[k].begin(), axes[k].end(), r.x[k]) - axes[k].begin());
        const auto index = space.flat_index(position);
        if (seen[index]) throw ParseError("row " + std::to_string(r.line) + ": duplicate grid point");
        seen[index] = true;
        values[static_cast<Eigen::Index>(index)] = orientation == Orientation::cost ? -r.value : r.value;
    }
    if (rows.size() != space.size())
        throw ParseError("incomplete grid: " + std::to_string(rows.size()) + " rows for " +
                         std::to_string(space.size()) + " grid points");
    return {std::move(space), std::move(values)};
}

void write_objective_csv(const ObjectiveTable& table, const std::filesystem::path& path,
                         Orientation orientation) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write objective file " + path.string());
    write_objective_csv(table, out, orientation);
}

void write_objective_csv(const ObjectiveTable& table, std::ostream& out, Orientation orientation) {
    out << "# orientation: " << (orientation == Orientation::cost ? "cost" : "utility") << '\n';
    for (const auto& dim : table.space.dimensions()) out << dim.name << ',';
    out << "value\n";
    for (ActionIndex a = 0; a < table.space.size(); ++a) {
        for (const double x : table.space.coordinates(a)) out << format_number(x) << ',';
        const double v = table.values[static_cast<Eigen::Index>(a)];
        out << format_number(orientation == Orientation::cost ? -v : v) << '\n';
    }
}

ObjectiveTable normalize_objective(const ObjectiveTable& table) {
    const double lo = table.values.minCoeff();
    const double hi = table.values.maxCoeff();
    if (!(hi > lo)) throw ConfigError("degenerate objective: all values are equal");
    return {table.space, ((table.values.array() - lo) / (hi - lo)).matrix()};
}

Preference preference_oracle(const ObjectiveTable& table, ActionIndex a, ActionIndex b) {
    const double va = table.values[static_cast<Eigen::Index>(a)];
    const double vb = table.values[static_cast<Eigen::Index>(b)];
    if (va > vb) return Preference::first;
    if (vb > va) return Preference::second;
    return Preference::none;
}

GradientTable gradient_table(const ObjectiveTable& table) {
    const auto& space = table.space;
    const auto d = space.dimensionality();
    GradientTable out{Matrix::Zero(static_cast<Eigen::Index>(space.size()), static_cast<Eigen::Index>(d)),
                      std::vector<bool>(d, false)};
    for (std::size_t k = 0; k < d; ++k) {
        const auto& dim = space.dimension(k);
        if (dim.count < 3) {
            out.flat_dimensions[k] = true;
            continue;
        }
        const double h = dim.spacing();
        for (ActionIndex a = 0; a < space.size(); ++a) {
            auto position = space.grid_position(a);
            const auto i = position[k];
            auto f = [&](std::size_t at) {
                position[k] = at;
                return table.values[static_cast<Eigen::Index>(space.flat_index(position))];
            };
            double g;
            if (i == 0)
                g = (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h);
            else if (i + 1 == dim.count)
                g = (3.0 * f(i) - 4.0 * f(i - 1) + f(i - 2)) / (2.0 * h);
            else
                g = (f(i + 1) - f(i - 1)) / (2.0 * h);
            out.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k)) = g;
        }
    }
    return out;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ConfigError("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (rank - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

CoactiveOracleConfig coactive_oracle_config(const GradientTable& gradients) {
    CoactiveOracleConfig cfg;
    for (Eigen::Index k = 0; k < gradients.values.cols(); ++k) {
        const Vector magnitudes = gradients.values.col(k).cwiseAbs();
        std::vector<double> v(magnitudes.data(), magnitudes.data() + magnitudes.size());
        cfg.p50.push_back(percentile(v, 50.0));
        cfg.p75.push_back(percentile(std::move(v), 75.0));
    }
    return cfg;
}

std::optional<CoactiveLevels> coactive_oracle(const GradientTable& gradients, ActionIndex action,
                                              const CoactiveOracleConfig& cfg) {
    const auto d = static_cast<std::size_t>(gradients.values.cols());
    if (cfg.p50.size() != d || cfg.p75.size() != d)
        throw ConfigError("coactive oracle thresholds need one entry per dimension");
    const auto row = static_cast<Eigen::Index>(action);
    bool above_median = false;
    std::size_t steepest = 0;
    for (std::size_t k = 0; k < d; ++k) {
        const double magnitude = std::abs(gradients.values(row, static_cast<Eigen::Index>(k)));
        if (magnitude > cfg.p50[k]) above_median = true;
        if (magnitude > std::abs(gradients.values(row, static_cast<Eigen::Index>(steepest)))) steepest = k;
    }
    if (!above_median) return std::nullopt;
    const double g = gradients.values(row, static_cast<Eigen::Index>(steepest));
    if (g == 0.0) return std::nullopt;
    CoactiveLevels levels(d, 0);
    const int size = std::abs(g) > cfg.p75[steepest] ? 2 : 1;
    levels[steepest] = g > 0.0 ? size : -size;
    return levels;
}

std::optional<CoactiveLevels> coactive_oracle(const ObjectiveTable& table, ActionIndex action,
                                              const CoactiveOracleConfig& cfg) {
    return coactive_oracle(gradient_table(table), action, cfg);
}

}  // namespace cospar
