#include "cospar/action_space.hpp"

#include "cospar/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cospar {

double Dimension::spacing() const noexcept {
    return count > 1 ? (max - min) / static_cast<double>(count - 1) : 0.0;
}

double Dimension::value(std::size_t i) const noexcept {
    if (count <= 1) return min;
    if (i + 1 >= count) return max;
    return min + static_cast<double>(i) * spacing();
}

std::size_t Dimension::nearest(double x) const noexcept {
    if (count <= 1) return 0;
    x = std::clamp(x, min, max);
    auto lo = static_cast<std::size_t>(std::floor((x - min) / spacing()));
    lo = std::min(lo, count - 1);
    // floor() can land one below or above the true bracket after rounding.
    std::size_t best = lo > 0 ? lo - 1 : 0;
    double best_distance = std::abs(x - value(best));
    for (std::size_t i = best + 1; i <= std::min(lo + 1, count - 1); ++i) {
        const double distance = std::abs(x - value(i));
        if (distance < best_distance) {
            best = i;
            best_distance = distance;
        }
    }
    return best;
}

ActionSpace::ActionSpace(std::vector<Dimension> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw ConfigError("action space needs at least one dimension");
    for (std::size_t d = 0; d < dims_.size(); ++d) {
        auto& dim = dims_[d];
        if (dim.name.empty()) dim.name = "dim_" + std::to_string(d);
        std::ostringstream where;
        where << "dimension '" << dim.name << "'";
        if (dim.count == 0) throw ConfigError(where.str() + ": count must be at least 1");
        if (!std::isfinite(dim.min) || !std::isfinite(dim.max))
            throw ConfigError(where.str() + ": bounds must be finite");
        if (dim.min > dim.max) throw ConfigError(where.str() + ": min exceeds max");
        if (dim.count > 1 && !(dim.min < dim.max))
            throw ConfigError(where.str() + ": min must be below max when count > 1");
    }
    strides_.assign(dims_.size(), 1);
    size_ = 1;
    for (std::size_t d = dims_.size(); d-- > 0;) {
        strides_[d] = size_;
        size_ *= dims_[d].count;
    }
}

std::optional<std::size_t> ActionSpace::find_dimension(const std::string& name) const {
    for (std::size_t d = 0; d < dims_.size(); ++d)
        if (dims_[d].name == name) return d;
    return std::nullopt;
}

std::vector<std::size_t> ActionSpace::grid_position(ActionIndex action) const {
    if (action >= size_) throw std::out_of_range("action index out of range");
    std::vector<std::size_t> position(dims_.size());
    for (std::size_t d = 0; d < dims_.size(); ++d) {
        position[d] = action / strides_[d];
        action %= strides_[d];
    }
    return position;
}

ActionIndex ActionSpace::flat_index(std::span<const std::size_t> position) const {
    if (position.size() != dims_.size()) throw std::out_of_range("grid position has wrong rank");
    ActionIndex index = 0;
    for (std::size_t d = 0; d < dims_.size(); ++d) {
        if (position[d] >= dims_[d].count) throw std::out_of_range("grid position out of range");
        index += position[d] * strides_[d];
    }
    return index;
}

std::vector<double> ActionSpace::coordinates(ActionIndex action) const {
    const auto position = grid_position(action);
    std::vector<double> x(dims_.size());
    for (std::size_t d = 0; d < dims_.size(); ++d) x[d] = dims_[d].value(position[d]);
    return x;
}

double ActionSpace::coordinate(ActionIndex action, std::size_t d) const {
    if (action >= size_) throw std::out_of_range("action index out of range");
    return dims_.at(d).value((action / strides_[d]) % dims_[d].count);
}

ActionSpace build_action_grid(std::vector<Dimension> dims) { return ActionSpace(std::move(dims)); }

}  // namespace cospar
