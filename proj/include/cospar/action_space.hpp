#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cospar {

using ActionIndex = std::size_t;

/// One axis of the action grid: `count` equally spaced values on [min, max],
/// endpoints inclusive.
struct Dimension {
    std::string name;
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 1;
    std::string unit;  ///< display only, e.g. "m" or "s"

    double spacing() const noexcept;
    double range() const noexcept { return max - min; }
    /// Grid value at position `i`. The last position returns `max` exactly.
    double value(std::size_t i) const noexcept;
    /// Position whose value is nearest to `x`; equidistant candidates resolve to
    /// the lower position. `x` is clipped to [min, max] first.
    std::size_t nearest(double x) const noexcept;

    bool operator==(const Dimension&) const = default;
};

/// Finite grid of d-dimensional actions, flattened row-major (the last
/// dimension varies fastest).
class ActionSpace {
public:
    ActionSpace() = default;
    explicit ActionSpace(std::vector<Dimension> dims);

    std::size_t size() const noexcept { return size_; }
    std::size_t dimensionality() const noexcept { return dims_.size(); }
    const std::vector<Dimension>& dimensions() const noexcept { return dims_; }
    const Dimension& dimension(std::size_t d) const { return dims_.at(d); }
    std::optional<std::size_t> find_dimension(const std::string& name) const;

    std::vector<std::size_t> grid_position(ActionIndex action) const;
    ActionIndex flat_index(std::span<const std::size_t> position) const;
    std::vector<double> coordinates(ActionIndex action) const;
    double coordinate(ActionIndex action, std::size_t d) const;

    bool operator==(const ActionSpace&) const = default;

private:
    std::vector<Dimension> dims_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 0;
};

/// Builds and validates a grid; names default to `dim_<d>`.
ActionSpace build_action_grid(std::vector<Dimension> dims);

}  // namespace cospar
