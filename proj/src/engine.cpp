#include "cospar/engine.hpp"

#include "cospar/errors.hpp"

#include <cmath>
#include <string>

namespace cospar {

void EngineConfig::validate(const ActionSpace& space) const {
    if (n < 1) throw ConfigError("n must be at least 1");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive");
    kernel.validate(space.dimensionality());
    if (coactive_steps.size() != space.dimensionality())
        throw ConfigError("coactive_steps needs one entry per dimension");
    for (std::size_t d = 0; d < coactive_steps.size(); ++d) {
        const auto& s = coactive_steps[d];
        if (!(s.small_fraction > 0.0 && s.small_fraction < s.large_fraction && s.large_fraction <= 1.0))
            throw ConfigError("coactive step for dimension " + std::to_string(d) +
                              " must satisfy 0 < small < large <= 1");
    }
}

FeedbackBundle FeedbackBundle::unset(std::size_t n, std::size_t b) {
    FeedbackBundle fb;
    fb.rows = n;
    fb.cols = n + b;
    fb.pairwise.assign(fb.rows * fb.cols, std::nullopt);
    fb.coactive.assign(n, std::nullopt);
    return fb;
}

std::optional<ActionIndex> apply_coactive_suggestion(const ActionSpace& space, ActionIndex action,
                                                     std::span<const int> levels,
                                                     std::span<const CoactiveStep> steps) {
    if (levels.size() != space.dimensionality())
        throw ProtocolError("coactive levels must cover every dimension");
    if (steps.size() != space.dimensionality())
        throw ProtocolError("coactive steps must cover every dimension");
    auto position = space.grid_position(action);
    for (std::size_t d = 0; d < levels.size(); ++d) {
        const int level = levels[d];
        if (level < -2 || level > 2) throw ProtocolError("coactive level must lie in [-2, 2]");
        if (level == 0) continue;
        const auto& dim = space.dimension(d);
        const double fraction = std::abs(level) == 1 ? steps[d].small_fraction : steps[d].large_fraction;
        const double shifted = dim.value(position[d]) + (level > 0 ? 1.0 : -1.0) * fraction * dim.range();
        position[d] = dim.nearest(shifted);
    }
    const auto suggestion = space.flat_index(position);
    if (suggestion == action) return std::nullopt;
    return suggestion;
}

Engine::Engine(EngineConfig config, ActionSpace space, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed), rng_(seed) {
    config_.validate(space);
    model_ = std::make_shared<const PreferenceModel>(std::move(space), config_.kernel);
    fit_ = model_->fit(dataset_);
}

const std::vector<ActionIndex>& Engine::propose() {
    if (!pending_.empty()) throw ProtocolError("proposals are already pending feedback");
    std::vector<ActionIndex> proposals;
    proposals.reserve(config_.n);
    for (std::size_t j = 0; j < config_.n; ++j) proposals.push_back(argmax(model_->sample(fit_, rng_)));
    pending_ = std::move(proposals);
    return pending_;
}

RecordOutcome Engine::record(const FeedbackBundle& feedback) {
    const std::size_t n = config_.n;
    if (pending_.empty()) throw ProtocolError("no proposals are pending");
    if (feedback.rows != n || feedback.cols != n + config_.b ||
        feedback.pairwise.size() != feedback.rows * feedback.cols)
        throw ProtocolError("feedback matrix must be " + std::to_string(n) + " x " +
                            std::to_string(n + config_.b));
    if (!feedback.coactive.empty() && feedback.coactive.size() != n)
        throw ProtocolError("coactive feedback needs one entry per proposal");

    RecordOutcome outcome;
    PreferenceDataset added;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n + config_.b; ++k) {
            const auto& cell = feedback.at(j, k);
            if (!cell || (k < n && k <= j)) continue;
            ActionIndex other = 0;
            if (k < n) {
                other = pending_[k];
            } else {
                if (k - n >= buffer_.size())
                    throw ProtocolError("feedback references empty buffer slot " + std::to_string(k - n));
                other = buffer_[k - n];
            }
            if (other == pending_[j]) continue;
            added.push_back(*cell ? PreferenceRecord{pending_[j], other, 1.0, FeedbackSource::pairwise}
                                  : PreferenceRecord{other, pending_[j], 1.0, FeedbackSource::pairwise});
            ++outcome.pairwise_records;
        }
    }
    outcome.coactive_suggestions.assign(n, std::nullopt);
    for (std::size_t j = 0; j < feedback.coactive.size(); ++j) {
        if (!feedback.coactive[j]) continue;
        const auto suggestion = apply_coactive_suggestion(space(), pending_[j], *feedback.coactive[j],
                                                          config_.coactive_steps);
        outcome.coactive_suggestions[j] = suggestion;
        if (!suggestion) continue;
        added.push_back({*suggestion, pending_[j], config_.beta, FeedbackSource::coactive});
        ++outcome.coactive_records;
    }

    PreferenceDataset next = dataset_;
    next.insert(next.end(), added.begin(), added.end());
    fit_ = model_->fit(next);
    dataset_ = std::move(next);

    for (const auto a : pending_) buffer_.push_back(a);
    if (buffer_.size() > config_.b)
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(buffer_.size() - config_.b));
    pending_.clear();
    ++iteration_;
    return outcome;
}

PosteriorSummary Engine::posterior_summary() const { return {fit_.mean, model_->posterior_stddev(fit_)}; }

Engine Engine::restore(EngineConfig config, ActionSpace space, std::uint64_t seed, Rng rng,
                       std::size_t iteration, PreferenceDataset dataset, std::vector<ActionIndex> buffer,
                       std::vector<ActionIndex> pending) {
    Engine engine(std::move(config), std::move(space), seed);
    const auto a = engine.space().size();
    validate_dataset(dataset, a);
    if (buffer.size() > engine.config_.b) throw ConfigError("buffer longer than b");
    if (!pending.empty() && pending.size() != engine.config_.n)
        throw ConfigError("pending must be empty or hold n actions");
    for (const auto x : buffer)
        if (x >= a) throw ConfigError("buffer action index out of range");
    for (const auto x : pending)
        if (x >= a) throw ConfigError("pending action index out of range");
    engine.rng_ = rng;
    engine.iteration_ = iteration;
    engine.dataset_ = std::move(dataset);
    engine.fit_ = engine.model_->fit(engine.dataset_);
    engine.buffer_ = std::move(buffer);
    engine.pending_ = std::move(pending);
    return engine;
}

}  // namespace cospar
