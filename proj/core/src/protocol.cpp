#include "fedsim/protocol.hpp"

#include <algorithm>

namespace fedsim {

ServerState ServerState::fresh(TierTable tiers, ParamVector initial, std::int64_t round_budget,
                               AggregationMode mode) {
  ServerState state;
  state.tier_models.assign(tiers.tier_count(), initial);
  state.tiers = std::move(tiers);
  state.round = 0;
  state.round_budget = round_budget;
  state.initial_model = std::move(initial);
  state.mode = mode;
  return state;
}

std::vector<double> aggregation_coefficients(const TierTable& tiers, AggregationMode mode) {
  const std::size_t m_count = tiers.tier_count();
  std::vector<double> coefs(m_count);
  if (mode == AggregationMode::Uniform) {
    std::fill(coefs.begin(), coefs.end(), 1.0 / static_cast<double>(m_count));
    return coefs;
  }
  if (tiers.total_updates <= 0) {
    throw InternalError("aggregation_coefficients: no updates recorded (T == 0)");
  }
  const double total = static_cast<double>(tiers.total_updates);
  for (std::size_t m = 0; m < m_count; ++m) {
    coefs[m] = static_cast<double>(tiers.update_counts[m_count - 1 - m]) / total;
  }
  return coefs;
}

ParamVector weighted_average(const ServerState& state) {
  if (state.round == 0) {
    if (state.tiers.total_updates != 0) {
      throw InternalError("weighted_average: t == 0 but updates were recorded");
    }
    return state.initial_model;
  }
  if (state.tiers.total_updates == 0) {
    throw InternalError("weighted_average: t > 0 with no recorded updates");
  }
  if (state.tier_models.size() != state.tiers.tier_count()) {
    throw InternalError("weighted_average: tier model count does not match tier table");
  }
  const auto coefs = aggregation_coefficients(state.tiers, state.mode);
  ParamVector acc = scaled(state.tier_models[0], coefs[0]);
  for (std::size_t m = 1; m < state.tier_models.size(); ++m) {
    add_scaled(acc, state.tier_models[m], coefs[m]);
  }
  return acc;
}

ParamVector intra_tier_aggregate(const TierRoundResult& result, const Codec& codec) {
  if (result.client_updates.empty()) {
    throw Error("intra_tier_aggregate: empty client update list");
  }
  std::vector<const ClientUpdate*> ordered;
  ordered.reserve(result.client_updates.size());
  for (const auto& u : result.client_updates) ordered.push_back(&u);
  std::sort(ordered.begin(), ordered.end(),
            [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });

  std::size_t total_samples = 0;
  for (const auto* u : ordered) total_samples += u->n_k;
  if (total_samples == 0) {
    throw Error("intra_tier_aggregate: all client updates report n_k == 0");
  }

  ParamVector acc;
  bool first = true;
  for (const auto* update : ordered) {
    ParamVector model = codec.decompress(update->encoded);
    const double weight = static_cast<double>(update->n_k) / static_cast<double>(total_samples);
    if (first) {
      acc = scaled(model, weight);
      first = false;
      continue;
    }
    if (!acc.same_shape(model)) {
      throw ShapeError(shapes_to_string(acc.shapes), shapes_to_string(model.shapes),
                       "intra_tier_aggregate: client " + std::to_string(update->client_id));
    }
    add_scaled(acc, model, weight);
  }
  return acc;
}

std::optional<Broadcast> fedat_on_tier_complete(ServerState& state, const TierRoundResult& result,
                                                const Codec& codec) {
  if (state.round >= state.round_budget) return std::nullopt;
  if (result.tier_index >= state.tier_models.size()) {
    throw Error("fedat_on_tier_complete: tier index " + std::to_string(result.tier_index) +
                " out of range");
  }
  ParamVector aggregated = intra_tier_aggregate(result, codec);
  require_same_shape(state.initial_model, aggregated, "fedat_on_tier_complete");
  state.tier_models[result.tier_index] = std::move(aggregated);
  state.tiers.record_update(result.tier_index);
  state.round += 1;

  Broadcast broadcast;
  broadcast.global = weighted_average(state);
  broadcast.encoded = codec.compress(broadcast.global);
  return broadcast;
}

}  // namespace fedsim
