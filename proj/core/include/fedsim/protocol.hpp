#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedsim/codec.hpp"
#include "fedsim/param_vector.hpp"
#include "fedsim/tiering.hpp"

namespace fedsim {

enum class AggregationMode { Weighted, Uniform };

/// Server-side state of the tiered protocol: one model per tier, the update
/// counters, the round counter t and its budget.
struct ServerState {
  std::vector<ParamVector> tier_models;
  TierTable tiers;
  std::int64_t round = 0;         // t
  std::int64_t round_budget = 0;  // T_max
  ParamVector initial_model;
  AggregationMode mode = AggregationMode::Weighted;

  static ServerState fresh(TierTable tiers, ParamVector initial, std::int64_t round_budget,
                           AggregationMode mode);
};

struct ClientUpdate {
  int client_id = 0;
  std::size_t n_k = 0;
  EncodedModel encoded;
};

/// One tier's completed synchronous round.
struct TierRoundResult {
  std::size_t tier_index = 0;
  std::vector<ClientUpdate> client_updates;
  double sim_completion_time = 0.0;
};

/// Coefficients used by weighted_average: tier m gets the mirrored counter
/// T_tier_(M-1-m) / T in weighted mode, 1/M in uniform mode. They always form
/// a simplex.
std::vector<double> aggregation_coefficients(const TierTable& tiers, AggregationMode mode);

/// Cross-tier aggregate. At t == 0 this is the initial model exactly; with a
/// single tier the coefficient is 1 and the tier model passes through bitwise.
ParamVector weighted_average(const ServerState& state);

/// Decompresses the round's client updates and combines them with weights
/// n_k / N_c, accumulated in client_id order.
ParamVector intra_tier_aggregate(const TierRoundResult& result, const Codec& codec);

struct Broadcast {
  ParamVector global;    // the server's exact new global model
  EncodedModel encoded;  // what goes on the wire to the tier
};

/// Applies one tier completion: updates the tier model, counts the update,
/// advances t, and produces the new global broadcast. Returns nullopt once the
/// round budget is exhausted (terminal, not an error).
std::optional<Broadcast> fedat_on_tier_complete(ServerState& state, const TierRoundResult& result,
                                                const Codec& codec);

}  // namespace fedsim
