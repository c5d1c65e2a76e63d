/*
 * Copyright 2026 The DynRAG Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynrag/reranker.hpp"
#include "dynrag/reward.hpp"

namespace dynrag::preference {

/// (chosen, rejected) trajectory pair for one query. reward_chosen is
/// strictly greater than reward_rejected and the two outputs differ.
struct PreferencePair {
    std::string query_id;
    std::string prompt;
    std::string chosen;
    std::string rejected;
    double reward_chosen = 0.0;
    double reward_rejected = 0.0;

    bool operator==(const PreferencePair&) const = default;
};

struct PairSelection {
    std::size_t chosen = 0;    // index into the trajectory list
    std::size_t rejected = 0;
};

/// Highest- and lowest-reward trajectories, lowest index on ties. nullopt
/// when all rewards are equal or the two picks have identical output text.
/// Throws Error when a trajectory has no reward.
std::optional<PairSelection> select_pair_indices(std::span<const rerank::Trajectory> trajectories);

std::optional<PreferencePair> select_pair(std::span<const rerank::Trajectory> trajectories);

/// Numerically stable log(sigmoid(x)).
double log_sigmoid(double x);

/// log sigma(beta * ((lp_chosen - lr_chosen) - (lp_rejected - lr_rejected))).
/// The result is always finite and strictly negative.
double dpo_objective(double logp_policy_chosen, double logp_policy_rejected, double logp_ref_chosen,
                     double logp_ref_rejected, double beta);

/// Throws Error when the pair breaks an invariant.
void validate(const PreferencePair& pair);

/// Writes {"prompt","chosen","rejected","reward_chosen","reward_rejected","query_id"} lines.
std::size_t export_dpo_pairs(std::span<const PreferencePair> pairs, std::ostream& sink);

std::vector<PreferencePair> read_dpo_pairs(std::istream& in);

struct Manifest {
    double beta = 0.1;
    std::size_t n_samples = 8;
    reward::RewardWeights reward_weights;
    std::int64_t seed = 0;
};

std::string manifest_json(const Manifest& m);

}  // namespace dynrag::preference
