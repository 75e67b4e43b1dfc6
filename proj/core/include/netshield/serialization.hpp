#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "netshield/experiments.hpp"

namespace netshield {

/// FNV-1a 64-bit hash of a byte string, lowercase hex. Used for manifest
/// content fingerprints, not for security.
std::string content_hash(std::string_view data);

/// All *_to_json functions emit a versioned JSON document; the *_from_json
/// counterparts validate the schema and throw std::runtime_error with a
/// descriptive message on malformed input.

std::string observations_to_json(const std::vector<FlowObservation>& obs);
std::vector<FlowObservation> observations_from_json(const std::string& text);

std::string theta_to_json(const Theta& theta, double io_objective);
Theta theta_from_json(const std::string& text, double* io_objective = nullptr);

/// Scenario sets serialize as damaged-arc groups: each scenario lists the arc
/// indices it destroys, the damage amount applied to each, and a probability.
std::string scenarios_to_json(const std::vector<Scenario>& scenarios);
std::vector<Scenario> scenarios_from_json(const std::string& text, int arc_count);

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);

std::string trial_to_json(const TrialResult& r);

}  // namespace netshield
