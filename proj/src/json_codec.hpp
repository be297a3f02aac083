#pragma once

// JSON mappings shared by the line-delimited file formats. Internal header.

#include <json.hpp>

#include "crowdrace/core.hpp"
#include "crowdrace/ctmc.hpp"
#include "crowdrace/inference.hpp"

namespace crowdrace::codec {

using Json = nlohmann::ordered_json;

Json to_json(const ContestConfig& c);
ContestConfig contest_config_from(const nlohmann::json& j);

Json to_json(const SimulationOptions& o);
SimulationOptions simulation_options_from(const nlohmann::json& j);

Json to_json(const WorkerProfile& p);
WorkerProfile worker_profile_from(const nlohmann::json& j);

Json to_json(const RankEntry& e);
RankEntry rank_entry_from(const nlohmann::json& j);

Json to_json(const StreamCounts& c);
StreamCounts stream_counts_from(const nlohmann::json& j);

Json to_json(const AnnotationEvent& e);
AnnotationEvent annotation_event_from(const nlohmann::json& j);

Json to_json(const ExitEvent& e);
ExitEvent exit_event_from(const nlohmann::json& j);

Json to_json(const FittedBehavior& f);
FittedBehavior fitted_behavior_from(const nlohmann::json& j);

}  // namespace crowdrace::codec
