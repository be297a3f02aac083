#include "crowdrace/io.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "crowdrace/error.hpp"
#include "json_codec.hpp"

namespace crowdrace {

using codec::Json;

void write_event_log(std::ostream& out, const EventLog& log) {
  Json header;
  header["format"] = "crowdrace-eventlog";
  header["version"] = kEventLogVersion;
  header["feature_version"] = kFeatureVersion;
  header["seed"] = log.seed;
  header["config"] = codec::to_json(log.config);
  header["options"] = codec::to_json(log.options);
  Json profiles = Json::array();
  for (const auto& p : log.profiles) profiles.push_back(codec::to_json(p));
  header["profiles"] = std::move(profiles);
  out << header.dump() << '\n';
  for (const auto& e : log.events) out << codec::to_json(e).dump() << '\n';
  for (const auto& x : log.exits) out << codec::to_json(x).dump() << '\n';
  Json fin;
  fin["type"] = "final";
  Json ranking = Json::array();
  for (const auto& e : log.final_ranking.entries) ranking.push_back(codec::to_json(e));
  fin["final_ranking"] = std::move(ranking);
  fin["final_counts"] = codec::to_json(log.final_counts);
  fin["active_at_checkpoint"] = log.active_at_checkpoint;
  out << fin.dump() << '\n';
}

std::string serialize_event_log(const EventLog& log) {
  std::ostringstream os;
  write_event_log(os, log);
  return os.str();
}

EventLog read_event_log(std::istream& in) {
  EventLog log;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false, have_final = false;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (j.value("format", "") != "crowdrace-eventlog") {
          throw ParseError("not an event log");
        }
        if (j.at("version").get<int>() != kEventLogVersion) {
          throw ParseError("unsupported event log version");
        }
        if (j.at("feature_version").get<int>() != kFeatureVersion) {
          throw ParseError("unsupported feature version");
        }
        j.at("seed").get_to(log.seed);
        log.config = codec::contest_config_from(j.at("config"));
        log.options = codec::simulation_options_from(j.at("options"));
        for (const auto& p : j.at("profiles")) log.profiles.push_back(codec::worker_profile_from(p));
        have_header = true;
        continue;
      }
      if (have_final) throw ParseError("content after the final record");
      const std::string type = j.at("type").get<std::string>();
      if (type == "annotation") {
        log.events.push_back(codec::annotation_event_from(j));
      } else if (type == "exit") {
        log.exits.push_back(codec::exit_event_from(j));
      } else if (type == "final") {
        for (const auto& e : j.at("final_ranking")) {
          log.final_ranking.entries.push_back(codec::rank_entry_from(e));
        }
        log.final_counts = codec::stream_counts_from(j.at("final_counts"));
        j.at("active_at_checkpoint").get_to(log.active_at_checkpoint);
        have_final = true;
      } else {
        throw ParseError("unknown record type '" + type + "'");
      }
    }
  } catch (const ParseError& e) {
    throw ParseError("event log line " + std::to_string(line_no) + ": " + e.what());
  } catch (const std::exception& e) {
    throw ParseError("event log line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw ParseError("event log: missing header");
  if (!have_final) throw ParseError("event log: missing final record");
  return log;
}

void write_fitted(std::ostream& out, std::span<const FittedBehavior> fits) {
  for (const auto& f : fits) out << codec::to_json(f).dump() << '\n';
}

std::vector<FittedBehavior> read_fitted(std::istream& in) {
  std::vector<FittedBehavior> fits;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      fits.push_back(codec::fitted_behavior_from(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError("fitted line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return fits;
}

}  // namespace crowdrace
