#pragma once

// Line-delimited file formats for event logs and fitted behaviours.
//
// Event log: a header object {"format":"crowdrace-eventlog","version",...,
// "seed","config","options","profiles"}, one line per annotation
// ({"type":"annotation",...}) and per exit ({"type":"exit",...}), then a
// closing {"type":"final",...} line with the final ranking, stream counts and
// checkpointed active-worker counts. Parsing and re-serialising reproduces the
// input byte for byte.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "crowdrace/ctmc.hpp"
#include "crowdrace/inference.hpp"

namespace crowdrace {

inline constexpr int kEventLogVersion = 1;

void write_event_log(std::ostream& out, const EventLog& log);
std::string serialize_event_log(const EventLog& log);
// Throws ParseError on malformed input or an unsupported version.
EventLog read_event_log(std::istream& in);

void write_fitted(std::ostream& out, std::span<const FittedBehavior> fits);
std::vector<FittedBehavior> read_fitted(std::istream& in);

}  // namespace crowdrace
