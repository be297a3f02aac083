#pragma once

// Streaming task pipeline: temporal division into windows, round-robin bins,
// the FIFO drop queue and the load/timing formulas.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "crowdrace/core.hpp"

namespace crowdrace {

struct Window {
  std::int64_t index = 0;
  std::vector<Post> posts;
  double open_time_s = 0;
  double close_time_s = 0;
  // Millisecond bounds on the virtual clock. Both are exact multiples of the
  // task unit time, computed from the index rather than accumulated.
  Millis open_ms = 0;
  Millis close_ms = 0;
};

struct Assignment {
  WorkerId worker_id = 0;
  std::int64_t window_index = 0;
  std::vector<PostId> bin;
};

struct Allocation {
  std::vector<Assignment> assignments;
  // Posts no worker received this window; they wait in the drop queue.
  std::vector<PostId> leftover;
  // Round-robin cursor (index into worker_ids) for the next window.
  std::size_t next_cursor = 0;
};

struct QueuedPost {
  Post post;
  Millis deadline_ms = 0;
};

struct DropQueue {
  std::deque<QueuedPost> pending;
  std::int64_t dropped_count = 0;
  std::int64_t solved_count = 0;
  Millis clock_ms = 0;
};

std::vector<Window> build_windows(std::span<const Post> posts,
                                  std::int32_t window_size,
                                  double task_unit_time_s);

// Sequential bins of task_unit_size go to workers in order starting at
// `cursor`, at most one bin per worker per window.
Allocation allocate_round_robin(const Window& window,
                                std::span<const WorkerId> worker_ids,
                                std::int32_t task_unit_size,
                                std::size_t cursor = 0);

// L = arrival / service. Throws DomainError for service_rate <= 0.
double task_intensity(double arrival_rate, double service_rate);

// T = P * mu / w seconds.
double total_contest_time(std::int64_t n_posts, double task_unit_time_s,
                          std::int32_t window_size);

// Catch-up playback rate (n - 1) / (n - rr). Throws DomainError for n <= rr.
double warp_out_rate(double n, double reduction_rate);

// Resolves every pending post whose deadline is <= now_ms: solved ones leave
// the queue as solved, the rest are dropped. FIFO order of the remainder is
// preserved. Throws ContractError if time regresses or a pending post also
// sits in an open assignment.
DropQueue advance_queue(DropQueue queue, Millis now_ms,
                        std::span<const Assignment> open_assignments,
                        const std::set<PostId>& solved);

struct LabeledAnnotation {
  PostId post_id = 0;
  std::int64_t annotated_count = 0;
};

// Reduce step: majority vote on the entity count per post, ties to the lower
// count.
std::map<PostId, std::int64_t> merge_annotations(
    std::span<const LabeledAnnotation> annotations);

struct StreamCounts {
  std::int64_t ingested = 0;
  std::int64_t solved = 0;
  std::int64_t dropped = 0;
  std::int64_t pending = 0;
  std::int64_t in_assignment = 0;

  bool conserved() const {
    return solved + dropped + pending + in_assignment == ingested;
  }

  friend bool operator==(const StreamCounts&, const StreamCounts&) = default;
};

struct TakenPost {
  Post post;
  bool first_annotation = false;  // false when overlapping an earlier answer
};

// Single-writer timeline over the windowed stream. Windows open back to back;
// the window closing at time t still accepts annotations landing exactly at t.
class StreamEngine {
 public:
  StreamEngine(const ContestConfig& config, std::vector<Post> posts);

  // Processes every window boundary strictly before now_ms.
  void advance_to(Millis now_ms);
  // Processes every window boundary at or before now_ms.
  void flush_through(Millis now_ms);

  // Next post for this worker from the open window, or nullopt when the
  // worker has already annotated every post on offer. Priority: own bin,
  // drop-queue leftovers, other bins, then overlap on solved posts.
  std::optional<TakenPost> take_post(WorkerId worker);

  // Removes a worker from the round-robin rotation from the next window on.
  void retire_worker(WorkerId worker);

  const Window* open_window() const;
  const std::vector<Assignment>& open_assignments() const { return assignments_; }
  // Start time of the next window, if any remain.
  std::optional<Millis> next_open_ms() const;
  Millis clock_ms() const { return clock_ms_; }
  StreamCounts counts() const;
  std::int64_t solved_count() const { return solved_; }
  const std::vector<Window>& windows() const { return windows_; }

 private:
  void close_current();
  void open_next();
  void process_boundaries(Millis limit, bool inclusive);

  struct Slot {
    bool solved = false;
    std::int32_t owner = -1;  // worker holding the bin, -1 for leftovers
    std::vector<WorkerId> annotators;
  };

  ContestConfig config_;
  std::vector<Window> windows_;
  std::vector<WorkerId> worker_ids_;
  std::size_t cursor_ = 0;
  std::int64_t next_window_ = 0;
  bool window_open_ = false;
  std::vector<Assignment> assignments_;
  std::vector<Slot> slots_;                  // per post of the open window
  std::map<PostId, std::size_t> slot_of_post_;
  std::vector<std::int32_t> bin_of_worker_;  // assignment index or -1
  DropQueue queue_;
  Millis clock_ms_ = 0;
  std::int64_t ingested_ = 0;
  std::int64_t solved_ = 0;
  std::int64_t dropped_ = 0;
  std::int64_t in_assignment_ = 0;
  std::vector<std::size_t> bin_cursor_;  // per assignment, first possibly unsolved
  std::size_t scan_cursor_ = 0;          // first possibly unsolved slot
};

}  // namespace crowdrace
