#include "crowdrace/stream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "crowdrace/error.hpp"

namespace crowdrace {

namespace {

Millis window_edge_ms(std::int64_t index, double task_unit_time_s) {
  return std::llround(static_cast<double>(index) * task_unit_time_s * 1000.0);
}

}  // namespace

std::vector<Window> build_windows(std::span<const Post> posts,
                                  std::int32_t window_size,
                                  double task_unit_time_s) {
  if (window_size < 1) throw ConfigError("build_windows: window_size must be >= 1");
  if (!(task_unit_time_s > 0.0)) {
    throw ConfigError("build_windows: task_unit_time_s must be positive");
  }
  std::vector<Window> windows;
  const auto w = static_cast<std::size_t>(window_size);
  windows.reserve((posts.size() + w - 1) / w);
  for (std::size_t start = 0; start < posts.size(); start += w) {
    Window win;
    win.index = static_cast<std::int64_t>(windows.size());
    const std::size_t end = std::min(posts.size(), start + w);
    win.posts.assign(posts.begin() + static_cast<std::ptrdiff_t>(start),
                     posts.begin() + static_cast<std::ptrdiff_t>(end));
    win.open_time_s = static_cast<double>(win.index) * task_unit_time_s;
    win.close_time_s = win.open_time_s + task_unit_time_s;
    win.open_ms = window_edge_ms(win.index, task_unit_time_s);
    win.close_ms = window_edge_ms(win.index + 1, task_unit_time_s);
    windows.push_back(std::move(win));
  }
  return windows;
}

Allocation allocate_round_robin(const Window& window,
                                std::span<const WorkerId> worker_ids,
                                std::int32_t task_unit_size, std::size_t cursor) {
  if (task_unit_size < 1) throw ConfigError("allocate_round_robin: task_unit_size < 1");
  Allocation out;
  const std::size_t n_posts = window.posts.size();
  const auto unit = static_cast<std::size_t>(task_unit_size);
  const std::size_t n_workers = worker_ids.size();
  if (n_workers == 0) {
    for (const auto& p : window.posts) out.leftover.push_back(p.id);
    return out;
  }
  cursor %= n_workers;
  const std::size_t n_bins = std::min((n_posts + unit - 1) / unit, n_workers);
  std::size_t next = 0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    Assignment a;
    a.worker_id = worker_ids[(cursor + b) % n_workers];
    a.window_index = window.index;
    const std::size_t end = std::min(n_posts, next + unit);
    for (; next < end; ++next) a.bin.push_back(window.posts[next].id);
    out.assignments.push_back(std::move(a));
  }
  for (; next < n_posts; ++next) out.leftover.push_back(window.posts[next].id);
  out.next_cursor = (cursor + n_bins) % n_workers;
  return out;
}

double task_intensity(double arrival_rate, double service_rate) {
  if (!(service_rate > 0.0)) {
    throw DomainError("task_intensity: service rate must be positive");
  }
  return arrival_rate / service_rate;
}

double total_contest_time(std::int64_t n_posts, double task_unit_time_s,
                          std::int32_t window_size) {
  if (window_size < 1) throw ConfigError("total_contest_time: window_size must be >= 1");
  return static_cast<double>(n_posts) * task_unit_time_s /
         static_cast<double>(window_size);
}

double warp_out_rate(double n, double reduction_rate) {
  if (!(n > reduction_rate)) {
    throw DomainError("warp_out_rate: n must exceed the reduction rate");
  }
  return (n - 1.0) / (n - reduction_rate);
}

DropQueue advance_queue(DropQueue queue, Millis now_ms,
                        std::span<const Assignment> open_assignments,
                        const std::set<PostId>& solved) {
  if (now_ms < queue.clock_ms) {
    throw ContractError("advance_queue: time moved backwards from " +
                        std::to_string(queue.clock_ms) + " to " +
                        std::to_string(now_ms));
  }
  for (const auto& a : open_assignments) {
    for (PostId id : a.bin) {
      for (const auto& q : queue.pending) {
        if (q.post.id == id) {
          throw ContractError("advance_queue: post " + std::to_string(id) +
                              " is both pending and assigned");
        }
      }
    }
  }
  std::deque<QueuedPost> kept;
  for (auto& q : queue.pending) {
    if (q.deadline_ms <= now_ms) {
      if (solved.count(q.post.id) != 0) {
        ++queue.solved_count;
      } else {
        ++queue.dropped_count;
      }
    } else {
      kept.push_back(std::move(q));
    }
  }
  queue.pending = std::move(kept);
  queue.clock_ms = now_ms;
  return queue;
}

std::map<PostId, std::int64_t> merge_annotations(
    std::span<const LabeledAnnotation> annotations) {
  std::map<PostId, std::map<std::int64_t, std::int64_t>> votes;
  for (const auto& a : annotations) ++votes[a.post_id][a.annotated_count];
  std::map<PostId, std::int64_t> merged;
  for (const auto& [post, tally] : votes) {
    std::int64_t best_count = 0;
    std::int64_t best_votes = -1;
    // Ascending count order, so a strict > keeps the lower count on ties.
    for (const auto& [count, n] : tally) {
      if (n > best_votes) {
        best_votes = n;
        best_count = count;
      }
    }
    merged[post] = best_count;
  }
  return merged;
}

StreamEngine::StreamEngine(const ContestConfig& config, std::vector<Post> posts)
    : config_(config),
      windows_(build_windows(posts, config.window_size, config.task_unit_time_s)),
      worker_ids_(static_cast<std::size_t>(config.n_workers)),
      bin_of_worker_(static_cast<std::size_t>(config.n_workers), -1) {
  std::iota(worker_ids_.begin(), worker_ids_.end(), 0);
  if (!windows_.empty()) open_next();
}

const Window* StreamEngine::open_window() const {
  return window_open_ ? &windows_[static_cast<std::size_t>(next_window_ - 1)] : nullptr;
}

std::optional<Millis> StreamEngine::next_open_ms() const {
  if (next_window_ >= static_cast<std::int64_t>(windows_.size())) return std::nullopt;
  return windows_[static_cast<std::size_t>(next_window_)].open_ms;
}

void StreamEngine::open_next() {
  const Window& win = windows_[static_cast<std::size_t>(next_window_)];
  const Allocation alloc =
      allocate_round_robin(win, worker_ids_, config_.task_unit_size, cursor_);
  cursor_ = alloc.next_cursor;
  assignments_ = alloc.assignments;
  slots_.assign(win.posts.size(), Slot{});
  slot_of_post_.clear();
  for (std::size_t i = 0; i < win.posts.size(); ++i) slot_of_post_[win.posts[i].id] = i;
  std::fill(bin_of_worker_.begin(), bin_of_worker_.end(), -1);
  bin_cursor_.assign(assignments_.size(), 0);
  scan_cursor_ = 0;
  in_assignment_ = 0;
  for (std::size_t a = 0; a < assignments_.size(); ++a) {
    const auto& asg = assignments_[a];
    bin_of_worker_[static_cast<std::size_t>(asg.worker_id)] = static_cast<std::int32_t>(a);
    for (PostId id : asg.bin) slots_[slot_of_post_.at(id)].owner = asg.worker_id;
    in_assignment_ += static_cast<std::int64_t>(asg.bin.size());
  }
  for (PostId id : alloc.leftover) {
    queue_.pending.push_back({win.posts[slot_of_post_.at(id)], win.close_ms});
  }
  ingested_ += static_cast<std::int64_t>(win.posts.size());
  clock_ms_ = std::max(clock_ms_, win.open_ms);
  window_open_ = true;
  ++next_window_;
}

void StreamEngine::close_current() {
  const Window& win = windows_[static_cast<std::size_t>(next_window_ - 1)];
  dropped_ += in_assignment_;
  in_assignment_ = 0;
  // Leftovers still queued were never taken, so none of them is solved.
  const std::int64_t before = queue_.dropped_count;
  queue_ = advance_queue(std::move(queue_), win.close_ms, {}, {});
  dropped_ += queue_.dropped_count - before;
  assignments_.clear();
  slots_.clear();
  slot_of_post_.clear();
  std::fill(bin_of_worker_.begin(), bin_of_worker_.end(), -1);
  clock_ms_ = std::max(clock_ms_, win.close_ms);
  window_open_ = false;
}

void StreamEngine::process_boundaries(Millis limit, bool inclusive) {
  if (limit < clock_ms_) {
    throw ContractError("stream clock moved backwards to " + std::to_string(limit));
  }
  const auto due = [&](Millis t) { return inclusive ? t <= limit : t < limit; };
  for (;;) {
    if (window_open_) {
      const Window& win = windows_[static_cast<std::size_t>(next_window_ - 1)];
      if (!due(win.close_ms)) break;
      close_current();
    } else if (auto next = next_open_ms(); next && due(*next)) {
      open_next();
    } else {
      break;
    }
  }
  clock_ms_ = std::max(clock_ms_, limit);
}

void StreamEngine::advance_to(Millis now_ms) { process_boundaries(now_ms, false); }

void StreamEngine::flush_through(Millis now_ms) { process_boundaries(now_ms, true); }

void StreamEngine::retire_worker(WorkerId worker) {
  auto it = std::find(worker_ids_.begin(), worker_ids_.end(), worker);
  if (it == worker_ids_.end()) return;
  const auto idx = static_cast<std::size_t>(it - worker_ids_.begin());
  worker_ids_.erase(it);
  if (idx < cursor_) --cursor_;
  if (worker_ids_.empty()) {
    cursor_ = 0;
  } else {
    cursor_ %= worker_ids_.size();
  }
}

std::optional<TakenPost> StreamEngine::take_post(WorkerId worker) {
  if (!window_open_) return std::nullopt;
  const Window& win = windows_[static_cast<std::size_t>(next_window_ - 1)];
  const auto mark = [&](std::size_t slot) {
    Slot& s = slots_[slot];
    s.annotators.push_back(worker);
    TakenPost taken{win.posts[slot], !s.solved};
    if (!s.solved) {
      s.solved = true;
      ++solved_;
      if (s.owner >= 0) --in_assignment_;
    }
    return taken;
  };

  const std::int32_t own = bin_of_worker_[static_cast<std::size_t>(worker)];
  if (own >= 0) {
    const auto& bin = assignments_[static_cast<std::size_t>(own)].bin;
    std::size_t& cur = bin_cursor_[static_cast<std::size_t>(own)];
    for (; cur < bin.size(); ++cur) {
      const std::size_t slot = slot_of_post_.at(bin[cur]);
      if (!slots_[slot].solved) return mark(slot);
    }
  }
  if (!queue_.pending.empty()) {
    const PostId id = queue_.pending.front().post.id;
    queue_.pending.pop_front();
    return mark(slot_of_post_.at(id));
  }
  for (; scan_cursor_ < slots_.size(); ++scan_cursor_) {
    if (!slots_[scan_cursor_].solved) return mark(scan_cursor_);
  }
  for (std::size_t slot = 0; slot < slots_.size(); ++slot) {
    const auto& who = slots_[slot].annotators;
    if (std::find(who.begin(), who.end(), worker) == who.end()) return mark(slot);
  }
  return std::nullopt;
}

StreamCounts StreamEngine::counts() const {
  StreamCounts c;
  c.ingested = ingested_;
  c.solved = solved_;
  c.dropped = dropped_;
  c.pending = static_cast<std::int64_t>(queue_.pending.size());
  c.in_assignment = in_assignment_;
  return c;
}

}  // namespace crowdrace
