#include <doctest.h>

#include <numeric>
#include <set>

#include "crowdrace/error.hpp"
#include "crowdrace/rng.hpp"
#include "crowdrace/stream.hpp"

using namespace crowdrace;

namespace {

std::vector<Post> make_posts(std::int64_t n) {
  std::vector<Post> posts;
  for (std::int64_t i = 0; i < n; ++i) posts.push_back({i, 10, 1, i});
  return posts;
}

std::vector<WorkerId> ids(int n) {
  std::vector<WorkerId> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST_CASE("build_windows") {
  CHECK(build_windows(make_posts(7600), 200, 10.0).size() == 38);

  const auto one = build_windows(make_posts(1), 200, 10.0);
  REQUIRE(one.size() == 1);
  CHECK(one[0].posts.size() == 1);

  const auto two = build_windows(make_posts(400), 200, 10.0);
  REQUIRE(two.size() == 2);
  CHECK(two[0].open_time_s == 0.0);
  CHECK(two[1].open_time_s == 10.0);
  CHECK(two[1].close_time_s - two[1].open_time_s == 10.0);
  CHECK(two[1].open_ms == 10000);
  CHECK(two[1].close_ms == 20000);

  CHECK(build_windows({}, 200, 10.0).empty());

  SUBCASE("concatenation reproduces the stream") {
    RandomStream rng(21);
    for (int t = 0; t < 50; ++t) {
      const auto n = rng.uniform_int(1, 500);
      const auto w = static_cast<std::int32_t>(rng.uniform_int(1, 60));
      const auto posts = make_posts(n);
      const auto windows = build_windows(posts, w, 2.5);
      CHECK(windows.size() == static_cast<std::size_t>((n + w - 1) / w));
      std::vector<Post> joined;
      for (const auto& win : windows) {
        CHECK(win.posts.size() <= static_cast<std::size_t>(w));
        joined.insert(joined.end(), win.posts.begin(), win.posts.end());
      }
      CHECK(joined == posts);
    }
  }
}

TEST_CASE("allocate_round_robin") {
  SUBCASE("200 posts, 20 workers, unit 10") {
    const auto win = build_windows(make_posts(200), 200, 10.0)[0];
    const auto a = allocate_round_robin(win, ids(20), 10);
    REQUIRE(a.assignments.size() == 20);
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(a.assignments[i].worker_id == static_cast<WorkerId>(i));
      CHECK(a.assignments[i].bin.size() == 10);
      CHECK(a.assignments[i].bin.front() == static_cast<PostId>(10 * i));
    }
    CHECK(a.leftover.empty());
  }
  SUBCASE("underfull window") {
    const auto win = build_windows(make_posts(5), 200, 10.0)[0];
    const auto a = allocate_round_robin(win, ids(2), 10);
    REQUIRE(a.assignments.size() == 1);
    CHECK(a.assignments[0].worker_id == 0);
    CHECK(a.assignments[0].bin.size() == 5);
  }
  SUBCASE("more workers than bins") {
    const auto win = build_windows(make_posts(200), 200, 10.0)[0];
    const auto a = allocate_round_robin(win, ids(100), 10);
    REQUIRE(a.assignments.size() == 20);
    std::set<PostId> seen;
    for (std::size_t i = 0; i < a.assignments.size(); ++i) {
      CHECK(a.assignments[i].worker_id == static_cast<WorkerId>(i));
      for (auto p : a.assignments[i].bin) CHECK(seen.insert(p).second);
    }
    CHECK(seen.size() == 200);
    CHECK(a.next_cursor == 20);
  }
  SUBCASE("too few workers leaves leftovers") {
    const auto win = build_windows(make_posts(200), 200, 10.0)[0];
    const auto a = allocate_round_robin(win, ids(3), 10);
    CHECK(a.assignments.size() == 3);
    CHECK(a.leftover.size() == 170);
    CHECK(a.leftover.front() == 30);
  }
}

TEST_CASE("round-robin fairness across windows") {
  RandomStream rng(22);
  for (int t = 0; t < 30; ++t) {
    const int n_workers = static_cast<int>(rng.uniform_int(1, 30));
    const auto unit = static_cast<std::int32_t>(rng.uniform_int(1, 10));
    const auto window = static_cast<std::int32_t>(unit * rng.uniform_int(1, 8));
    const auto windows = build_windows(make_posts(window * 40), window, 1.0);
    std::vector<int> bins(static_cast<std::size_t>(n_workers), 0);
    std::size_t cursor = 0;
    for (const auto& w : windows) {
      const auto a = allocate_round_robin(w, ids(n_workers), unit, cursor);
      cursor = a.next_cursor;
      for (const auto& as : a.assignments) ++bins[static_cast<std::size_t>(as.worker_id)];
      const auto [lo, hi] = std::minmax_element(bins.begin(), bins.end());
      CHECK(*hi - *lo <= 1);
    }
  }
}

TEST_CASE("task_intensity") {
  CHECK(task_intensity(20, 1) == 20);
  CHECK(task_intensity(0, 1) == 0);
  CHECK(task_intensity(200, 10) == 20);
  CHECK_THROWS_AS(task_intensity(1, 0), DomainError);
  CHECK_THROWS_AS(task_intensity(1, -2), DomainError);
}

TEST_CASE("total_contest_time") {
  CHECK(total_contest_time(7600, 10, 200) == 380.0);
  CHECK(total_contest_time(200, 10, 200) == 10.0);
  CHECK(total_contest_time(1000, 5, 100) == 50.0);
  CHECK(total_contest_time(15200, 10, 200) == 2 * total_contest_time(7600, 10, 200));
  CHECK(total_contest_time(7600, 20, 200) == 2 * total_contest_time(7600, 10, 200));
  CHECK(total_contest_time(7600, 10, 400) == total_contest_time(7600, 10, 200) / 2);
}

TEST_CASE("warp_out_rate") {
  CHECK(warp_out_rate(200, 10) == 199.0 / 190.0);
  CHECK(warp_out_rate(11, 10) == 10.0);
  for (double n : {2.0, 7.5, 100.0, 1e6}) CHECK(warp_out_rate(n, 1) == 1.0);
  CHECK_THROWS_AS(warp_out_rate(10, 10), DomainError);
  CHECK_THROWS_AS(warp_out_rate(5, 10), DomainError);
  RandomStream rng(23);
  for (int i = 0; i < 1000; ++i) {
    const double rr = 1 + 50 * rng.uniform01();
    const double n = rr + 0.01 + 100 * rng.uniform01();
    CHECK(warp_out_rate(n, rr) > 1.0);
  }
}

TEST_CASE("advance_queue") {
  SUBCASE("empty queue") {
    const auto q = advance_queue({}, 100, {}, {});
    CHECK(q.pending.empty());
    CHECK(q.dropped_count == 0);
  }
  SUBCASE("window closes with 4 of 10 solved") {
    DropQueue q;
    for (PostId i = 0; i < 10; ++i) q.pending.push_back({{i, 5, 1, i}, 1000});
    const auto after = advance_queue(q, 1000, {}, {0, 3, 5, 7});
    CHECK(after.dropped_count == 6);
    CHECK(after.solved_count == 4);
    CHECK(after.pending.empty());
  }
  SUBCASE("deadline later than now keeps FIFO order") {
    DropQueue q;
    q.pending.push_back({{1, 5, 1, 0}, 500});
    q.pending.push_back({{2, 5, 1, 1}, 2000});
    q.pending.push_back({{3, 5, 1, 2}, 2000});
    const auto after = advance_queue(q, 1000, {}, {});
    REQUIRE(after.pending.size() == 2);
    CHECK(after.pending[0].post.id == 2);
    CHECK(after.pending[1].post.id == 3);
    CHECK(after.dropped_count == 1);
  }
  SUBCASE("solved exactly at close counts as solved") {
    DropQueue q;
    q.pending.push_back({{1, 5, 1, 0}, 1000});
    const auto after = advance_queue(q, 1000, {}, {1});
    CHECK(after.solved_count == 1);
    CHECK(after.dropped_count == 0);
  }
  SUBCASE("time regression") {
    DropQueue q;
    q.clock_ms = 50;
    CHECK_THROWS_AS(advance_queue(q, 49, {}, {}), ContractError);
  }
  SUBCASE("pending post also assigned") {
    DropQueue q;
    q.pending.push_back({{1, 5, 1, 0}, 1000});
    const std::vector<Assignment> open{{0, 0, {1}}};
    CHECK_THROWS_AS(advance_queue(q, 10, open, {}), ContractError);
  }
}

TEST_CASE("merge_annotations") {
  const std::vector<LabeledAnnotation> a{{1, 2}, {1, 2}, {1, 3}, {2, 4}, {2, 1}, {3, 0}};
  const auto m = merge_annotations(a);
  CHECK(m.at(1) == 2);
  CHECK(m.at(2) == 1);  // tie goes to the lower count
  CHECK(m.at(3) == 0);
  CHECK(m.size() == 3);
}

TEST_CASE("StreamEngine window timeline") {
  ContestConfig c;
  c.n_workers = 2;
  c.n_posts = 6;
  c.window_size = 3;
  c.task_unit_size = 1;
  c.task_unit_time_s = 1.0;
  c.arrival_rate = 1.0;
  StreamEngine eng(c, make_posts(6));
  REQUIRE(eng.open_window() != nullptr);
  CHECK(eng.open_window()->index == 0);
  CHECK(eng.counts().in_assignment == 2);
  CHECK(eng.counts().pending == 1);

  // Own bin first, then the leftover, then nothing new.
  auto p = eng.take_post(0);
  REQUIRE(p);
  CHECK(p->post.id == 0);
  CHECK(p->first_annotation);
  p = eng.take_post(0);
  REQUIRE(p);
  CHECK(p->post.id == 2);
  p = eng.take_post(0);
  REQUIRE(p);
  CHECK(p->post.id == 1);  // worker 1's unsolved bin
  p = eng.take_post(0);
  CHECK_FALSE(p);  // worker 0 has annotated everything on offer
  p = eng.take_post(1);
  REQUIRE(p);
  CHECK_FALSE(p->first_annotation);  // overlap on a solved post
  CHECK(eng.counts().solved == 3);
  CHECK(eng.counts().conserved());

  // A window closing at t still accepts annotations at t.
  eng.advance_to(1000);
  CHECK(eng.open_window()->index == 0);
  eng.flush_through(1000);
  REQUIRE(eng.open_window() != nullptr);
  CHECK(eng.open_window()->index == 1);
  CHECK_THROWS_AS(eng.advance_to(999), ContractError);

  eng.flush_through(2000);
  CHECK(eng.open_window() == nullptr);
  const auto counts = eng.counts();
  CHECK(counts.ingested == 6);
  CHECK(counts.solved == 3);
  CHECK(counts.dropped == 3);
  CHECK(counts.conserved());
}

TEST_CASE("StreamEngine conservation under random traffic") {
  RandomStream rng(24);
  for (int trial = 0; trial < 40; ++trial) {
    ContestConfig c;
    c.n_workers = static_cast<std::int32_t>(rng.uniform_int(1, 8));
    c.task_unit_size = static_cast<std::int32_t>(rng.uniform_int(1, 5));
    c.window_size = static_cast<std::int32_t>(c.task_unit_size * rng.uniform_int(1, 6));
    c.n_posts = rng.uniform_int(1, 120);
    c.task_unit_time_s = 1.0;
    c.arrival_rate = 0.5;
    c.reward_spread = 1;
    StreamEngine eng(c, make_posts(c.n_posts));
    Millis t = 0;
    while (eng.open_window() != nullptr || eng.next_open_ms()) {
      t += rng.uniform_int(0, 400);
      eng.advance_to(t);
      if (eng.open_window() != nullptr) {
        eng.take_post(static_cast<WorkerId>(rng.uniform_int(0, c.n_workers - 1)));
      }
      CHECK(eng.counts().conserved());
      if (rng.uniform01() < 0.1) eng.flush_through(t);
    }
    CHECK(eng.counts().ingested == c.n_posts);
    CHECK(eng.counts().pending == 0);
    CHECK(eng.counts().in_assignment == 0);
  }
}
