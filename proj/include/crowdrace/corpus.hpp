#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "crowdrace/core.hpp"
#include "crowdrace/rng.hpp"

namespace crowdrace {

struct CorpusSpec {
  double mean_entities = 1.2;
  std::int32_t min_tokens = 5;
  std::int32_t max_tokens = 30;
};

// Synthetic post stream: token counts uniform on [min_tokens, max_tokens],
// entity counts Poisson(mean_entities) capped at the token count.
std::vector<Post> generate_corpus(std::int64_t n_posts, RandomStream& rng,
                                  const CorpusSpec& spec = {});

// One JSON object per line: {"id", "token_count", "expected_entities"}.
// Arrival index is the line position.
void write_corpus(std::ostream& out, const std::vector<Post>& posts);
std::vector<Post> read_corpus(std::istream& in);

}  // namespace crowdrace
