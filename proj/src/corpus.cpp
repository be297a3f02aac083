#include "crowdrace/corpus.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "crowdrace/error.hpp"

namespace crowdrace {

std::vector<Post> generate_corpus(std::int64_t n_posts, RandomStream& rng,
                                  const CorpusSpec& spec) {
  if (n_posts < 1) throw ConfigError("generate_corpus: n_posts must be >= 1");
  if (!(spec.mean_entities > 0.0)) throw ConfigError("generate_corpus: mean must be positive");
  if (spec.min_tokens < 1 || spec.max_tokens < spec.min_tokens) {
    throw ConfigError("generate_corpus: invalid token range");
  }
  std::vector<Post> posts;
  posts.reserve(static_cast<std::size_t>(n_posts));
  for (std::int64_t i = 0; i < n_posts; ++i) {
    Post p;
    p.id = i;
    p.arrival_index = i;
    p.token_count = static_cast<std::int32_t>(rng.uniform_int(spec.min_tokens, spec.max_tokens));
    p.expected_entities = static_cast<std::int32_t>(
        std::min<std::int64_t>(rng.poisson(spec.mean_entities), p.token_count));
    posts.push_back(p);
  }
  return posts;
}

void write_corpus(std::ostream& out, const std::vector<Post>& posts) {
  for (const auto& p : posts) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["token_count"] = p.token_count;
    j["expected_entities"] = p.expected_entities;
    out << j.dump() << '\n';
  }
}

std::vector<Post> read_corpus(std::istream& in) {
  std::vector<Post> posts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Post p;
      p.id = j.at("id").get<PostId>();
      p.token_count = j.at("token_count").get<std::int32_t>();
      p.expected_entities = j.at("expected_entities").get<std::int32_t>();
      p.arrival_index = static_cast<std::int64_t>(posts.size());
      p.validate();
      posts.push_back(p);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return posts;
}

}  // namespace crowdrace
