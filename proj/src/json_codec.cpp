#include "json_codec.hpp"

namespace crowdrace::codec {

Json to_json(const ContestConfig& c) {
  Json j;
  j["n_workers"] = c.n_workers;
  j["n_posts"] = c.n_posts;
  j["window_size"] = c.window_size;
  j["task_unit_time_s"] = c.task_unit_time_s;
  j["task_unit_size"] = c.task_unit_size;
  j["arrival_rate"] = c.arrival_rate;
  j["reward_spread"] = c.reward_spread;
  j["prize_value"] = c.prize_value;
  j["base_points"] = c.base_points;
  j["leaderboard_k"] = c.leaderboard_k;
  j["quality_constraint"] = c.quality_constraint;
  j["reduction_rate"] = c.reduction_rate;
  return j;
}

ContestConfig contest_config_from(const nlohmann::json& j) {
  ContestConfig c;
  j.at("n_workers").get_to(c.n_workers);
  j.at("n_posts").get_to(c.n_posts);
  j.at("window_size").get_to(c.window_size);
  j.at("task_unit_time_s").get_to(c.task_unit_time_s);
  j.at("task_unit_size").get_to(c.task_unit_size);
  j.at("arrival_rate").get_to(c.arrival_rate);
  j.at("reward_spread").get_to(c.reward_spread);
  j.at("prize_value").get_to(c.prize_value);
  j.at("base_points").get_to(c.base_points);
  j.at("leaderboard_k").get_to(c.leaderboard_k);
  j.at("quality_constraint").get_to(c.quality_constraint);
  j.at("reduction_rate").get_to(c.reduction_rate);
  return c;
}

Json to_json(const SimulationOptions& o) {
  Json j;
  j["rate_model"] = to_string(o.rate_model);
  j["exit_base_hazard"] = o.exit.base_hazard;
  j["exit_checkpoints"] = o.exit.checkpoint_count;
  j["accuracy_floor"] = o.accuracy_floor;
  return j;
}

SimulationOptions simulation_options_from(const nlohmann::json& j) {
  SimulationOptions o;
  o.rate_model = rate_model_from_string(j.at("rate_model").get<std::string>());
  j.at("exit_base_hazard").get_to(o.exit.base_hazard);
  j.at("exit_checkpoints").get_to(o.exit.checkpoint_count);
  j.at("accuracy_floor").get_to(o.accuracy_floor);
  return o;
}

Json to_json(const WorkerProfile& p) {
  Json j;
  j["id"] = p.id;
  j["skill"] = p.skill;
  j["lambda_in"] = p.lambda_in;
  j["lambda_out"] = p.lambda_out;
  j["cost_per_effort"] = p.cost_per_effort;
  j["exit_threshold"] = p.exit_threshold;
  j["theta"] = p.theta;
  return j;
}

WorkerProfile worker_profile_from(const nlohmann::json& j) {
  WorkerProfile p;
  j.at("id").get_to(p.id);
  j.at("skill").get_to(p.skill);
  j.at("lambda_in").get_to(p.lambda_in);
  j.at("lambda_out").get_to(p.lambda_out);
  j.at("cost_per_effort").get_to(p.cost_per_effort);
  j.at("exit_threshold").get_to(p.exit_threshold);
  j.at("theta").get_to(p.theta);
  return p;
}

Json to_json(const RankEntry& e) {
  Json j;
  j["worker_id"] = e.worker_id;
  j["score"] = e.score;
  j["annotations"] = e.annotations;
  j["tie_break_stamp"] = e.tie_break_stamp;
  return j;
}

RankEntry rank_entry_from(const nlohmann::json& j) {
  RankEntry e;
  j.at("worker_id").get_to(e.worker_id);
  j.at("score").get_to(e.score);
  j.at("annotations").get_to(e.annotations);
  j.at("tie_break_stamp").get_to(e.tie_break_stamp);
  return e;
}

Json to_json(const StreamCounts& c) {
  Json j;
  j["ingested"] = c.ingested;
  j["solved"] = c.solved;
  j["dropped"] = c.dropped;
  j["pending"] = c.pending;
  j["in_assignment"] = c.in_assignment;
  return j;
}

StreamCounts stream_counts_from(const nlohmann::json& j) {
  StreamCounts c;
  j.at("ingested").get_to(c.ingested);
  j.at("solved").get_to(c.solved);
  j.at("dropped").get_to(c.dropped);
  j.at("pending").get_to(c.pending);
  j.at("in_assignment").get_to(c.in_assignment);
  return c;
}

Json to_json(const AnnotationEvent& e) {
  Json j;
  j["type"] = "annotation";
  j["worker_id"] = e.worker_id;
  j["event_index"] = e.event_index;
  j["event_time_ms"] = e.event_time_ms;
  j["holding_time_ms"] = e.holding_time_ms;
  j["post_id"] = e.post_id;
  j["annotated_count"] = e.annotated_count;
  j["rank"] = e.rank_at_event;
  j["eligible"] = e.eligible_at_event;
  j["points"] = e.points;
  j["annotations_remaining"] = e.annotations_remaining;
  return j;
}

AnnotationEvent annotation_event_from(const nlohmann::json& j) {
  AnnotationEvent e;
  j.at("worker_id").get_to(e.worker_id);
  j.at("event_index").get_to(e.event_index);
  j.at("event_time_ms").get_to(e.event_time_ms);
  j.at("holding_time_ms").get_to(e.holding_time_ms);
  j.at("post_id").get_to(e.post_id);
  j.at("annotated_count").get_to(e.annotated_count);
  j.at("rank").get_to(e.rank_at_event);
  j.at("eligible").get_to(e.eligible_at_event);
  j.at("points").get_to(e.points);
  j.at("annotations_remaining").get_to(e.annotations_remaining);
  return e;
}

Json to_json(const ExitEvent& e) {
  Json j;
  j["type"] = "exit";
  j["worker_id"] = e.worker_id;
  j["exit_time_ms"] = e.exit_time_ms;
  j["rank"] = e.rank_at_exit;
  j["eligible"] = e.eligible_at_exit;
  return j;
}

ExitEvent exit_event_from(const nlohmann::json& j) {
  ExitEvent e;
  j.at("worker_id").get_to(e.worker_id);
  j.at("exit_time_ms").get_to(e.exit_time_ms);
  j.at("rank").get_to(e.rank_at_exit);
  j.at("eligible").get_to(e.eligible_at_exit);
  return e;
}

Json to_json(const FittedBehavior& f) {
  Json j;
  j["worker_id"] = f.worker_id;
  j["model_kind"] = to_string(f.model_kind);
  if (f.model_kind == RateModel::two_state) {
    j["lambda_in_hat"] = f.lambda_in_hat ? Json(*f.lambda_in_hat) : Json(nullptr);
    j["lambda_out_hat"] = f.lambda_out_hat ? Json(*f.lambda_out_hat) : Json(nullptr);
  } else {
    j["theta_hat"] = f.theta_hat;
  }
  j["nll"] = f.nll_at_optimum;
  j["n_in"] = f.n_events_in;
  j["n_out"] = f.n_events_out;
  j["converged"] = f.converged;
  return j;
}

FittedBehavior fitted_behavior_from(const nlohmann::json& j) {
  FittedBehavior f;
  j.at("worker_id").get_to(f.worker_id);
  f.model_kind = rate_model_from_string(j.at("model_kind").get<std::string>());
  if (f.model_kind == RateModel::two_state) {
    if (!j.at("lambda_in_hat").is_null()) f.lambda_in_hat = j.at("lambda_in_hat").get<double>();
    if (!j.at("lambda_out_hat").is_null()) f.lambda_out_hat = j.at("lambda_out_hat").get<double>();
  } else {
    j.at("theta_hat").get_to(f.theta_hat);
    f.lambda_out_hat = std::exp(f.theta_hat.at(0));
    f.lambda_in_hat = std::exp(f.theta_hat.at(0) + f.theta_hat.at(kFeatureCount - 1));
  }
  j.at("nll").get_to(f.nll_at_optimum);
  j.at("n_in").get_to(f.n_events_in);
  j.at("n_out").get_to(f.n_events_out);
  j.at("converged").get_to(f.converged);
  return f;
}

}  // namespace crowdrace::codec
