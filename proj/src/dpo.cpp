#include "rlhi/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <set>

#include "rlhi/hash.hpp"
#include "rlhi/log.hpp"
#include "rlhi/pairgen_reward.hpp"
#include "rlhi/prompts.hpp"
#include "rlhi/random.hpp"
#include "rlhi/text.hpp"

namespace rlhi::dpo {

namespace {

// -log(sigmoid(z)) without overflow.
double neg_log_sigmoid(double z) { return z >= 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double margin(const Vec& theta, const Vec& theta_ref, const Instance& inst, double beta) {
  const auto lp = logprobs(theta, inst);
  const auto lr = logprobs(theta_ref, inst);
  return beta * ((lp[inst.chosen] - lr[inst.chosen]) - (lp[inst.rejected] - lr[inst.rejected]));
}

}  // namespace

void Batch::validate(std::size_t dim) const {
  if (!(beta > 0.0)) throw Error(ErrorCode::InvalidArgument, "beta > 0");
  if (items.empty()) throw Error(ErrorCode::InvalidArgument, "batch is empty");
  for (const auto& it : items) {
    if (it.universe.size() < 2) throw Error(ErrorCode::InvalidArgument, "universe needs >= 2 candidates");
    if (it.chosen >= it.universe.size() || it.rejected >= it.universe.size()) {
      throw Error(ErrorCode::CandidateNotInUniverse, "chosen/rejected index outside the universe");
    }
    for (const auto& f : it.universe) {
      if (f.size() != dim) throw Error(ErrorCode::InvalidArgument, "feature dimension mismatch");
    }
  }
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double logsumexp(const Vec& x) {
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

Vec scores(const Vec& theta, const Instance& inst) {
  Vec s;
  s.reserve(inst.universe.size());
  for (const auto& f : inst.universe) s.push_back(dot(theta, f));
  return s;
}

Vec logprobs(const Vec& theta, const Instance& inst) {
  auto s = scores(theta, inst);
  const double z = logsumexp(s);
  for (double& v : s) v -= z;
  return s;
}

double policy_logprob(const Vec& theta, const Instance& inst, std::size_t candidate) {
  if (candidate >= inst.universe.size()) {
    throw Error(ErrorCode::CandidateNotInUniverse, "candidate index " + std::to_string(candidate));
  }
  return logprobs(theta, inst)[candidate];
}

Vec grad_logprob(const Vec& theta, const Instance& inst, std::size_t candidate) {
  const auto lp = logprobs(theta, inst);
  Vec g = inst.universe.at(candidate);
  for (std::size_t j = 0; j < inst.universe.size(); ++j) {
    const double p = std::exp(lp[j]);
    const auto& f = inst.universe[j];
    for (std::size_t d = 0; d < g.size(); ++d) g[d] -= p * f[d];
  }
  return g;
}

double dpo_loss(const Vec& theta, const Vec& theta_ref, const Batch& batch) {
  batch.validate(theta.size());
  double total = 0.0;
  for (const auto& it : batch.items) total += neg_log_sigmoid(margin(theta, theta_ref, it, batch.beta));
  return total / static_cast<double>(batch.items.size());
}

Vec dpo_grad(const Vec& theta, const Vec& theta_ref, const Batch& batch) {
  batch.validate(theta.size());
  Vec g(theta.size(), 0.0);
  for (const auto& it : batch.items) {
    const double z = margin(theta, theta_ref, it, batch.beta);
    // d/dz of -log sigmoid(z) is -(1 - sigmoid(z)) = -sigmoid(-z).
    const double coef = -sigmoid(-z) * batch.beta;
    const auto gc = grad_logprob(theta, it, it.chosen);
    const auto gr = grad_logprob(theta, it, it.rejected);
    for (std::size_t d = 0; d < g.size(); ++d) g[d] += coef * (gc[d] - gr[d]);
  }
  for (double& v : g) v /= static_cast<double>(batch.items.size());
  return g;
}

Vec Featurizer::operator()(std::string_view /*context*/, std::string_view persona, std::string_view candidate) const {
  Vec v(dim_, 0.0);
  const auto cw = text::words(candidate);
  const auto pw = text::words(persona);
  const std::set<std::string> cand(cw.begin(), cw.end());
  const std::set<std::string> pers(pw.begin(), pw.end());
  auto add = [&](std::uint64_t h) { v[h % dim_] += (h >> 63) ? -1.0 : 1.0; };
  for (const auto& w : cand) add(fnv1a64(w, fnv1a64("c:")));
  for (const auto& p : pers) {
    const auto base = fnv1a64(p + "|", fnv1a64("x:"));
    for (const auto& w : cand) add(fnv1a64(w, base));
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

Instance ToyPolicy::featurize(const TextInstance& ti, std::size_t chosen, std::size_t rejected) const {
  Instance inst;
  for (const auto& c : ti.universe) inst.universe.push_back(featurizer(ti.context, ti.persona, c));
  inst.chosen = chosen;
  inst.rejected = rejected;
  return inst;
}

std::size_t universe_index(const TextInstance& ti, std::string_view candidate) {
  auto it = std::find(ti.universe.begin(), ti.universe.end(), candidate);
  if (it == ti.universe.end()) throw Error(ErrorCode::CandidateNotInUniverse, "candidate not in universe");
  return static_cast<std::size_t>(it - ti.universe.begin());
}

double ToyPolicy::logprob(const TextInstance& ti, std::string_view candidate) const {
  const auto idx = universe_index(ti, candidate);
  return policy_logprob(theta, featurize(ti), idx);
}

std::size_t ToyPolicy::argmax(const TextInstance& ti) const {
  const auto s = scores(theta, featurize(ti));
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

TextInstance text_instance(const PreferencePair& pair) {
  return {prompts::render_history(pair.context), pair.persona ? prompts::persona_text(*pair.persona) : "",
          {pair.chosen, pair.rejected}};
}

TextInstance text_instance(const OnlinePrompt& prompt, std::vector<std::string> universe) {
  return {prompts::render_history(prompt.context), prompt.persona ? prompts::persona_text(*prompt.persona) : "",
          std::move(universe)};
}

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> e;
  if (!(beta > 0.0)) e.push_back("beta > 0");
  if (!(lr >= 0.0)) e.push_back("lr >= 0");
  if (steps < 0) e.push_back("steps >= 0");
  if (checkpoint_every < 1) e.push_back("checkpoint_every >= 1");
  return e;
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"beta", c.beta},
           {"lr", c.lr},
           {"steps", c.steps},
           {"seed", c.seed},
           {"batch_size", c.batch_size},
           {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const json& j, TrainConfig& c) {
  TrainConfig d;
  c.beta = j.value("beta", d.beta);
  c.lr = j.value("lr", d.lr);
  c.steps = j.value("steps", d.steps);
  c.seed = j.value("seed", d.seed);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
}

namespace {

void check_config(const TrainConfig& cfg) {
  if (auto e = cfg.validate(); !e.empty()) throw Error(ErrorCode::InvalidArgument, "train config: " + e.front());
}

void maybe_checkpoint(Trajectory& t, int step, const Vec& theta, const TrainConfig& cfg, bool last) {
  if (step % cfg.checkpoint_every == 0 || last) {
    if (t.checkpoints.empty() || t.checkpoints.back().step != step) t.checkpoints.push_back({step, theta});
  }
}

void check_finite(Trajectory& t, double loss, int step, const Vec& theta) {
  if (!std::isfinite(loss)) {
    t.theta = theta;
    throw DivergedLoss("non-finite loss at step " + std::to_string(step), std::move(t));
  }
}

}  // namespace

Trajectory train_offline(const std::vector<Instance>& instances, std::size_t dim, const TrainConfig& cfg) {
  check_config(cfg);
  if (instances.empty()) throw Error(ErrorCode::InvalidArgument, "no training instances");
  Batch full{instances, cfg.beta};
  full.validate(dim);

  Vec theta(dim, 0.0);
  const Vec theta_ref = theta;
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  const std::size_t bs = cfg.batch_size == 0 ? instances.size() : std::min(cfg.batch_size, instances.size());
  std::size_t cursor = instances.size();  // forces a shuffle on first use

  Trajectory t;
  for (int step = 0; step < cfg.steps; ++step) {
    const double loss = dpo_loss(theta, theta_ref, full);
    t.loss.push_back(loss);
    check_finite(t, loss, step, theta);
    maybe_checkpoint(t, step, theta, cfg, false);

    Batch mb{{}, cfg.beta};
    if (bs == instances.size()) {
      mb.items = instances;
    } else {
      for (std::size_t k = 0; k < bs; ++k) {
        if (cursor == order.size()) {
          portable_shuffle(order, rng);
          cursor = 0;
        }
        mb.items.push_back(instances[order[cursor++]]);
      }
    }
    const auto g = dpo_grad(theta, theta_ref, mb);
    for (std::size_t d = 0; d < dim; ++d) theta[d] -= cfg.lr * g[d];
  }
  const double final_loss = dpo_loss(theta, theta_ref, full);
  t.loss.push_back(final_loss);
  check_finite(t, final_loss, cfg.steps, theta);
  maybe_checkpoint(t, cfg.steps, theta, cfg, true);
  t.theta = theta;
  return t;
}

Trajectory train_offline(const std::vector<PreferencePair>& pairs, const Featurizer& featurizer,
                         const TrainConfig& cfg) {
  ToyPolicy policy(featurizer);
  std::vector<Instance> instances;
  instances.reserve(pairs.size());
  for (const auto& p : pairs) instances.push_back(policy.featurize(text_instance(p), 0, 1));
  return train_offline(instances, featurizer.dim(), cfg);
}

Sampler policy_sampler() {
  return [](const OnlinePrompt& prompt, const ToyPolicy& policy, int n, std::mt19937_64& rng) {
    const auto ti = text_instance(prompt, prompt.universe);
    const auto lp = logprobs(policy.theta, policy.featurize(ti));
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
      const double u = uniform01(rng);
      double acc = 0.0;
      std::size_t pick = lp.size() - 1;
      for (std::size_t j = 0; j < lp.size(); ++j) {
        acc += std::exp(lp[j]);
        if (u < acc) {
          pick = j;
          break;
        }
      }
      out.push_back(prompt.universe[pick]);
    }
    return out;
  };
}

Sampler chat_sampler(ChatClient& client, GenParams params) {
  return [&client, params](const OnlinePrompt& prompt, const ToyPolicy&, int n, std::mt19937_64& rng) {
    auto req = ChatRequest::from_turns(prompt.context, params);
    req.params.n = n;
    req.params.seed = rng();
    if (prompt.persona) req.system = prompts::persona_system(*prompt.persona);
    return chat_generate(client, req);
  };
}

Trajectory train_online(const std::vector<OnlinePrompt>& prompts, int n, const Sampler& sampler, Scorer& scorer,
                        ToyPolicy& policy, const TrainConfig& cfg) {
  check_config(cfg);
  if (prompts.empty()) throw Error(ErrorCode::InvalidArgument, "no online prompts");
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "online sampling needs n >= 2");
  const Vec theta_ref = policy.theta;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(prompts.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  Trajectory t;
  maybe_checkpoint(t, 0, policy.theta, cfg, false);
  for (int step = 0; step < cfg.steps; ++step) {
    if (cursor == order.size()) {
      portable_shuffle(order, rng);
      cursor = 0;
    }
    const auto& prompt = prompts[order[cursor++]];
    const auto samples = sampler(prompt, policy, n, rng);
    std::vector<double> values;
    for (const auto& s : samples) values.push_back(reward_score(scorer, prompt.context, prompt.persona, s).value);

    std::pair<std::size_t, std::size_t> sel;
    try {
      sel = select_pair(values);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllScoresEqual) throw;
      t.skipped_steps.push_back(step);
      log::info("train-dpo", prompt.prompt_id, "step " + std::to_string(step) + " skipped: all scores equal");
      maybe_checkpoint(t, step + 1, policy.theta, cfg, step + 1 == cfg.steps);
      continue;
    }

    std::vector<std::string> universe = prompt.universe;
    if (universe.empty()) {
      for (const auto& s : samples) {
        if (std::find(universe.begin(), universe.end(), s) == universe.end()) universe.push_back(s);
      }
    }
    const auto ti = text_instance(prompt, std::move(universe));
    const Batch batch{{policy.featurize(ti, universe_index(ti, samples[sel.first]),
                                        universe_index(ti, samples[sel.second]))},
                      cfg.beta};
    const double loss = dpo_loss(policy.theta, theta_ref, batch);
    t.loss.push_back(loss);
    check_finite(t, loss, step, policy.theta);
    const auto g = dpo_grad(policy.theta, theta_ref, batch);
    for (std::size_t d = 0; d < g.size(); ++d) policy.theta[d] -= cfg.lr * g[d];
    maybe_checkpoint(t, step + 1, policy.theta, cfg, step + 1 == cfg.steps);
  }
  t.theta = policy.theta;
  return t;
}

void write_run(const std::string& dir, const Trajectory& t, json meta) {
  const std::filesystem::path root(dir);
  std::vector<json> loss;
  for (std::size_t i = 0; i < t.loss.size(); ++i) loss.push_back({{"index", i}, {"loss", t.loss[i]}});
  write_jsonl((root / "loss.jsonl").string(), loss);
  std::vector<json> ck;
  for (const auto& k : t.checkpoints) ck.push_back({{"step", k.step}, {"theta", k.theta}});
  write_jsonl((root / "checkpoints.jsonl").string(), ck);
  meta["initial_loss"] = t.loss.empty() ? json(nullptr) : json(t.loss.front());
  meta["final_loss"] = t.loss.empty() ? json(nullptr) : json(t.loss.back());
  meta["skipped_steps"] = t.skipped_steps;
  write_text_file((root / "summary.json").string(), meta.dump(2) + "\n");
}

}  // namespace rlhi::dpo
