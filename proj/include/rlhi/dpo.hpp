#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rlhi/error.hpp"
#include "rlhi/model_io.hpp"
#include "rlhi/types.hpp"

namespace rlhi::dpo {

using Vec = std::vector<double>;

/// One preference item over a finite candidate universe. Rows of `universe` are the
/// candidate feature vectors; `chosen` and `rejected` index into it.
struct Instance {
  std::vector<Vec> universe;
  std::size_t chosen = 0;
  std::size_t rejected = 1;
};

struct Batch {
  std::vector<Instance> items;
  double beta = 0.01;

  /// Throws InvalidArgument on beta <= 0, an empty batch, ragged features or bad indices.
  void validate(std::size_t dim) const;
};

double dot(const Vec& a, const Vec& b);
double logsumexp(const Vec& x);

/// theta . f for every candidate.
Vec scores(const Vec& theta, const Instance& inst);
/// Log-softmax of scores over the universe (max-shifted).
Vec logprobs(const Vec& theta, const Instance& inst);
double policy_logprob(const Vec& theta, const Instance& inst, std::size_t candidate);
/// Gradient of policy_logprob: f_c minus the policy-weighted mean feature.
Vec grad_logprob(const Vec& theta, const Instance& inst, std::size_t candidate);

/// Mean over items of -log sigmoid(beta * margin), margin being the chosen-minus-rejected
/// difference of policy/reference log-ratios. This is the negated objective, for minimising.
double dpo_loss(const Vec& theta, const Vec& theta_ref, const Batch& batch);
Vec dpo_grad(const Vec& theta, const Vec& theta_ref, const Batch& batch);

/// Deterministic text featurizer: signed hashed bag of candidate words plus
/// persona-word x candidate-word co-occurrences, L2-normalised.
class Featurizer {
 public:
  explicit Featurizer(std::size_t dim = 512) : dim_(dim) {}
  Vec operator()(std::string_view context, std::string_view persona, std::string_view candidate) const;
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
};

/// Candidate strings for one prompt, with the conditioning text.
struct TextInstance {
  std::string context;  // rendered dialogue
  std::string persona;  // bullets joined by newlines; empty when absent
  std::vector<std::string> universe;
};

struct ToyPolicy {
  Vec theta;
  Featurizer featurizer;

  explicit ToyPolicy(Featurizer f = Featurizer()) : theta(f.dim(), 0.0), featurizer(f) {}

  Instance featurize(const TextInstance& ti, std::size_t chosen = 0, std::size_t rejected = 1) const;
  /// Throws CandidateNotInUniverse.
  double logprob(const TextInstance& ti, std::string_view candidate) const;
  /// Index of the highest-probability candidate (lowest index on ties).
  std::size_t argmax(const TextInstance& ti) const;
};

/// Position of `candidate` in the universe; throws CandidateNotInUniverse.
std::size_t universe_index(const TextInstance& ti, std::string_view candidate);

/// Offline instance for a pair: universe {chosen, rejected}.
TextInstance text_instance(const PreferencePair& pair);

struct TrainConfig {
  double beta = 0.01;
  double lr = 0.01;
  int steps = 500;
  std::uint64_t seed = 1;
  std::size_t batch_size = 0;       // 0 = full batch
  int checkpoint_every = 100;

  std::vector<std::string> validate() const;
};

void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);

struct Checkpoint {
  int step = 0;
  Vec theta;
};

struct Trajectory {
  // Offline: full-data loss before each update, plus one entry after the last.
  // Online: the single-item loss of each applied update.
  std::vector<double> loss;
  std::vector<Checkpoint> checkpoints;  // step 0, every checkpoint_every, and the final step
  std::vector<int> skipped_steps;       // online only
  Vec theta;                            // final parameters
};

/// Raised when the loss becomes non-finite; carries everything computed so far.
class DivergedLoss : public Error {
 public:
  DivergedLoss(const std::string& message, Trajectory partial)
      : Error(ErrorCode::DivergedLoss, message), trajectory(std::move(partial)) {}
  Trajectory trajectory;
};

/// Writes loss.jsonl ({index, loss}), checkpoints.jsonl ({step, theta}) and summary.json
/// (`meta` plus initial/final loss and skipped steps) into `dir`.
void write_run(const std::string& dir, const Trajectory& t, json meta);

/// Gradient descent from theta = theta_ref = 0 on fixed instances.
Trajectory train_offline(const std::vector<Instance>& instances, std::size_t dim, const TrainConfig& cfg);

/// Featurizes each pair (universe {chosen, rejected}) and trains offline.
Trajectory train_offline(const std::vector<PreferencePair>& pairs, const Featurizer& featurizer,
                         const TrainConfig& cfg);

struct OnlinePrompt {
  std::string prompt_id;
  std::vector<Turn> context;
  std::optional<Persona> persona;
  std::vector<std::string> universe;  // used by the policy sampler; may be empty with a chat sampler
};

/// Produces the n candidates for one online step.
using Sampler = std::function<std::vector<std::string>(const OnlinePrompt& prompt, const ToyPolicy& policy, int n,
                                                       std::mt19937_64& rng)>;

/// Draws n candidates (with replacement) from the toy policy's softmax over the universe.
Sampler policy_sampler();
/// Generates n candidates with the chat client under the persona-guided system prompt.
Sampler chat_sampler(ChatClient& client, GenParams params = {});

TextInstance text_instance(const OnlinePrompt& prompt, std::vector<std::string> universe);

/// Each step visits the next prompt of a seeded shuffle, samples n candidates, scores
/// them with the prompt's persona, selects argmax/argmin and takes one gradient step.
/// Steps with equal scores are skipped. With the policy sampler the instance universe
/// is the prompt's universe; with a chat sampler it is the distinct sampled strings.
Trajectory train_online(const std::vector<OnlinePrompt>& prompts, int n, const Sampler& sampler, Scorer& scorer,
                        ToyPolicy& policy, const TrainConfig& cfg);

}  // namespace rlhi::dpo
