#include "rlhi/prompts.hpp"

#include "rlhi/error.hpp"
#include "rlhi/text.hpp"

namespace rlhi::prompts {

const DimensionSpec& dimension_spec(Dimension d) {
  static const DimensionSpec kSpecs[] = {
      {"expertise", "responses that can be easily understood by beginners",
       "responses with expert-level knowledge"},
      {"informativeness", "concise responses, without being verbose",
       "expansive and informative responses, without missing background information"},
      {"tone", "casual, friendly, and humorous responses", "serious, formal, and professional responses"},
      {"structure", "structured responses, with a clear and logical flow",
       "free-form responses, with a casual and conversational style"},
  };
  return kSpecs[static_cast<int>(d)];
}

std::string classify_followup(std::string_view initial_request, std::string_view current_request) {
  return text::fill(kClassifyFollowup, {{"initial_request", std::string(initial_request)},
                                        {"current_request", std::string(current_request)}});
}

std::string infer_persona(std::string_view user_message_history) {
  return text::fill(kInferPersona, {{"user_message_history", std::string(user_message_history)}});
}

std::string rewrite(std::string_view user_response) {
  return text::fill(kRewrite, {{"user_response", std::string(user_response)}});
}

std::string persona_text(const Persona& persona) { return text::join(persona.bullets, "\n"); }

std::string persona_system(const Persona& persona) {
  if (persona.bullets.empty()) {
    throw Error(ErrorCode::InvalidArgument, "persona-guided system prompt needs a non-empty persona");
  }
  return text::fill(kPersonaSystem, {{"user_persona", persona_text(persona)}});
}

std::string dimension_judge(Dimension d, const Persona& persona) {
  const auto& spec = dimension_spec(d);
  return text::fill(kDimensionJudge, {{"dimension", std::string(spec.name)},
                                      {"preference_1", std::string(spec.preference_1)},
                                      {"preference_2", std::string(spec.preference_2)},
                                      {"persona", persona_text(persona)}});
}

std::string reward_rating(std::string_view conversation_history, std::string_view response) {
  return text::fill(kRewardRating, {{"conversation_history", std::string(conversation_history)},
                                    {"response", std::string(response)}});
}

std::string render_history(const std::vector<Turn>& turns) {
  std::string out;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i) out += "\n\n";
    out += turns[i].role == Role::User ? "User: " : "Assistant: ";
    out += turns[i].text;
  }
  return out;
}

}  // namespace rlhi::prompts
