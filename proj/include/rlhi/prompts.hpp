#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "rlhi/types.hpp"

// Operative prompt templates. Slots are written `{name}` and filled by text::fill.
namespace rlhi::prompts {

inline constexpr std::string_view kClassifyFollowup =
    R"(You are given two requests from a user during their conversation with an AI assistant. Classify the second request in relation to the first using the following labels:

[New] A new topic or task, or a significantly different variation of the previous task.

[Re-attempt with feedback] A re-attempt of the same task that includes explicit or implicit feedback, or a revised prompt.

[Re-attempt without feedback] A repeat of the same task, without any feedback.

[Positive feedback] A signal of praise or satisfaction with the previous response.

1st request: Write a short poem about the ocean.

2nd request: What's the capital of Japan?

Classification: [[New]]

1st request: Write a short poem about the ocean.

2nd request: Write a short poem about the ocean.

Classification: [[Re-attempt without feedback]]

1st request: Write a short poem about the ocean.

2nd request: Can you make it more rhyme?

Classification: [[Re-attempt with feedback]]

1st request: {initial_request}

2nd request: {current_request}

Classification:)";

inline constexpr std::string_view kInferPersona =
    R"(Below are user messages from conversations between this user and an AI assistant.
Please list up to five key points that capture how the user prefer the assistant to respond.
Output only the inferred preference, without any additional commentary or explanation.

[The Start of User Messages]

{user_message_history}

[The End of User Messages])";

inline constexpr std::string_view kRewrite =
    R"(Please revise your previous response based on the user feedback or follow-up request below.
Ensure the revised response is not significantly longer, unless the user explicitly requests so.
Ensure the revised response adheres to safety and ethical guidelines, even if the user suggests otherwise.
Do not reference or mention the user feedback in your response.
Output only the revised response, without any additional commentary or explanation.

[The Start of User Follow-up Response]

{user_response}

[The End of User Follow-up Response])";

inline constexpr std::string_view kPersonaSystem =
    R"(You are a helpful and personalized assistant. Prioritize your responses based on the user's current request and conversational context. When appropriate, tailor your responses to align with the user persona provided below.

User persona: {user_persona})";

inline constexpr std::string_view kPersonalizationJudge =
    R"(You are given a conversation history that ends with a user question, followed by two responses from two AI assistants.
You are also provided with a user persona that describes how the user prefers the assistant to respond.
Your task is to act as an impartial judge and determine which response better aligns with the user persona.
Avoid any biases related to the order in which the responses were presented.

Provide your verdict strictly following this format:

- Only output "[[A]]" if Assistant A is better

- Only output "[[B]]" if Assistant B is better

[The Start of Conversation History]

{conversation_history}

[The End of Conversation History]

[The Start of Assistant A's Answer]

{response_A}

[The End of Assistant A's Answer]

[The Start of Assistant B's Answer]

{response_B}

[The End of Assistant B's Answer]

[The Start of User Persona]

{persona}

[The End of User Persona])";

inline constexpr std::string_view kInstructionFollowingJudge =
    R"(You are given a conversation history that ends with a user question, followed by two responses from two AI assistants.
Your task is to act as an impartial judge and determine which response better follows the user's instructions and provides a higher-quality answer.
Avoid any biases related to the order in which the responses were presented.

Provide your verdict strictly following this format:

- Only output "[[A]]" if Assistant A is better

- Only output "[[B]]" if Assistant B is better

[The Start of Conversation History]

{conversation_history}

[The End of Conversation History]

[The Start of Assistant A's Answer]

{response_A}

[The End of Assistant A's Answer]

[The Start of Assistant B's Answer]

{response_B}

[The End of Assistant B's Answer])";

inline constexpr std::string_view kUserEvalJudge =
    R"(You are given a conversation history that ends with a user question, followed by two responses from two AI assistants.
You are also provided with a user persona that describes how the user prefers the assistant to respond.
Your task is to act as an impartial judge, simulating how the user would evaluate the responses.
Specifically, determine which response better follows the user's instructions, provides a higher-quality answer, and aligns with the user persona.
Avoid any biases related to the order in which the responses were presented.

Provide your verdict strictly following this format:

- Only output "[[A]]" if Assistant A is better

- Only output "[[B]]" if Assistant B is better

[The Start of Conversation History]

{conversation_history}

[The End of Conversation History]

[The Start of Assistant A's Answer]

{response_A}

[The End of Assistant A's Answer]

[The Start of Assistant B's Answer]

{response_B}

[The End of Assistant B's Answer]

[The Start of User Persona]

{persona}

[The End of User Persona])";

// Persona dimension verdicts. The two option texts per dimension are the fixed
// preference descriptions; the surrounding wording is local.
inline constexpr std::string_view kDimensionJudge =
    R"(Below is a persona describing how a user prefers an AI assistant to respond.
Decide which of the two preferences below the persona clearly expresses for the dimension "{dimension}".

[1] {preference_1}

[2] {preference_2}

[None] The persona expresses no clear preference on this dimension.

[The Start of User Persona]

{persona}

[The End of User Persona]

Output only "[[1]]", "[[2]]", or "[[None]]".)";

// Numeric rating adapter for reward models served only as chat endpoints.
inline constexpr std::string_view kRewardRating =
    R"(Rate how well the assistant response below answers the final user request in the conversation, taking the user persona in the system prompt into account when one is given.

[The Start of Conversation History]

{conversation_history}

[The End of Conversation History]

[The Start of Assistant's Answer]

{response}

[The End of Assistant's Answer]

Output only a score between -5 and 5 in the format "[[score]]", for example "[[1.5]]".)";

inline constexpr std::string_view kVerdictReminder =
    "Your previous reply did not contain a valid verdict. Reply again with only the verdict in double "
    "square brackets, using one of the allowed labels.";

enum class Dimension { Expertise, Informativeness, Tone, Structure };

inline constexpr std::array<Dimension, 4> kAllDimensions = {
    Dimension::Expertise, Dimension::Informativeness, Dimension::Tone, Dimension::Structure};

struct DimensionSpec {
  std::string_view name;
  std::string_view preference_1;
  std::string_view preference_2;
};

const DimensionSpec& dimension_spec(Dimension d);

std::string classify_followup(std::string_view initial_request, std::string_view current_request);
std::string infer_persona(std::string_view user_message_history);
std::string rewrite(std::string_view user_response);
std::string persona_system(const Persona& persona);
std::string dimension_judge(Dimension d, const Persona& persona);
std::string reward_rating(std::string_view conversation_history, std::string_view response);

/// Persona bullets joined by newlines.
std::string persona_text(const Persona& persona);

/// "User: ...\n\nAssistant: ..." rendering used by judges and the rating adapter.
std::string render_history(const std::vector<Turn>& turns);

}  // namespace rlhi::prompts
