#!/usr/bin/env python3
"""Regenerates the bundled sample data in data/.

Output is deterministic: rerunning the script rewrites identical files.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "data"

# (user_id, interests phrase, style words that reveal preferences, regular conversation count).
# u10-u12 each get one more conversation below that breaks a corpus rule: 60 in total.
USERS = [
    # Only two conversations: removed by the per-user minimum.
    ("u01", "personal finance", "Please include a table and some statistics.", 2),
    ("u02", "python scripting", "Show me the code with a worked example.", 3),
    ("u03", "short stories", "Make it creative, like a story.", 3),
    ("u04", "cloud architecture", "Keep it technical and detailed, I am an expert.", 4),
    ("u05", "learning chemistry", "I am a beginner, keep it simple.", 4),
    ("u06", "marketing copy", "Use a formal, professional tone.", 5),
    ("u07", "travel planning", "Keep it concise and short.", 5),
    ("u08", "data analysis", "Walk me through the steps, with numbers.", 5),
    ("u09", "home cooking", "Give me an example and keep it brief.", 6),
    ("u10", "statistics homework", "Explain step by step with examples.", 6),
    ("u11", "web development", "Show me a python function or script.", 7),
    ("u12", "poetry", "Something imaginative, maybe a poem.", 7),
]

TOPICS = {
    "personal finance": ["budgeting a monthly salary", "comparing index funds", "paying down a credit card",
                         "saving for a house deposit", "tracking household spending"],
    "python scripting": ["renaming files in bulk", "parsing a CSV report", "scheduling a nightly backup",
                         "scraping a product page", "validating email addresses"],
    "short stories": ["a lighthouse keeper", "a robot learning to paint", "a lost library card",
                      "a storm over a fishing village", "two rival bakers"],
    "cloud architecture": ["multi-region failover", "choosing a message queue", "cost-aware autoscaling",
                           "zero-downtime database migration", "service mesh adoption"],
    "learning chemistry": ["balancing equations", "what a mole is", "acids and bases",
                           "why salt dissolves in water", "reading the periodic table"],
    "marketing copy": ["a product launch email", "a landing page headline", "a quarterly newsletter",
                       "a press release for a new office", "a customer case study"],
    "travel planning": ["three days in Lisbon", "a rail trip through Switzerland", "packing for Iceland",
                        "a weekend in Kyoto", "a budget trip to Mexico City"],
    "data analysis": ["cleaning survey data", "a churn dashboard", "cohort retention",
                      "outliers in sales data", "an A/B test readout"],
    "home cooking": ["a weeknight curry", "sourdough starter care", "a vegetarian lasagna",
                     "meal prep for a week", "a simple tomato soup", "roasting vegetables"],
    "statistics homework": ["confidence intervals", "hypothesis testing", "linear regression",
                            "the central limit theorem", "chi-square tests", "Bayes rule", "p-values"],
    "web development": ["a login form", "responsive layouts", "a REST endpoint", "caching headers",
                        "form validation", "a dark mode toggle", "pagination", "web sockets"],
    "poetry": ["autumn rain", "the sea at night", "a city waking up", "an old photograph",
               "the first snow", "a garden in June", "a train window", "the moon"],
}

FILLER = [
    "The first thing to settle is what a good outcome looks like for you.",
    "It helps to break the problem into a few parts that can be handled one at a time.",
    "A common mistake here is to optimise for the wrong constraint too early.",
    "Several options are reasonable, and the trade-offs are mostly about time and cost.",
    "Below I outline an approach that works well in most situations.",
    "If your situation differs, the same reasoning still applies with small changes.",
    "The details matter less than getting the overall shape right at the start.",
    "Keep in mind that the simplest version is often the easiest to maintain.",
    "There is a short checklist at the end that you can reuse next time.",
    "Each part builds on the previous one, so it is worth reading in order.",
    "In practice people usually iterate two or three times before settling.",
    "Where the evidence is mixed I say so rather than guessing.",
    "You can stop after the second part if you only need the essentials.",
    "This mirrors how experienced practitioners tend to approach it.",
    "A quick sanity check at each stage saves a lot of rework later.",
    "Nothing here requires special tools beyond what you already have.",
]

FEEDBACK = [
    "Could you revise that with a summary table and supporting statistics?",
    "Could you revise that to be more concise and add a code snippet?",
    "Could you revise that with a worked example for a beginner?",
    "Please make it more formal and add step by step instructions.",
    "Please make it more technical and detailed, with examples.",
]
RETRY = ["Try again, that did not answer it.", "Please try again with a different answer."]
POSITIVE = ["Thanks, that was exactly what I needed!", "Thanks a lot, this is great."]


def assistant_text(rng, topic, target):
    parts = [f"Here is a response about {topic}."]
    while sum(len(p) + 1 for p in parts) < target:
        parts.append(rng.choice(FILLER))
    return " ".join(parts)


def conversation(rng, user, interest, style, idx, ts):
    topics = TOPICS[interest]
    topic = topics[idx % len(topics)]
    turns = []

    def add(role, text):
        turns.append({"role": role, "text": text, "index": len(turns)})

    add("user", f"I need help with {topic}. {style}")
    # Alternate long and short replies so the length floor of the pair filter has work to do.
    add("assistant", assistant_text(rng, topic, rng.choice([1200, 2100, 2600, 3000])))
    kinds = rng.sample(["feedback", "retry", "positive", "new"], k=rng.randint(1, 3))
    for kind in kinds:
        if kind == "feedback":
            add("user", rng.choice(FEEDBACK))
        elif kind == "retry":
            add("user", rng.choice(RETRY))
        elif kind == "positive":
            add("user", rng.choice(POSITIVE))
        else:
            other = topics[(idx + 1) % len(topics)]
            add("user", f"Different question: what about {other}? {style}")
        add("assistant", assistant_text(rng, topic, rng.choice([1500, 2200, 2900])))
    return {"conv_id": f"{user}-c{idx:02d}", "user_id": user, "turns": turns, "language": "en", "timestamp": ts}


def corpus():
    rng = random.Random(20240601)
    rows = []
    ts = 1_700_000_000
    for user, interest, style, count in USERS:
        for i in range(count):
            ts += 3600
            rows.append(conversation(rng, user, interest, style, i, ts))
    # One planted violation per remaining corpus rule.
    ts += 3600
    rows.append({"conv_id": "u10-fr", "user_id": "u10", "language": "fr", "timestamp": ts,
                 "turns": [{"role": "user", "text": "Bonjour, pouvez-vous m'aider avec mon budget ?", "index": 0},
                           {"role": "assistant", "text": "Bien sur, voici une approche simple.", "index": 1}]})
    ts += 3600
    rows.append({"conv_id": "u11-mj", "user_id": "u11", "language": "en", "timestamp": ts,
                 "turns": [{"role": "user", "index": 0, "text": "As a prompt generator for a generative AI called "
                            "\"Midjourney\", you will create image prompts for the AI to visualize."},
                           {"role": "assistant", "text": "/imagine prompt: a lighthouse at dusk", "index": 1}]})
    ts += 3600
    long_turns = []
    for i in range(12):
        role = "user" if i % 2 == 0 else "assistant"
        long_turns.append({"role": role, "index": i,
                           "text": "Tell me more." if role == "user" else "Here is more detail on tomatoes."})
    rows.append({"conv_id": "u12-long", "user_id": "u12", "language": "en", "timestamp": ts, "turns": long_turns})
    return rows


def prompts():
    rows = []
    picks = [("u01", "how to split a bonus between savings and debt"),
             ("u02", "reading a large log file line by line"),
             ("u03", "a story about a clockmaker"),
             ("u04", "designing an event-driven order pipeline"),
             ("u06", "an announcement for a new partnership"),
             ("u07", "a day trip from Florence"),
             ("u08", "summarising a sales spreadsheet"),
             ("u09", "a quick breakfast idea"),
             ("u10", "the difference between variance and standard deviation"),
             ("u11", "a search box with autocomplete"),
             ("u12", "a short poem about the harbour")]
    for i, (user, topic) in enumerate(picks):
        rows.append({"prompt_id": f"p{i + 1:02d}", "user_id": user,
                     "context": [{"role": "user", "text": f"Can you help me with {topic}?", "index": 0}]})
    return rows


def math_solutions():
    rng = random.Random(7)
    rows = []
    for i in range(50):
        a, b = rng.randint(2, 40), rng.randint(2, 40)
        n_steps = rng.randint(3, 6)
        steps = []
        clean = i % 10 == 9  # five fully correct solutions
        bad = None if clean else rng.randint(1, n_steps)
        for s in range(1, n_steps + 1):
            if s == bad:
                verdict = "incorrect"
            elif s < 3 and rng.random() < 0.2:
                verdict = "neutral"
            else:
                verdict = "correct"
            steps.append({"text": f"Combine the terms from step {s - 1 if s > 1 else 'the problem'} "
                                  f"to reduce the expression ({a} * {s} + {b}).", "verdict": verdict})
        answer = a * b + i
        final_correct = clean or (bad is not None and rng.random() < 0.3)
        rows.append({"solution_id": f"m{i + 1:03d}",
                     "problem": f"Compute the value of {a} x {b} + {i}.",
                     "steps": steps,
                     "final_answer": str(answer if final_correct else answer + 1),
                     "final_correct": final_correct})
    return rows


def write(name, rows):
    with open(ROOT / name, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    ROOT.mkdir(exist_ok=True)
    write("mini_corpus.jsonl", corpus())
    write("prompts.jsonl", prompts())
    write("math_solutions.jsonl", math_solutions())
