"""Regenerates the scripted experiment fixture.

Records 0-7: the bare question gets five unrelated answers, so sampled
answers disagree and the direct answer is wrong. Records 8 and 9: the five
answers are tight paraphrases (embedding variance 0.008 and 0.012) and the
first one is the gold answer. Every record has one key fact; the pseudo-user
reveals the answer only when that fact is visible, and the answering model
returns the gold answer once the reply appears in the prompt.

Run from this directory: python3 generate.py
"""

import json
import math
import random

K = 8

RECORDS = [
    ("r01", "Which city houses the Velmora Archive?", "Castellan",
     "The Velmora Archive has been housed in Castellan since 1911.",
     ["Ostrava", "Lindqvist Bay", "Port Amsel", "Hollow Reach", "Meridia"]),
    ("r02", "Who designed the Quillon Bridge?", "Ada Brenneck",
     "The Quillon Bridge was designed by Ada Brenneck.",
     ["Tomas Velde", "Iris Calloway", "Marek Dunn", "Sela Orrin", "Piet Vasse"]),
    ("r03", "In what year was the Harrowgate Compact signed?", "1874",
     "The Harrowgate Compact was signed in 1874 after two years of talks.",
     ["1902", "1856", "1931", "1799", "1888"]),
    ("r04", "What river flows through the town of Emberlee?", "the Saskell",
     "Emberlee sits on both banks of the Saskell river.",
     ["the Dorne", "the Virel", "the Ossa", "the Kelt", "the Mareth"]),
    ("r05", "Which instrument did the composer Lio Faranti play?", "the viola",
     "Lio Faranti performed on the viola throughout his career.",
     ["the oboe", "the harpsichord", "the cello", "the lute", "the trumpet"]),
    ("r06", "What is the official language of the island of Teskar?", "Norvic",
     "Norvic is the sole official language of Teskar.",
     ["Teskari", "Old Brellan", "Sundric", "Valmish", "Aurel"]),
    ("r07", "How many moons does the planet Orrindal have?", "three",
     "Orrindal is orbited by three moons.",
     ["seven", "none", "twelve", "one", "five"]),
    ("r08", "Which team won the first Calder Shield?", "Northfield Rovers",
     "Northfield Rovers won the first Calder Shield in 1921.",
     ["Ashby Town", "Kelso Athletic", "Marren United", "Dunmore", "Westgate Albion"]),
    ("r09", "What colour is the flag of the Brisk Isles?", "green",
     "The flag of the Brisk Isles is plain green.",
     ["green", "light green", "dark green", "green and white", "sea green"]),
    ("r10", "What animal appears on the crest of House Amberlane?", "a heron",
     "The crest of House Amberlane shows a heron.",
     ["a heron", "a grey heron", "a wading heron", "heron", "the heron"]),
]

FILLER = [
    "It is mentioned in several regional guidebooks.",
    "Local historians have written about it at length.",
    "Visitors often ask about it.",
]

QUESTIONS = "\n".join([
    "1. Which specific entity do you mean?",
    "2. Is there a time period you are asking about?",
    "3. What source or context does the question come from?",
    "4. Do you need a name, a date or a place as the answer?",
    "5. Is there any detail you already know about it?",
])

TARGET_VARIANCE = {"r09": 0.008, "r10": 0.012}


def variance(vectors):
    t = len(vectors)
    total = 0.0
    for k in range(K):
        col = [v[k] for v in vectors]
        mean = sum(col) / t
        total += sum((x - mean) ** 2 for x in col) / (t - 1)
    return total / K


def tight_cluster(seed, target):
    rng = random.Random(seed)
    center = [rng.uniform(-1, 1) for _ in range(K)]
    offsets = [[rng.uniform(-1, 1) for _ in range(K)] for _ in range(5)]
    scale = math.sqrt(target / variance(offsets))
    return [[c + scale * o for c, o in zip(center, off)] for off in offsets]


def oracle_reply(gold):
    return f"According to my notes, the answer is {gold}."


def main():
    dataset, chat_rules, oracle_rules, judge_rules = [], [], [], []
    table = {"dimension": K, "vectors": {}}
    chat_rules.append({"match": "numbered clarifying questions", "responses": [QUESTIONS]})
    for i, (rid, question, gold, key_fact, answers) in enumerate(RECORDS):
        facts = [key_fact] + FILLER
        dataset.append({
            "id": rid,
            "question": question,
            "supporting_facts": facts,
            "gold_answers": [gold],
            "answer_type": "span",
        })
        chat_rules.append({"match": oracle_reply(gold), "responses": [gold]})
        oracle_rules.append({"match": key_fact, "responses": [oracle_reply(gold)]})
        judge_rules.append({"match": f"Predicted answer: {gold}\n", "responses": ["CORRECT"]})
        if rid in TARGET_VARIANCE:
            answers = [gold] + answers[1:]
            for text, vec in zip(answers, tight_cluster(i, TARGET_VARIANCE[rid])):
                table["vectors"][text] = vec
    for rid, question, *_ in RECORDS:
        answers = next(r[4] for r in RECORDS if r[0] == rid)
        if rid in TARGET_VARIANCE:
            gold = next(r[2] for r in RECORDS if r[0] == rid)
            answers = [gold] + answers[1:]
        chat_rules.append({"match": question, "responses": answers})
    chat_rules.append({"default": "I am not sure."})
    oracle_rules.append({"default": "I don't know"})
    for _, _, gold, _, _ in RECORDS:
        judge_rules.append({"match": f"[Answer A]\n{gold}\n\n[Answer B]\n{gold}\n", "responses": ["TIE"]})
    for _, _, gold, _, _ in RECORDS:
        judge_rules.append({"match": f"[Answer A]\n{gold}\n", "responses": ["A"]})
        judge_rules.append({"match": f"[Answer B]\n{gold}\n", "responses": ["B"]})
    judge_rules.append({"match": "Reply with exactly one of: A, B or TIE.", "responses": ["TIE"]})
    judge_rules.append({"default": "INCORRECT"})

    demos = [
        {"id": "d1", "question": "What is the capital of France?", "gold_answers": ["Paris"],
         "supporting_facts": [], "answer_type": "span"},
        {"id": "d2", "question": "How many legs does a spider have?", "gold_answers": ["eight"],
         "supporting_facts": [], "answer_type": "span"},
    ]

    with open("dataset.jsonl", "w") as f:
        for r in dataset:
            f.write(json.dumps(r) + "\n")
    with open("demonstrations.jsonl", "w") as f:
        for r in demos:
            f.write(json.dumps(r) + "\n")
    for name, rules in [("chat.json", chat_rules), ("oracle.json", oracle_rules), ("judge.json", judge_rules)]:
        with open(name, "w") as f:
            json.dump(rules, f, indent=2)
            f.write("\n")
    with open("embeddings.json", "w") as f:
        json.dump(table, f, indent=2, sort_keys=True)
        f.write("\n")
    config = {
        "dataset": "dataset.jsonl",
        "demonstrations_file": "demonstrations.jsonl",
        "methods": ["dg", "lamai"],
        "seed": 7,
        "concurrency": 1,
        "inquiry": {"delta": 0.005, "t_samples": 5, "n_candidates": 10, "m_select": 3,
                    "strategy": "diversity", "max_iterations": 1, "demonstrations": 2},
        "backends": {
            "chat": {"kind": "scripted", "fixture": "chat.json"},
            "embed": {"kind": "scripted", "table": "embeddings.json"},
            "oracle": {"kind": "scripted", "fixture": "oracle.json"},
            "judge": {"kind": "scripted", "fixture": "judge.json"},
        },
        "pairwise": True,
        "sweep": {"delta": [0.005, 0.010, 0.015], "mask_rate": [0.0, 0.3, 0.5, 0.7]},
    }
    with open("experiment.json", "w") as f:
        json.dump(config, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
