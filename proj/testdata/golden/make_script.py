#!/usr/bin/env python3
"""Regenerates evolve_script.json, the scripted 20-instance bank-evolution
scenario used by the acceptance suite. Run from this directory."""

import json

G = 5

RG_A = [
    "The query texture is granular with sharp margins. ANSWER: alpha",
    "Compared with exemplar 2 the shading is flatter. ANSWER: bravo",
    "Margins look irregular; closest match is exemplar 1. ANSWER: alpha",
    "Hard to commit; the nuisance lighting dominates this crop.",
    "Granularity plus margin sharpness decide it. ANSWER: alpha",
]
RG_B = [
    "Smooth gradient field, low contrast. ANSWER: charlie",
    "The second exemplar is the obvious anchor here. ANSWER: charlie",
    "Uniform field with faint banding. ANSWER: delta",
    "Banding suggests a shared acquisition artifact, not class evidence. ANSWER: charlie",
    "Weak evidence either way; leaning late. ANSWER: delta",
]
RG_C = [
    "Dense speckle, high-frequency detail. ANSWER: echo",
    "Speckle density matches exemplar 3 closely. ANSWER: echo",
    "Possibly foxtrot given the edge halo. ANSWER: foxtrot",
    "The halo is a nuisance axis effect; discount it. ANSWER: echo",
    "Inconclusive on this crop.",
]

SPREAD_SCORES = [
    "SCORES: 1,1,1,1,1",
    "SCORES: 1,1,1,0,1",
    "SCORES: 0,0,1,0,0",
    "SCORES: 0,0,0,0,0",
    "SCORES: 0,1,1,0,0",
]
FLAT_SCORES = ["SCORES: 1,1,0,1,0"] * G

SUMMARIES = {
    0: ("Weight margin sharpness above texture granularity when exemplars disagree.",
        "ACTION: Add TEXT: Weight margin sharpness above texture granularity when exemplars disagree."),
    1: ("Discount global banding; it is an acquisition artifact shared across classes.",
        "ACTION: Add TEXT: Discount global banding; it is an acquisition artifact shared across classes."),
    3: ("When exemplar votes conflict, weight votes by exemplar similarity.",
        "ACTION: Add TEXT: When exemplar votes conflict, weight votes by exemplar similarity."),
    4: ("Prefer the top-ranked exemplar's class when scores tie.",
        "ACTION: Add TEXT: Prefer the top-ranked exemplar's class when scores tie."),
    6: ("Edge halos are nuisance effects; ignore them.",
        "ACTION: Add TEXT: Edge halos are nuisance effects; ignore them."),
    8: ("Speckle density is discriminative; compare it against the two nearest exemplars.",
        "ACTION: Add TEXT: Speckle density is discriminative; compare it against the two nearest exemplars."),
    9: ("Treat echo-like speckle with caution when halos are present.",
        "ACTION: Add TEXT: Treat echo-like speckle with caution when halos are present."),
    11: ("Favor consistency between the stated evidence and the final answer.",
         "ACTION: Add TEXT: Favor consistency between the stated evidence and the final answer."),
    13: ("Restate the decisive cue in one sentence before answering.",
         "ACTION: Keep"),
    14: ("Discount banding and halos together as one nuisance family.",
         "ACTION: Modify(h2) TEXT: Discount banding and edge halos; both are acquisition artifacts, not class evidence."),
    16: ("Margin sharpness must outrank color shifts.",
         "ACTION: Delete(h5)"),
    18: ("Name exactly one class in the final line.",
         "ACTION: Add TEXT: Name exactly one class in the final line."),
}

ROLLOUT_GROUPS = [RG_A, RG_B, RG_C]


def main():
    script = []
    for i in range(20):
        step = i + 1
        rollouts = ROLLOUT_GROUPS[i % 3]
        summarize = i in SUMMARIES
        scores = SPREAD_SCORES if summarize else FLAT_SCORES
        script.append({"step": step, "role": "policy", "texts": rollouts})
        for s in scores:
            script.append({"step": step, "role": "evaluator", "texts": [s]})
        if summarize:
            summary, update = SUMMARIES[i]
            script.append({"step": step, "role": "policy", "texts": [summary]})
            script.append({"step": step, "role": "policy", "texts": [update]})
    with open("evolve_script.json", "w") as f:
        json.dump(script, f, indent=1)
        f.write("\n")
    print(f"wrote {len(script)} entries")


if __name__ == "__main__":
    main()
