#!/usr/bin/env python3
"""Writes the small SST-format fixture used by the tests (deterministic)."""
import random
import sys

POS = {"good": 1, "fine": 1, "charming": 1, "great": 2, "brilliant": 2, "moving": 1, "fun": 1}
NEG = {"bad": -1, "dull": -1, "awful": -2, "boring": -1, "terrible": -2, "flat": -1, "tired": -1}
NEU = ["the", "film", "movie", "plot", "a", "is", "was", "cast", "story", "and", "its", "this",
       "ending", "script", "acting", "rather", "quite", "very"]
NEGATORS = ["not", "n't", "no"]


def label(score):
    if score <= -2:
        return 0
    if score == -1:
        return 1
    if score == 0:
        return 2
    if score == 1:
        return 3
    return 4


def word(rng):
    r = rng.random()
    if r < 0.2:
        return rng.choice(sorted(POS))
    if r < 0.4:
        return rng.choice(sorted(NEG))
    if r < 0.47:
        return rng.choice(NEGATORS)
    return rng.choice(NEU)


def polarity(w):
    return POS.get(w, NEG.get(w, 0))


def build(tokens, rng):
    """Returns (sexpr, score) for a random binarization of tokens."""
    if len(tokens) == 1:
        s = polarity(tokens[0])
        return "(%d %s)" % (label(s), tokens[0]), s
    k = rng.randint(1, len(tokens) - 1)
    ls, lv = build(tokens[:k], rng)
    rs, rv = build(tokens[k:], rng)
    if len(tokens[:k]) == 1 and tokens[0] in NEGATORS:
        v = -rv
    else:
        v = max(-2, min(2, lv + rv))
    return "(%d %s %s)" % (label(v), ls, rs), v


def main():
    seed, count, path = int(sys.argv[1]), int(sys.argv[2]), sys.argv[3]
    rng = random.Random(seed)
    with open(path, "w") as out:
        for _ in range(count):
            n = rng.randint(3, 12)
            out.write(build([word(rng) for _ in range(n)], rng)[0] + "\n")


if __name__ == "__main__":
    main()
