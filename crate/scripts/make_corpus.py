"""Writes the bundled synthetic English-like corpus to data/corpus.txt.

The text is produced by a seeded generator so it is free of licensing
questions and reproducible byte-for-byte:

    python3 scripts/make_corpus.py [--bytes 200000] [--seed 2017] [--out data/corpus.txt]

Words come from a made-up lexicon with a Zipfian frequency profile, glued
together by common English function words and simple sentence templates.
The text is a run of documents of twelve paragraphs each. Every document
draws most of its nouns from a small private lexicon that never appears
elsewhere, so a character model can memorise names seen in training that do
not help on held-out documents.
"""

import argparse
import random

FUNCTION = {
    "det": ["the", "a", "this", "that", "every", "some", "no", "his", "her", "their", "our"],
    "prep": ["of", "in", "on", "with", "from", "under", "over", "near", "about", "after", "before", "through"],
    "conj": ["and", "but", "so", "yet", "while", "because", "although", "when"],
    "pron": ["he", "she", "they", "we", "it", "you", "I"],
    "aux": ["will", "would", "could", "must", "might", "did", "can"],
    "adv": ["never", "often", "rarely", "slowly", "quickly", "again", "always", "still", "soon"],
}
ONSETS = ["b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w",
          "br", "cl", "dr", "fl", "gr", "pl", "st", "th", "tr", "sh", "ch", "wh", "sp", "sk", ""]
VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "ou", "ie", "oo", "y"]
CODAS = ["", "", "", "n", "r", "s", "t", "l", "m", "nd", "st", "rk", "ng", "ck", "th"]


def make_word(rng):
    syllables = rng.choices([1, 2, 3, 4], weights=[3, 5, 3, 1])[0]
    return "".join(rng.choice(ONSETS) + rng.choice(VOWELS) + rng.choice(CODAS) for _ in range(syllables))


def lexicon(rng, size):
    seen = set()
    words = []
    while len(words) < size:
        w = make_word(rng)
        if w not in seen and len(w) > 1:
            seen.add(w)
            words.append(w)
    return words


def zipf_picker(rng, words, s):
    weights = [1.0 / (rank + 1) ** s for rank in range(len(words))]
    return lambda: rng.choices(words, weights=weights)[0]


def sentence(rng, noun, verb, adj):
    f = FUNCTION
    subject = rng.choice([
        lambda: rng.choice(f["det"]) + " " + noun(),
        lambda: rng.choice(f["det"]) + " " + adj() + " " + noun(),
        lambda: rng.choice(f["pron"]),
    ])()
    parts = [subject]
    if rng.random() < 0.3:
        parts.append(rng.choice(f["aux"]))
    if rng.random() < 0.25:
        parts.append(rng.choice(f["adv"]))
    parts.append(verb() + rng.choice(["", "s", "ed", "ing"]))
    parts.append(rng.choice(f["det"]) + " " + (adj() + " " if rng.random() < 0.4 else "") + noun())
    for _ in range(rng.choice([0, 0, 1, 1, 2])):
        parts.append(rng.choice(f["prep"]) + " " + rng.choice(f["det"]) + " " + noun())
    if rng.random() < 0.3:
        parts.append(rng.choice(f["conj"]) + " " + rng.choice(f["pron"]) + " " + verb() + "ed")
    text = " ".join(parts)
    text = text[0].upper() + text[1:]
    return text + rng.choice([".", ".", ".", ".", "!", "?", ";"])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--bytes", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=2017)
    ap.add_argument("--out", default="data/corpus.txt")
    args = ap.parse_args()
    rng = random.Random(args.seed)
    nouns = lexicon(rng, 1500)
    verbs = lexicon(rng, 600)
    adjs = lexicon(rng, 400)
    noun = zipf_picker(rng, nouns, 1.05)
    verb = zipf_picker(rng, verbs, 1.1)
    adj = zipf_picker(rng, adjs, 1.1)
    out = []
    size = 0
    while size < args.bytes:
        # Each document brings its own names that recur only inside it.
        local = lexicon(rng, 40)
        local_pick = lambda: rng.choice(local)
        doc_noun = lambda: local_pick() if rng.random() < 0.7 else noun()
        for _ in range(12):
            para = " ".join(sentence(rng, doc_noun, verb, adj) for _ in range(rng.randint(2, 6))) + "\n"
            out.append(para)
            size += len(para)
    text = "".join(out)[: args.bytes]
    text = text[: text.rfind("\n") + 1]
    with open(args.out, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


if __name__ == "__main__":
    main()
