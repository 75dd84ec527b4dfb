#!/usr/bin/env python3
"""Reference scorer used once to produce the golden metric values in
crates/core/src/metrics/golden.rs.

Transcribes the corpus BLEU and CIDEr-D arithmetic of the widely used
COCO caption evaluation toolkit (bleu_scorer / cider_scorer), including
its quirks: epsilon-fudged precisions in BLEU, closest-reference length
with ties to the shorter, and CIDEr-D's bigram-based sentence length in
the Gaussian penalty.

Run: python3 tools/golden_metrics.py
"""
import math
from collections import defaultdict

CANDIDATES = [
    "a dog runs across the green field",
    "two children are playing with a ball",
    "a man rides a bicycle down the street",
    "a cat sleeps",
    "the red truck is parked near the old barn by the river",
]

REFERENCES = [
    ["a brown dog runs across a field", "the dog sprints over the grass"],
    ["two kids play with a red ball", "children playing ball outside"],
    ["a man rides a bicycle down a busy street", "someone rides a bike along the road"],
    ["a cat sleeps on the warm sofa", "the cat is napping"],
    ["a red truck parked near an old barn", "the truck sits by the river barn"],
]


def precook(s, n=4):
    words = s.split()
    counts = defaultdict(int)
    for k in range(1, n + 1):
        for i in range(len(words) - k + 1):
            ngram = tuple(words[i:i + k])
            counts[ngram] += 1
    return (len(words), counts)


def cook_refs(refs, n=4):
    reflen = []
    maxcounts = {}
    for ref in refs:
        rl, counts = precook(ref, n)
        reflen.append(rl)
        for (ngram, count) in counts.items():
            maxcounts[ngram] = max(maxcounts.get(ngram, 0), count)
    return (reflen, maxcounts)


def cook_test(test, reflen_refmaxcounts, n=4):
    reflen, refmaxcounts = reflen_refmaxcounts
    testlen, counts = precook(test, n)
    result = {}
    result["testlen"] = testlen
    result["reflen"] = reflen
    result["guess"] = [max(0, testlen - k + 1) for k in range(1, n + 1)]
    result["correct"] = [0] * n
    for (ngram, count) in counts.items():
        result["correct"][len(ngram) - 1] += min(refmaxcounts.get(ngram, 0), count)
    return result


def single_reflen(reflens, option, testlen):
    if option == "shortest":
        return min(reflens)
    if option == "average":
        return float(sum(reflens)) / len(reflens)
    if option == "closest":
        return min(reflens, key=lambda rl: (abs(rl - testlen), rl))
    raise ValueError(option)


def corpus_bleu(candidates, references, n=4):
    small = 1e-9
    tiny = 1e-15
    crefs = [cook_refs(refs, n) for refs in references]
    ctest = [cook_test(c, cr, n) for c, cr in zip(candidates, crefs)]
    option = "average" if len(crefs) == 1 else "closest"
    total_testlen = 0
    total_reflen = 0
    totalcomps = {"guess": [0] * n, "correct": [0] * n}
    for comps in ctest:
        testlen = comps["testlen"]
        total_testlen += testlen
        total_reflen += single_reflen(comps["reflen"], option, testlen)
        for key in ("guess", "correct"):
            for k in range(n):
                totalcomps[key][k] += comps[key][k]
    bleus = []
    bleu = 1.0
    for k in range(n):
        bleu *= (float(totalcomps["correct"][k]) + tiny) / (
            float(totalcomps["guess"][k]) + small
        )
        bleus.append(bleu ** (1.0 / (k + 1)))
    ratio = (total_testlen + tiny) / (total_reflen + small)
    if ratio < 1:
        for k in range(n):
            bleus[k] *= math.exp(1 - 1 / ratio)
    return bleus


def cider_d(candidates, references, n=4, sigma=6.0):
    def counts_of(s):
        return precook(s, n)[1]

    crefs = [[counts_of(r) for r in refs] for refs in references]
    ctest = [counts_of(c) for c in candidates]

    document_frequency = defaultdict(float)
    for refs in crefs:
        for ngram in set(ngram for ref in refs for (ngram, count) in ref.items()):
            document_frequency[ngram] += 1

    ref_len = math.log(float(len(crefs)))

    def counts2vec(cnts):
        vec = [defaultdict(float) for _ in range(n)]
        length = 0
        norm = [0.0] * n
        for (ngram, term_freq) in cnts.items():
            df = math.log(max(1.0, document_frequency[ngram]))
            k = len(ngram) - 1
            vec[k][ngram] = float(term_freq) * (ref_len - df)
            norm[k] += pow(vec[k][ngram], 2)
            if k == 1:
                length += term_freq
        norm = [math.sqrt(x) for x in norm]
        return vec, norm, length

    def sim(vec_hyp, vec_ref, norm_hyp, norm_ref, length_hyp, length_ref):
        delta = float(length_hyp - length_ref)
        val = [0.0] * n
        for k in range(n):
            for (ngram, count) in vec_hyp[k].items():
                val[k] += min(vec_hyp[k][ngram], vec_ref[k][ngram]) * vec_ref[k][ngram]
            if (norm_hyp[k] != 0) and (norm_ref[k] != 0):
                val[k] /= norm_hyp[k] * norm_ref[k]
            val[k] *= math.e ** (-(delta ** 2) / (2 * sigma ** 2))
        return val

    scores = []
    for test, refs in zip(ctest, crefs):
        vec, norm, length = counts2vec(test)
        score = [0.0] * n
        for ref in refs:
            vec_ref, norm_ref, length_ref = counts2vec(ref)
            for k, v in enumerate(sim(vec, vec_ref, norm, norm_ref, length, length_ref)):
                score[k] += v
        score_avg = sum(score) / n
        score_avg /= len(refs)
        score_avg *= 10.0
        scores.append(score_avg)
    return sum(scores) / len(scores)


if __name__ == "__main__":
    bleus = corpus_bleu(CANDIDATES, REFERENCES)
    for i, b in enumerate(bleus, start=1):
        print(f"BLEU{i} = {b:.12f}")
    print(f"CIDEr-D = {cider_d(CANDIDATES, REFERENCES):.12f}")
