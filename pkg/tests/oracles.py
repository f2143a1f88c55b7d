"""Naive reference implementations used to cross-check the loss code.

Everything here is written as literal double loops over Python lists
with direct exponentials.  No log-space tricks, no vectorization, no
imports from the package's own math: if the fast implementations agree
with these to 1e-10, both are reading the formulas the same way.
"""

import math

import numpy as np


def naive_softmax(scores, temperature=1.0):
    exps = [math.exp(s / temperature) for s in scores]
    total = sum(exps)
    return [e / total for e in exps]


def naive_kl(p, q):
    """sum_j p_j * log(p_j / q_j), with 0 * log 0 taken as 0."""
    total = 0.0
    for pj, qj in zip(p, q):
        if pj > 0.0:
            total += pj * math.log(pj / qj)
    return total


def naive_ce(logits_rows, labels):
    total = 0.0
    for row, label in zip(logits_rows, labels):
        probs = naive_softmax(list(row))
        total += -math.log(probs[label])
    return total / len(labels)


def naive_scl(embeddings, labels, temperature):
    """Sum over anchors of the mean positive negative-log-probability.

    For anchor i the candidates are every other embedding; the
    probability of each candidate is a temperature softmax of its dot
    product with the anchor.  Anchors with no same-class partner
    contribute zero.
    """
    n = len(labels)
    total = 0.0
    for i in range(n):
        partners = [j for j in range(n) if j != i and labels[j] == labels[i]]
        if not partners:
            continue
        others = [j for j in range(n) if j != i]
        exps = {}
        for j in others:
            dot = float(np.dot(embeddings[j], embeddings[i]))
            exps[j] = math.exp(dot / temperature)
        denom = sum(exps.values())
        anchor = 0.0
        for p in partners:
            anchor += -math.log(exps[p] / denom)
        total += anchor / len(partners)
    return total


def naive_con(orig_logits_rows, aug_logits_rows):
    """Mean over the batch of KL(softmax(orig) || softmax(aug))."""
    total = 0.0
    for orig, aug in zip(orig_logits_rows, aug_logits_rows):
        total += naive_kl(naive_softmax(list(orig)), naive_softmax(list(aug)))
    return total / len(orig_logits_rows)


def naive_cc(orig_embeddings, aug_embeddings, temperature):
    """Mean over anchors of KL between the two candidate distributions.

    Candidates for anchor i: original embeddings except i (ascending),
    then augmented embeddings except i (ascending).  P scores them
    against the original view of the anchor, Q against the augmented
    view, both through a temperature softmax.
    """
    n = len(orig_embeddings)
    total = 0.0
    for i in range(n):
        candidates = [orig_embeddings[j] for j in range(n) if j != i]
        candidates += [aug_embeddings[j] for j in range(n) if j != i]
        p_scores = [float(np.dot(c, orig_embeddings[i])) / temperature for c in candidates]
        q_scores = [float(np.dot(c, aug_embeddings[i])) / temperature for c in candidates]
        total += naive_kl(naive_softmax(p_scores), naive_softmax(q_scores))
    return total / n


def random_unit_rows(rng, n, d):
    rows = rng.standard_normal((n, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)
