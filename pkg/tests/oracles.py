"""Brute-force reference implementations shared by the unit and acceptance tests."""

import math

import numpy as np

from clipsum.metrics import temporal_iou


def kendall_oracle(x, y):
    """O(n^2) pair counting with the tau-b tie correction."""
    conc = disc = tx = ty = 0
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            dx, dy = np.sign(x[i] - x[j]), np.sign(y[i] - y[j])
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                tx += 1
            elif dy == 0:
                ty += 1
            elif dx == dy:
                conc += 1
            else:
                disc += 1
    return (conc - disc) / math.sqrt((conc + disc + tx) * (conc + disc + ty))


def average_ranks(x):
    ranks = np.empty(len(x))
    for i, v in enumerate(x):
        less = sum(1 for u in x if u < v)
        equal = sum(1 for u in x if u == v)
        ranks[i] = less + (equal + 1) / 2
    return ranks


def spearman_oracle(x, y):
    rx, ry = average_ranks(x), average_ranks(y)
    rx, ry = rx - rx.mean(), ry - ry.mean()
    return float(np.sum(rx * ry) / math.sqrt(np.sum(rx * rx) * np.sum(ry * ry)))


def ap_oracle(preds, truth, th):
    """Area under the precision/recall steps, re-running greedy matching on every prefix."""
    if not truth:
        return 0.0
    order = sorted(range(len(preds)), key=lambda i: (-preds[i][2], i))
    area, prev_recall = 0.0, 0.0
    for cut in range(1, len(order) + 1):
        free = list(range(len(truth)))
        tp = 0
        for i in order[:cut]:
            ious = [(temporal_iou(preds[i], truth[j]), -j, j) for j in free]
            ious = [v for v in ious if v[0] >= th]
            if ious:
                free.remove(max(ious)[2])
                tp += 1
        recall = tp / len(truth)
        area += (recall - prev_recall) * (tp / cut)
        prev_recall = recall
    return area


def triple_sum(X, Y):
    d, t = X.shape
    _, T = Y.shape
    total = 0.0
    for i in range(d):
        for j in range(t):
            for k in range(T):
                total += X[i, j] * Y[i, k]
    return total / (t * T)


def window_oracle(X, Y, n):
    t, T = X.shape[1], Y.shape[1]
    vals = [
        float(np.sum(X[:, a : a + n].ravel() * Y[:, b : b + n].ravel()))
        for a in range(t - n + 1)
        for b in range(T - n + 1)
    ]
    return float(np.mean(vals)), float(np.var(vals))


def sort_oracle(scores, k):
    # full sort keyed on (-score, index), independent of argsort stability
    return [i for _, i in sorted((-s, i) for i, s in enumerate(scores))][:k]


def scalar_reference(vids, sums, tau, with_positive):
    """Direct evaluation of the summed per-anchor terms for n=1, one loop per anchor."""

    def dist(a, b):
        return sum(a[i][j] * b[i][l] for i in range(len(a)) for j in range(len(a[0])) for l in range(len(b[0]))) / (
            len(a[0]) * len(b[0])
        )

    seqs = vids + sums
    batch = len(vids)
    total = 0.0
    for a in range(2 * batch):
        owner = a % batch
        pos = owner + batch if a < batch else owner
        den = math.exp(dist(seqs[a], seqs[pos]) / tau) if with_positive else 0.0
        for b in range(2 * batch):
            if b % batch != owner:
                den += math.exp(dist(seqs[a], seqs[b]) / tau)
        total += -math.log(math.exp(dist(seqs[a], seqs[pos]) / tau) / den)
    return total
