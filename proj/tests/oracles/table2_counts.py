"""Searches confusion counts that reproduce the success-detection F1 table.

Split sizes: 76 in-distribution episodes, 58 OOD episodes.  For each method
column we need (tp, fp, fn) per split whose F1 renders to the published
cell at two decimals, and whose pooled-confusion F1 renders to the Overall
cell.  Cells too close to a rounding boundary (within 1e-3) are rejected so
the frozen inputs are robust to formatting.
"""
from fractions import Fraction
import itertools

TARGETS = {  # method: (overall, in_dist, ood)
    "No Aug": (0.43, 0.66, 0.19),
    "Aug (A)": (0.56, 0.67, 0.45),
    "Aug (A)+(B)": (0.62, 0.66, 0.57),
}
N_IN, N_OOD = 76, 58


def f1(tp, fp, fn):
    d = 2 * tp + fp + fn
    return Fraction(0) if d == 0 else Fraction(2 * tp, d)


def ok(v, target):
    v = float(v)
    return abs(v - target) < 0.005 - 1e-3


def split_candidates(n, target, positives):
    out = []
    for tp in range(0, positives + 1):
        fn = positives - tp
        for fp in range(0, n - positives + 1):
            if ok(f1(tp, fp, fn), target):
                out.append((tp, fp, fn, n - positives - fp))
    return out


for method, (overall, tin, tood) in TARGETS.items():
    found = None
    # half of each split are successes, as in a balanced benchmark
    cin = split_candidates(N_IN, tin, N_IN // 2)
    cood = split_candidates(N_OOD, tood, N_OOD // 2)
    best = None
    for a, b in itertools.product(cin, cood):
        v = f1(a[0] + b[0], a[1] + b[1], a[2] + b[2])
        if ok(v, overall):
            score = abs(float(v) - overall) + abs(float(f1(*a[:3])) - tin) + abs(float(f1(*b[:3])) - tood)
            if best is None or score < best[0]:
                best = (score, a, b, float(v))
    print(method, "in(tp,fp,fn,tn)=", best[1] if best else None, "ood=", best[2] if best else None, "overall=", best[3] if best else None)
