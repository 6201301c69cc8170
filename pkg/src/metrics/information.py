# src/metrics/information.py
from __future__ import annotations
import math
from typing import Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from src.metrics.contingency import (
    ContingencyTable,
    PartitionLike,
    as_partition,
    contingency,
    entropy_from_sizes,
)

# |denominator| below this is treated as an exact zero
_DEGENERATE_TOL = 1e-12


def mutual_information(t: ContingencyTable) -> float:
    """MI in nats, with 0·log 0 := 0."""
    n = t.n
    i, j = np.nonzero(t.counts)
    nij = t.counts[i, j].astype(np.float64)
    a = t.row_sums[i].astype(np.float64)
    b = t.col_sums[j].astype(np.float64)
    terms = (nij / n) * (np.log(n * nij) - np.log(a * b))
    return max(0.0, math.fsum(terms.tolist()))


def expected_mutual_information(a: Sequence[int], b: Sequence[int], n: int) -> float:
    """
    Exact E[MI] under the permutation model: for every (i, j), sum over feasible
    n_ij of the hypergeometric probability times the MI contribution. Log-factorials
    come from gammaln.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if int(a.sum()) != n or int(b.sum()) != n:
        raise ValueError(f"marginals must sum to n={n} (got {int(a.sum())}, {int(b.sum())})")
    if a.size <= 1 or b.size <= 1:
        return 0.0
    lf = gammaln(np.arange(n + 1, dtype=np.float64) + 1.0)
    log_n = math.log(n)
    parts = []
    for ai in a.tolist():
        for bj in b.tolist():
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1)
            contribution = (nij / n) * (log_n + np.log(nij) - math.log(ai) - math.log(bj))
            log_p = (
                lf[ai] + lf[bj] + lf[n - ai] + lf[n - bj] - lf[n]
                - lf[nij] - lf[ai - nij] - lf[bj - nij] - lf[n - ai - bj + nij]
            )
            parts.extend((contribution * np.exp(log_p)).tolist())
    return max(0.0, math.fsum(parts))


def ami(u: PartitionLike, v: PartitionLike) -> float:
    """(MI - EMI) / (mean(H(U), H(V)) - EMI); 1 or 0 on a zero denominator."""
    pu, pv = as_partition(u), as_partition(v)
    if pu == pv:
        return 1.0
    t = contingency(pu, pv)
    mi = mutual_information(t)
    emi = expected_mutual_information(t.row_sums, t.col_sums, t.n)
    hu = entropy_from_sizes(t.row_sums, t.n)
    hv = entropy_from_sizes(t.col_sums, t.n)
    denominator = 0.5 * (hu + hv) - emi
    if abs(denominator) < _DEGENERATE_TOL:
        return 0.0
    return (mi - emi) / denominator


def _conditional_entropy(t: ContingencyTable, given_rows: bool) -> float:
    i, j = np.nonzero(t.counts)
    nij = t.counts[i, j].astype(np.float64)
    marg = (t.row_sums[i] if given_rows else t.col_sums[j]).astype(np.float64)
    terms = (nij / t.n) * np.log(nij / marg)
    return max(0.0, -math.fsum(terms.tolist()))


def homogeneity_completeness_v(u: PartitionLike, v: PartitionLike) -> Tuple[float, float, float]:
    """
    u is the prediction, v the ground truth.
    h = 1 - H(V|U)/H(V), c = 1 - H(U|V)/H(U), v = 2hc/(h+c).
    """
    t = contingency(u, v)
    hu = entropy_from_sizes(t.row_sums, t.n)
    hv = entropy_from_sizes(t.col_sums, t.n)
    h = 1.0 if hv == 0.0 else 1.0 - _conditional_entropy(t, given_rows=True) / hv
    c = 1.0 if hu == 0.0 else 1.0 - _conditional_entropy(t, given_rows=False) / hu
    h = min(1.0, max(0.0, h))
    c = min(1.0, max(0.0, c))
    vm = 0.0 if h + c == 0.0 else 2.0 * h * c / (h + c)
    return h, c, vm
