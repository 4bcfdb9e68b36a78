"""Pure-Python rank/concordance kernels.

These mirror covaudit.kernels._speedups exactly; the package selects one
of the two at import time. Both operate on plain sequences of numbers and
keep all counting in exact integer arithmetic so the two backends return
bit-identical results wherever the tie counts fit in 53 bits.
"""
from __future__ import annotations

import math
from typing import Sequence

__all__ = ["midrank", "kendall_tau_b"]


def midrank(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values all receive the mean of their positions."""
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        # positions i..j are 1-based ranks i+1..j+1
        shared = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def _merge_count(seq: list[float]) -> int:
    """Count strict inversions while merge-sorting seq in place."""
    n = len(seq)
    if n < 2:
        return 0
    mid = n // 2
    left = seq[:mid]
    right = seq[mid:]
    swaps = _merge_count(left) + _merge_count(right)
    i = j = k = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            seq[k] = left[i]
            i += 1
        else:
            seq[k] = right[j]
            j += 1
            swaps += len(left) - i
        k += 1
    while i < len(left):
        seq[k] = left[i]
        i += 1
        k += 1
    while j < len(right):
        seq[k] = right[j]
        j += 1
        k += 1
    return swaps


def _tie_term(sorted_values: Sequence[float]) -> int:
    """Sum t*(t-1)/2 over runs of equal values in an already sorted list."""
    total = 0
    i = 0
    n = len(sorted_values)
    while i < n:
        j = i
        while j + 1 < n and sorted_values[j + 1] == sorted_values[i]:
            j += 1
        run = j - i + 1
        total += run * (run - 1) // 2
        i = j + 1
    return total


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float:
    """Tie-corrected Kendall rank correlation via merge-sort counting.

    (concordant - discordant) / sqrt((n0 - n1) * (n0 - n2)) where n0 is the
    pair count and n1, n2 are the tie terms of x and y. Raises ValueError
    when either side is constant (denominator zero).
    """
    if len(x) != len(y):
        raise ValueError("vectors differ in length")
    n = len(x)
    if n < 2:
        raise ValueError("need at least two observations")

    order = sorted(range(n), key=lambda i: (x[i], y[i]))
    xs = [x[i] for i in order]
    ys = [y[i] for i in order]

    n0 = n * (n - 1) // 2
    n1 = _tie_term(xs)

    # joint ties: runs of equal (x, y) pairs in the sorted order
    n3 = 0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and xs[j + 1] == xs[i] and ys[j + 1] == ys[i]:
            j += 1
        run = j - i + 1
        n3 += run * (run - 1) // 2
        i = j + 1

    swaps = _merge_count(ys)  # ys is now sorted
    n2 = _tie_term(ys)

    d1 = n0 - n1
    d2 = n0 - n2
    if d1 == 0 or d2 == 0:
        raise ValueError("tau-b undefined: one side is entirely tied")
    numerator = n0 - n1 - n2 + n3 - 2 * swaps
    return numerator / math.sqrt(float(d1) * float(d2))
