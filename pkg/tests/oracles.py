"""Independent reference implementations used to check the shipped code.

These deliberately evaluate definitions directly (quantifiers, per-order
precision products, closed forms) rather than sharing any logic with the
package, so agreement is evidence and not tautology.
"""

from __future__ import annotations

import math
from collections import Counter

from specmt.trace import EventTrace
from specmt.vocab import EOS_SURFACE, PHI_SURFACE


def brute_force_delays(rows: tuple[tuple, ...]) -> tuple[int, ...]:
    """Delay of each final position by direct evaluation of the definition:
    the smallest row index i such that every row i' >= i agrees with the
    final row on every position j' <= j (short rows disagree)."""
    final = rows[-1]
    n_rows = len(rows)
    delays = []
    for j in range(1, len(final) + 1):
        for i in range(1, n_rows + 1):
            stable = True
            for i_later in range(i, n_rows + 1):
                row = rows[i_later - 1]
                for j_prefix in range(1, j + 1):
                    if len(row) < j_prefix or row[j_prefix - 1] != final[j_prefix - 1]:
                        stable = False
                        break
                if not stable:
                    break
            if stable:
                delays.append(i)
                break
    return tuple(delays)


def brute_force_bleu(hypotheses, references) -> float:
    """Corpus BLEU-4 straight from the definition: clipped counts per order,
    geometric mean as a fourth root of the product, brevity penalty last."""

    def grams(seq, n):
        return Counter(tuple(seq[k : k + n]) for k in range(len(seq) - n + 1))

    product = 1.0
    for n in (1, 2, 3, 4):
        clipped = 0
        total = 0
        for hyp, ref in zip(hypotheses, references):
            hyp_grams = grams(hyp, n)
            ref_grams = grams(ref, n)
            for gram, count in hyp_grams.items():
                clipped += min(count, ref_grams.get(gram, 0))
            total += max(0, len(hyp) - n + 1)
        if total == 0 or clipped == 0:
            return 0.0
        product *= clipped / total
    hyp_len = sum(len(h) for h in hypotheses)
    ref_len = sum(len(r) for r in references)
    if hyp_len == 0:
        return 0.0
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return brevity * product ** 0.25


def wait_k_closed_form_al(k: int, src_len: int, tgt_len: int) -> float:
    """Lagging of an ideal wait-k schedule, g_j = min(j + k - 1, src_len)."""
    rate = tgt_len / src_len
    total = sum(min(j + k - 1, src_len) - (j - 1) / rate for j in range(1, tgt_len + 1))
    return total / tgt_len


def wait_k_delays(k: int, src_len: int, tgt_len: int) -> tuple[int, ...]:
    return tuple(min(j + k - 1, src_len) for j in range(1, tgt_len + 1))


def speculation_eligible_positions(baseline_trace: EventTrace) -> int:
    """Positions whose delay an always-correct speculation can shrink.

    Those are the real-token writes that are the first decision of their read
    step, for read steps 2..I: the first step's speculation cannot land
    before row 1, and decisions after the end-of-source read gain nothing.
    """
    src_len = baseline_trace.read_count()
    eligible = 0
    step_decided = False
    for event in baseline_trace.events:
        if event.ev == "READ":
            step_decided = False
        elif event.ev == "WRITE":
            first = not step_decided
            step_decided = True
            if (
                first
                and event.tok not in (PHI_SURFACE, EOS_SURFACE)
                and event.i is not None
                and 2 <= event.i <= src_len
            ):
                eligible += 1
    return eligible


def random_snapshot_rows(rng, max_rows: int = 20, max_cols: int = 20, alphabet: int = 6):
    """Random revision-laden snapshot matrices for differential testing."""
    n_rows = int(rng.integers(1, max_rows + 1))
    n_cols = int(rng.integers(1, max_cols + 1))
    final = [f"t{rng.integers(alphabet)}" for _ in range(n_cols)]
    rows = []
    for i in range(n_rows - 1):
        # earlier rows: corrupted, truncated, or overlong variants of the final row
        length = int(rng.integers(0, n_cols + 3))
        row = []
        for j in range(length):
            if j < n_cols and rng.random() < 0.7:
                row.append(final[j])
            else:
                row.append(f"t{rng.integers(alphabet)}")
        rows.append(tuple(row))
    rows.append(tuple(final))
    return tuple(rows)
