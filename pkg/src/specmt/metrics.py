"""Revision-aware latency metrics and corpus BLEU.

Latency is computed from the snapshot matrix, not from write timestamps, so
revised output is charged correctly: a position only counts as produced once
the whole prefix through it has stopped changing.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .trace import SnapshotMatrix


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class DelayVector:
    """Per output position, the number of source reads completed before the
    output prefix through that position reached its final value."""

    delays: tuple[int, ...]
    source_length: int

    def __post_init__(self) -> None:
        if any(d < 0 or d > self.source_length for d in self.delays):
            raise MetricsError("delays must lie in [0, source_length]")

    @property
    def target_length(self) -> int:
        return len(self.delays)


def delay_vector(snapshots: SnapshotMatrix) -> DelayVector:
    """Finalization delay of every final-output position.

    Position j finalizes at the smallest row index i such that every row from
    i onward agrees with the final output on every position up to j; a row
    too short to contain a position disagrees at it. Tracking the last
    disagreeing row of the growing prefix makes this O(rows * columns)
    instead of evaluating the quantifiers directly.
    """
    rows = snapshots.rows
    final = snapshots.final
    n_rows = len(rows)
    delays: list[int] = []
    last_bad = 0  # latest row (1-based) disagreeing anywhere in positions 1..j
    for j in range(1, len(final) + 1):
        target = final[j - 1]
        # scan below the final row, which agrees with itself by definition
        for i in range(n_rows - 1, last_bad, -1):
            row = rows[i - 1]
            if len(row) < j or row[j - 1] != target:
                last_bad = i
                break
        delays.append(last_bad + 1)
    return DelayVector(delays=tuple(delays), source_length=n_rows)


def average_lagging(delays: DelayVector, cutoff: bool = False) -> float:
    """Mean excess of the delays over the ideal diagonal schedule.

    AL = (1/J) * sum_{j=1..J} ( g_j - (j-1) / (J/I) )

    The default sums over every output position. `cutoff=True` selects the
    non-default variant that stops at the first position produced only after
    the whole source was read; it exists for cross-checking against other
    tools and is not used by any metric in this package.
    """
    g = delays.delays
    src_len = delays.source_length
    if not g:
        raise MetricsError("empty output")
    if src_len < 1:
        raise MetricsError("empty source")
    j_count = len(g)
    if cutoff:
        stop = next((j for j in range(1, j_count + 1) if g[j - 1] >= src_len), j_count)
    else:
        stop = j_count
    rate = j_count / src_len
    total = sum(g[j - 1] - (j - 1) / rate for j in range(1, stop + 1))
    return total / stop


def awr(withdrawals: int, target_length: int) -> float:
    """Withdrawals per final output token; may exceed 1."""
    if target_length < 1:
        raise MetricsError("empty output")
    if withdrawals < 0:
        raise MetricsError("negative withdrawal count")
    return withdrawals / target_length


@dataclass(frozen=True)
class MetricsReport:
    al: float
    awr: float
    bleu: float | None = None
    al_diff: float | None = None
    withdrawals: int = 0
    speculations: int = 0
    hits: int = 0
    source_length: int = 0
    target_length: int = 0
    corpus_id: str = "none"


def report_from_run(run, reference: Sequence | None = None, corpus_id: str | None = None) -> MetricsReport:
    """All metrics of one engine run; BLEU only when a reference is given."""
    delays = delay_vector(run.snapshots)
    target_length = len(run.final_output)
    return MetricsReport(
        al=average_lagging(delays),
        awr=awr(run.withdrawals, target_length),
        bleu=corpus_bleu([run.final_output], [reference]) if reference is not None else None,
        withdrawals=run.withdrawals,
        speculations=run.speculations,
        hits=run.hits,
        source_length=delays.source_length,
        target_length=target_length,
        corpus_id=corpus_id if corpus_id is not None else run.trace.run_config.corpus,
    )


def al_diff(baseline: MetricsReport, speculative: MetricsReport) -> float:
    """Latency improvement: baseline lagging minus speculative lagging."""
    if baseline.corpus_id != speculative.corpus_id:
        raise MetricsError("corpus-id mismatch")
    return baseline.al - speculative.al


def _ngrams(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def modified_precision(
    hypotheses: Sequence[Sequence], references: Sequence[Sequence], n: int
) -> tuple[int, int]:
    """Corpus-level clipped n-gram matches and total hypothesis n-grams."""
    matched = 0
    total = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_counts = _ngrams(hyp, n)
        ref_counts = _ngrams(ref, n)
        matched += sum(min(count, ref_counts[gram]) for gram, count in hyp_counts.items())
        total += max(len(hyp) - n + 1, 0)
    return matched, total


def corpus_bleu(hypotheses: Sequence[Sequence], references: Sequence[Sequence]) -> float:
    """Corpus BLEU-4 on a [0, 1] scale, one reference per hypothesis.

    Uniformly weighted geometric mean of clipped n-gram precisions for
    n = 1..4, times the brevity penalty exp(min(0, 1 - ref_len/hyp_len)).
    No smoothing: any zero precision (including a missing n-gram order)
    yields 0, which is the documented behavior rather than an edge case.
    """
    if len(hypotheses) != len(references):
        raise MetricsError("hypothesis/reference count mismatch")
    if not hypotheses:
        raise MetricsError("empty corpus")
    hyp_len = sum(len(h) for h in hypotheses)
    ref_len = sum(len(r) for r in references)
    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        matched, total = modified_precision(hypotheses, references, n)
        if matched == 0 or total == 0:
            return 0.0
        log_sum += 0.25 * math.log(matched / total)
    brevity = min(0.0, 1.0 - ref_len / hyp_len)
    return math.exp(brevity + log_sum)


def paired_bootstrap_pvalue(
    treatment: Sequence[float],
    control: Sequence[float],
    resamples: int = 10_000,
    seed: int = 0,
) -> float:
    """One-sided paired bootstrap p-value for mean(treatment) > mean(control).

    Resamples sentence pairs with replacement and reports the fraction of
    resampled mean differences that are not positive.
    """
    if len(treatment) != len(control) or len(treatment) == 0:
        raise MetricsError("paired samples required")
    deltas = np.asarray(treatment, dtype=float) - np.asarray(control, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(deltas), size=(resamples, len(deltas)))
    means = deltas[idx].mean(axis=1)
    return float(np.mean(means <= 0.0))
