"""Speculative translation engine with withdrawal, plus the non-speculative baseline.

The speculative loop guesses each upcoming source token, decodes one decision
against the guess before the token arrives, and resolves it on arrival: a
correct guess commits the precomputed decision (the translator call for that
step is skipped), a wrong one withdraws it and recomputes from the real
prefix. Because the translator is deterministic, a committed speculative
decision is bit-identical to what the baseline would have produced, so the
final output never changes; only the timing of when tokens become visible
does.

Speculation depth is one source token: each read step speculates at most its
first decision. After the end-of-sequence arrives the remaining output is
decoded autoregressively with no speculation.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .model import SimtModel
from .ngram import Prediction
from .trace import (
    COMMIT,
    END,
    PREDICT,
    READ,
    SPECULATE,
    WITHDRAW,
    WRITE,
    Event,
    EventTrace,
    RunConfig,
    SnapshotMatrix,
    snapshot_from_trace,
)
from .vocab import BOS, EOS, PHI, Sentence

SEQUENTIAL = "sequential"
CONCURRENT = "concurrent"


class EngineError(RuntimeError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    """Speculation controls.

    `tau` gates speculation on the predictor's probability: a step is only
    speculated when probability >= tau, so tau=0 speculates always and tau=1
    only on fully confident predictions. `mode` chooses whether the predictor
    call for the next token overlaps the current correction decode in wall
    time; committed traces are identical either way.
    """

    tau: float = 0.0
    mode: str = SEQUENTIAL
    record_trace: bool = False
    max_output: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise EngineError("tau must be in [0, 1]")
        if self.mode not in (SEQUENTIAL, CONCURRENT):
            raise EngineError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class RunResult:
    """Outcome of one engine run over one sentence."""

    final_output: Sentence
    trace: EventTrace
    snapshots: SnapshotMatrix
    withdrawals: int
    speculations: int
    hits: int
    predict_seconds: float = 0.0
    translate_seconds: float = 0.0

    def __post_init__(self) -> None:
        if self.withdrawals != self.trace.withdraw_count():
            raise EngineError("withdrawal count disagrees with trace")
        if self.speculations != self.hits + self.withdrawals:
            raise EngineError("speculation accounting broken")


def _check_source(source: Sentence) -> None:
    if not source:
        raise EngineError("empty source")
    for tok in source:
        if tok in (BOS, EOS, PHI):
            raise EngineError("reserved marker in source sentence")


class _Clock:
    """Accumulates wall time per call site; never feeds back into outputs."""

    def __init__(self) -> None:
        self.total = 0.0

    def run(self, fn, *args):
        start = time.perf_counter()
        try:
            return fn(*args)
        finally:
            self.total += time.perf_counter() - start


def run_baseline(
    model: SimtModel,
    source: Sentence,
    run_config: RunConfig | None = None,
    max_output: int | None = None,
) -> RunResult:
    """Standard incremental loop: read, then write until the policy asks to read."""
    _check_source(source)
    src_len = len(source)
    limit = max_output if max_output is not None else 2 * src_len + 8
    surf = model.vocabulary.surface
    clock = _Clock()

    out: list[int] = []
    events: list[Event] = []
    slot = 0
    finished = False

    for i in range(1, src_len + 2):
        tok = source[i - 1] if i <= src_len else EOS
        events.append(Event(READ, i=i, tok=surf(tok)))
        done = tok == EOS
        prefix = source[:min(i, src_len)]
        while True:
            decision = clock.run(model.step, prefix, tuple(out), done)
            slot += 1
            events.append(Event(WRITE, j=slot, tok=surf(decision), i=i))
            if decision == PHI:
                if done:
                    raise EngineError("policy requested a read past the end of source")
                break
            if decision == EOS:
                finished = True
                break
            out.append(decision)
            if len(out) > limit:
                raise EngineError("runaway decode")
        if finished:
            break
    if not finished:
        raise EngineError("source exhausted before the translation finished")
    events.append(Event(END))

    trace = EventTrace(events=tuple(events), run_config=run_config or RunConfig())
    return RunResult(
        final_output=tuple(out),
        trace=trace,
        snapshots=snapshot_from_trace(trace),
        withdrawals=0,
        speculations=0,
        hits=0,
        translate_seconds=clock.total,
    )


def run_speculative(
    model: SimtModel,
    predictor,
    source: Sentence,
    config: EngineConfig | None = None,
    run_config: RunConfig | None = None,
) -> RunResult:
    """Speculate-resolve loop; final output is token-identical to the baseline.

    Each read step: resolve the pending speculation against the token that
    actually arrived (commit on a hit, withdraw and recompute on a miss),
    keep decoding with the real prefix until the policy asks to read, then
    predict the next token and speculate one decision on it when the
    prediction clears the probability gate.
    """
    config = config or EngineConfig()
    _check_source(source)
    pred_vocab = getattr(predictor, "vocabulary", None)
    if pred_vocab is not None and pred_vocab.tokens != model.vocabulary.tokens:
        raise EngineError("predictor/vocabulary mismatch")

    src_len = len(source)
    limit = config.max_output if config.max_output is not None else 2 * src_len + 8
    surf = model.vocabulary.surface
    predict_clock = _Clock()
    translate_clock = _Clock()

    out: list[int] = []
    events: list[Event] = []
    slot = 0
    speculations = hits = withdrawals = 0
    pending: tuple[int, int, int] | None = None  # (slot, decision, predicted token)
    finished = False

    executor = ThreadPoolExecutor(max_workers=1) if config.mode == CONCURRENT else None

    def speculate(basis: int, prediction: Prediction | None = None) -> None:
        """Predict the token for read basis+1 and decode one decision against it."""
        nonlocal slot, speculations, pending
        prefix = source[:basis]
        if prediction is None:
            prediction = predict_clock.run(predictor.predict, prefix)
        events.append(Event(PREDICT, i=basis + 1, pred=surf(prediction.token), p=prediction.probability))
        if prediction.probability < config.tau:
            pending = None
            return
        hypothesis_done = prediction.token == EOS
        hypothesis = prefix if hypothesis_done else prefix + (prediction.token,)
        decision = translate_clock.run(model.step, hypothesis, tuple(out), hypothesis_done)
        slot += 1
        speculations += 1
        events.append(Event(SPECULATE, j=slot, tok=surf(decision), i=basis))
        pending = (slot, decision, prediction.token)

    try:
        speculate(0)
        for i in range(1, src_len + 2):
            tok = source[i - 1] if i <= src_len else EOS
            events.append(Event(READ, i=i, tok=surf(tok)))
            done = tok == EOS
            prefix = source[:min(i, src_len)]

            # The prediction for the next read only needs the tokens read so
            # far, so in concurrent mode it runs while this step resolves.
            next_prediction = None
            if not done and executor is not None:
                next_prediction = executor.submit(
                    lambda p=prefix: predict_clock.run(predictor.predict, p)
                )

            decision: int | None = None
            if pending is not None:
                pending_slot, pending_decision, predicted = pending
                pending = None
                if predicted == tok:
                    hits += 1
                    events.append(Event(COMMIT, j=pending_slot))
                    decision = pending_decision
                else:
                    withdrawals += 1
                    decision = translate_clock.run(model.step, prefix, tuple(out), done)
                    events.append(
                        Event(WITHDRAW, j=pending_slot, old=surf(pending_decision), new=surf(decision))
                    )
                if decision not in (PHI, EOS):
                    out.append(decision)

            while decision not in (PHI, EOS):
                if decision is not None and len(out) > limit:
                    raise EngineError("runaway decode")
                decision = translate_clock.run(model.step, prefix, tuple(out), done)
                slot += 1
                events.append(Event(WRITE, j=slot, tok=surf(decision), i=i))
                if decision not in (PHI, EOS):
                    out.append(decision)

            if decision == EOS:
                finished = True
                break
            if done:
                raise EngineError("policy requested a read past the end of source")
            if next_prediction is not None:
                speculate(i, prediction=next_prediction.result())
            else:
                speculate(i)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    if not finished:
        raise EngineError("source exhausted before the translation finished")
    events.append(Event(END))

    trace = EventTrace(events=tuple(events), run_config=run_config or RunConfig())
    return RunResult(
        final_output=tuple(out),
        trace=trace,
        snapshots=snapshot_from_trace(trace),
        withdrawals=withdrawals,
        speculations=speculations,
        hits=hits,
        predict_seconds=predict_clock.total,
        translate_seconds=translate_clock.total,
    )


def run_corpus(
    model: SimtModel,
    predictor,
    corpus: Sequence[Sentence],
    config: EngineConfig | None = None,
    run_config: RunConfig | None = None,
    trace_dir: str | Path | None = None,
) -> list[RunResult]:
    """Run every sentence in order; `predictor=None` runs the baseline loop.

    Sentences are independent, so aggregate metrics do not depend on
    execution order. Per-sentence errors are re-raised with the sentence
    index attached.
    """
    if not corpus:
        raise EngineError("empty corpus")
    config = config or EngineConfig()
    base = run_config or RunConfig()
    results: list[RunResult] = []
    for index, source in enumerate(corpus):
        tagged = RunConfig(
            policy=base.policy,
            param=base.param,
            tau=base.tau,
            predictor=base.predictor,
            corpus=base.corpus,
            seed=base.seed,
            sentence_index=index,
        )
        try:
            if predictor is None:
                result = run_baseline(model, source, run_config=tagged, max_output=config.max_output)
            else:
                result = run_speculative(model, predictor, source, config=config, run_config=tagged)
        except Exception as exc:
            raise EngineError(f"sentence {index}: {exc}") from exc
        results.append(result)
        if config.record_trace and trace_dir is not None:
            name = f"{tagged.policy}-{tagged.param}-tau{tagged.tau}-{tagged.predictor}-{index:05d}.jsonl"
            result.trace.save(Path(trace_dir) / name)
    return results
