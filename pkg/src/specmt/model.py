"""Deterministic incremental translation model and its read/write policies.

The model translates monotonically: output position p renders source token p
through the lexicon, with the successor token (when visible) selecting the
conditional rule for ambiguous entries. A policy decides per call whether to
emit the next target token or to request more input by returning PHI.
Determinism is load-bearing: identical arguments must always produce the
identical decision, because the speculative engine reuses outputs computed
from predicted prefixes whenever the prediction turns out to be correct.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lexicon import Lexicon
from .vocab import EOS, PHI, Sentence, Vocabulary

WAIT_K = "wait_k"
ADAPTIVE = "adaptive"


class ModelError(ValueError):
    pass


def adaptive_threshold(latency_weight: float) -> float:
    """Confidence needed to write under the adaptive policy: min(1.0, 0.4 + L).

    Ambiguous tokens without a visible successor carry confidence 0.5, so
    latency weights L <= 0.1 accept those risky early writes while larger
    weights hold back until the conditioning token arrives.
    """
    return min(1.0, 0.4 + latency_weight)


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    k: int | None = None
    latency_weight: float | None = None

    def __post_init__(self) -> None:
        if self.kind == WAIT_K:
            if self.k is None or self.latency_weight is not None:
                raise ModelError("wait-k policy takes exactly k")
            if self.k < 1:
                raise ModelError("k must be >= 1")
        elif self.kind == ADAPTIVE:
            if self.latency_weight is None or self.k is not None:
                raise ModelError("adaptive policy takes exactly a latency weight")
            if not 0.0 < self.latency_weight <= 1.0:
                raise ModelError("latency weight must be in (0, 1]")
        else:
            raise ModelError(f"unknown policy kind {self.kind!r}")

    @staticmethod
    def wait_k(k: int) -> PolicyConfig:
        return PolicyConfig(kind=WAIT_K, k=k)

    @staticmethod
    def adaptive(latency_weight: float) -> PolicyConfig:
        return PolicyConfig(kind=ADAPTIVE, latency_weight=latency_weight)

    @property
    def param(self) -> float:
        return float(self.k if self.kind == WAIT_K else self.latency_weight)

    def describe(self) -> str:
        if self.kind == WAIT_K:
            return f"wait_k(k={self.k})"
        return f"adaptive(L={self.latency_weight}, threshold={adaptive_threshold(self.latency_weight)})"


@dataclass(frozen=True)
class SimtModel:
    """Stateless translator: the full decision is a function of step() arguments."""

    lexicon: Lexicon
    policy: PolicyConfig
    vocabulary: Vocabulary

    def step(
        self,
        source_prefix: Sentence,
        target_prefix: Sentence,
        source_done: bool = False,
    ) -> int:
        """One incremental decision given the visible prefixes.

        Returns PHI when the policy wants another source token, EOS when the
        translation is complete, and the next target token id otherwise.
        `source_done` marks that the end of the source stream has been
        observed (or is being hypothesized, during speculation on a predicted
        end of sequence); once set, the policy never reads again.
        """
        if PHI in target_prefix:
            raise ModelError("target prefix must be PHI-free")
        written = len(target_prefix)
        pos = written + 1  # 1-based source position to translate next
        if source_done and pos > len(source_prefix):
            return EOS

        if self.policy.kind == WAIT_K:
            if not source_done and len(source_prefix) < written + self.policy.k:
                return PHI
        else:
            if not self._adaptive_writes(source_prefix, pos, source_done):
                return PHI

        token = source_prefix[pos - 1]
        next_token = source_prefix[pos] if pos < len(source_prefix) else None
        return self.lexicon.translate(token, next_token)

    def _adaptive_writes(self, source_prefix: Sentence, pos: int, source_done: bool) -> bool:
        if source_done:
            return True
        if pos > len(source_prefix):
            return False  # nothing to translate yet
        token = source_prefix[pos - 1]
        if token not in self.lexicon.ambiguous or pos < len(source_prefix):
            confidence = 1.0
        else:
            confidence = 0.5
        return confidence >= adaptive_threshold(self.policy.latency_weight or 0.0)

    def full_sentence_translate(self, source: Sentence) -> Sentence:
        """Whole-sentence translation: conditional rules apply wherever defined.

        This is the quality upper bound and the reference generator.
        """
        if not source:
            raise ModelError("empty source")
        out = []
        for pos, token in enumerate(source):
            next_token = source[pos + 1] if pos + 1 < len(source) else None
            out.append(self.lexicon.translate(token, next_token))
        return tuple(out)
