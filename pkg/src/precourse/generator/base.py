"""Uniform recourse-generator interface.

A generator maps (state, weights) to a candidate intervention, optionally
constrained to begin with a given first action. Implementations must be
deterministic functions of their inputs so sessions can be replayed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

from ..core.actions import Action, Intervention
from ..core.schema import State
from ..core.scm import ScmWeights

FAVORABLE_LABEL = 1


@dataclass(frozen=True)
class GenerationResult:
    intervention: Intervention
    success: bool
    rules: tuple = ()  # one explanation per action, when the generator emits them

    def __iter__(self):
        return iter((self.intervention, self.success))


class RecourseGenerator:
    """Interface shared by all intervention generators."""

    def generate(self, state: State, weights: ScmWeights,
                 forced_first: Action | None = None) -> GenerationResult:
        raise NotImplementedError


def stable_seed(*parts: object) -> int:
    """Deterministic 63-bit seed from reprs; stable across processes."""
    payload = "|".join(repr(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


def intervention_signature(actions: Sequence[Action]) -> tuple:
    return tuple(a.key() for a in actions)
