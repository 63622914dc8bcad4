"""Conventional recursive purification (bilateral PBS parity check on two
pairs) as a resource comparator.

Each pair is F|phi+><phi+| + (1-F)|psi+><psi+|. Two pairs are kept when
Alice's and Bob's parities agree; the cross combinations phi+ psi+ and
psi+ phi+ are discarded, psi+ psi+ slips through.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .statecore import BELL

# qubit order for the two-pair oracle: A1, B1, A2, B2
_X_BASIS = {+1: np.array([1, 1]) / np.sqrt(2), -1: np.array([1, -1]) / np.sqrt(2)}


class NotPurifiable(ValueError):
    """Start fidelity at or below 1/2: recursion cannot increase it."""


def pan_purify_round(F: float) -> tuple[float, float]:
    """One round: returns (new fidelity, success probability)."""
    if not 0 <= F <= 1:
        raise ValueError("fidelity must lie in [0, 1]")
    p = F * F + (1 - F) * (1 - F)
    return F * F / p, p


def _binary_pair(F: float) -> np.ndarray:
    pp, sp = BELL["phi+"], BELL["psi+"]
    return F * np.outer(pp, pp.conj()) + (1 - F) * np.outer(sp, sp.conj())


@lru_cache(maxsize=1)
def _oracle_kraus() -> list[np.ndarray]:
    """Kraus maps 16 -> 4 for a kept event: parity projection, X readout of pair 2, Z fix on A1."""
    bits = np.array([[(i >> (3 - k)) & 1 for k in range(4)] for i in range(16)])  # A1 B1 A2 B2
    ops = []
    for parity in (0, 1):
        keep = ((bits[:, 0] ^ bits[:, 2]) == parity) & ((bits[:, 1] ^ bits[:, 3]) == parity)
        P = np.diag(keep.astype(complex))
        for sa in (+1, -1):
            for sb in (+1, -1):
                readout = np.kron(np.eye(4), np.kron(_X_BASIS[sa], _X_BASIS[sb])[None, :])  # 4x16
                fix = np.kron(np.diag([1, -1]), np.eye(2)) if sa * sb < 0 else np.eye(4)
                ops.append(fix @ readout @ P)
    return ops


def two_pair_output(F: float) -> tuple[np.ndarray, float]:
    """Brute-force 16-dimensional simulation of one round: (kept pair-1 state, success probability)."""
    rho = np.kron(_binary_pair(F), _binary_pair(F))
    out = sum(K @ rho @ K.conj().T for K in _oracle_kraus())
    p = float(np.real(np.trace(out)))
    return out / p, p


def two_pair_oracle(F: float) -> tuple[float, float]:
    """(new fidelity, success probability) from :func:`two_pair_output`."""
    out, p = two_pair_output(F)
    pp = BELL["phi+"]
    return float(np.real(pp.conj() @ out @ pp)), p


@dataclass
class RecursionTrace:
    start_fidelity: float
    target_fidelity: float
    rounds: list[tuple[float, float, float]] = field(default_factory=list)  # (before, after, p)

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)

    @property
    def final_fidelity(self) -> float:
        return self.rounds[-1][1] if self.rounds else self.start_fidelity

    def cumulative_pairs(self) -> list[float]:
        out, acc = [], 1.0
        for _, _, p in self.rounds:
            acc *= 2 / p
            out.append(acc)
        return out

    @property
    def pairs_consumed_expected(self) -> float:
        c = self.cumulative_pairs()
        return c[-1] if c else 1.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "F_before", "F_after", "p_success", "cumulative_expected_pairs"])
        for k, ((fb, fa, p), cum) in enumerate(zip(self.rounds, self.cumulative_pairs()), start=1):
            w.writerow([k, repr(fb), repr(fa), repr(p), repr(cum)])
        return buf.getvalue()


def resource_compare(F0: float, F_target: float, max_rounds: int = 200) -> tuple[RecursionTrace, dict]:
    """Recurse until the target is met; compare with one hyperentangled pair at fidelity 1."""
    if F0 <= 0.5:
        raise NotPurifiable(f"start fidelity {F0} <= 1/2 cannot be purified by recursion")
    if not F_target < 1:
        raise ValueError("target fidelity must be < 1")
    trace = RecursionTrace(F0, F_target)
    F = F0
    while F < F_target:
        if trace.n_rounds >= max_rounds:
            raise RuntimeError(f"target not reached within {max_rounds} rounds")
        F_new, p = pan_purify_round(F)
        trace.rounds.append((F, F_new, p))
        F = F_new
    deterministic = {"hyperentangled_pairs": 1, "output_fidelity": 1.0}
    return trace, deterministic


def comparison_dict(trace: RecursionTrace, deterministic: dict) -> dict:
    return {
        "start_fidelity": trace.start_fidelity,
        "target_fidelity": trace.target_fidelity,
        "rounds": [{"round": k, "F_before": fb, "F_after": fa, "p_success": p, "cumulative_expected_pairs": c}
                   for k, ((fb, fa, p), c) in enumerate(zip(trace.rounds, trace.cumulative_pairs()), start=1)],
        "n_rounds": trace.n_rounds,
        "final_fidelity": trace.final_fidelity,
        "pairs_consumed_expected": trace.pairs_consumed_expected,
        "deterministic": deterministic,
    }
