"""Nonlocal Bell-state analysis with two parity-check rounds and LOCC only."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import optics
from .epp import BELL_ORDER, pol_fidelity
from .statecore import BELL, PHI_S, PSI_F, make_pure, product_vector

BELL_LABELS = BELL_ORDER
BELL_TOL = 1e-12

# (round1_equal, round2_equal) -> label
DECISION = {
    (True, True): "phi+",
    (True, False): "phi-",
    (False, True): "psi+",
    (False, False): "psi-",
}


class ClassificationUndefined(ValueError):
    """The polarization input is not one of the four Bell states."""


@dataclass
class NbsaRecord:
    round1_equal: bool
    round2_equal: bool
    outcomes: tuple[optics.QndOutcome, optics.QndOutcome]
    operations: list[str] = field(default_factory=list)
    probability: float = 1.0
    final_pol_fidelity: float | None = None

    @property
    def label(self) -> str:
        return DECISION[(self.round1_equal, self.round2_equal)]

    def to_dict(self) -> dict:
        return {
            "round1_equal": self.round1_equal,
            "round2_equal": self.round2_equal,
            "outcomes": [o.to_dict() for o in self.outcomes],
            "operations": list(self.operations),
            "probability": self.probability,
            "classification": self.label,
            "final_pol_fidelity_phi+": self.final_pol_fidelity,
        }


def _pol_vector(state) -> tuple[np.ndarray, str]:
    if isinstance(state, str):
        if state not in BELL:
            raise ValueError(f"unknown Bell label {state!r}")
        return BELL[state], state
    v = np.asarray(state, dtype=complex)
    if v.shape != (4,):
        raise ValueError("polarization input must be a Bell label or a 4-vector")
    v = v / np.linalg.norm(v)
    for label, bell in BELL.items():
        if abs(abs(np.vdot(bell, v)) ** 2 - 1) <= BELL_TOL:
            return v, label
    raise ClassificationUndefined("polarization input is not a Bell state; classification is undefined")


def nbsa_branches(state) -> list[NbsaRecord]:
    """Run both rounds on ``state`` (x) Psi_f (x) Phi_s and return every measurement branch."""
    pol, _ = _pol_vector(state)
    rho = make_pure(product_vector(pol, PSI_F, PHI_S))
    records = []
    for o1, p1, post1 in optics.qnd_pbs(rho):
        ops = []
        if not o1.equal:
            post1 = optics.sigma_x(post1, "B")
            ops.append("sigma_x:B")
        post1 = optics.hadamard_pol(optics.reset_rails(post1, o1), "both")
        ops += ["reset_rails", "hadamard:A", "hadamard:B", "wdm"]
        routed = optics.wdm(post1)
        for o2, p2, post2 in optics.qnd_pbs(routed):
            ops2 = list(ops)
            if not o2.equal:
                post2 = optics.sigma_x(post2, "B")
                ops2.append("sigma_x:B")
            final = optics.frequency_erase(post2)
            ops2.append("frequency_erase")
            records.append(NbsaRecord(o1.equal, o2.equal, (o1, o2), ops2, p1 * p2, pol_fidelity(final)))
    return records


def nbsa_classify(state) -> tuple[str, NbsaRecord]:
    """Classify a Bell-state input; every branch must agree, else ``RuntimeError``."""
    branches = nbsa_branches(state)
    labels = {b.label for b in branches}
    if len(labels) != 1:
        raise RuntimeError(f"branches disagree on the classification: {sorted(labels)}")
    return labels.pop(), branches[0]


def nbsa_truth_table() -> dict[str, list[NbsaRecord]]:
    return {label: nbsa_branches(label) for label in BELL_LABELS}


def confusion_matrix() -> np.ndarray:
    """Probability-weighted confusion matrix, rows = input, columns = classification."""
    table = nbsa_truth_table()
    m = np.zeros((4, 4))
    for i, label in enumerate(BELL_LABELS):
        for rec in table[label]:
            m[i, BELL_LABELS.index(rec.label)] += rec.probability
    return m


def truth_table_dict() -> dict:
    out = {}
    for label, recs in nbsa_truth_table().items():
        out[label] = {
            "round1_equal": recs[0].round1_equal,
            "round2_equal": recs[0].round2_equal,
            "classification": recs[0].label,
            "branches": [r.to_dict() for r in recs],
            "total_probability": sum(r.probability for r in recs),
        }
    return out


def truth_table_text() -> str:
    lines = [f"{'input':6} {'round1':8} {'round2':8} {'class':6} {'branches':>8} {'prob':>8}"]
    for label, row in truth_table_dict().items():
        eq = lambda x: "equal" if x else "unequal"  # noqa: E731
        lines.append(f"{label:6} {eq(row['round1_equal']):8} {eq(row['round2_equal']):8} "
                     f"{row['classification']:6} {len(row['branches']):8d} {row['total_probability']:8.4f}")
    return "\n".join(lines) + "\n"
