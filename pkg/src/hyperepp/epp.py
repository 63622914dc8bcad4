"""Deterministic purification pipeline: source, noisy channel, bit-flip step,
phase-flip step, and the branch-tree report."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import optics
from .optics import QndOutcome
from .statecore import (
    BELL,
    PHI_S,
    PSI_F,
    DensityMatrix,
    InvalidStateError,
    KrausSet,
    apply_unitary,
    check_unitary,
    fidelity,
    make_pure,
    operator_on,
    pol_marginal,
    product_vector,
)

SIMPLEX_TOL = 1e-12
BELL_ORDER = ("phi+", "phi-", "psi+", "psi-")

# Pauli errors on Bob's polarization that take phi+ to each Bell state.
_PAULI_B = {
    "phi+": np.eye(2, dtype=complex),
    "phi-": optics.SIGMA_Z,
    "psi+": optics.SIGMA_X,
    "psi-": optics.SIGMA_X @ optics.SIGMA_Z,
}


@dataclass(frozen=True)
class NoiseModel:
    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    dphi_s: float = 0.0
    dphi_f: float = 0.0
    fluctuation: object = None  # practical.FluctuationSpec

    def __post_init__(self):
        w = self.weights
        if any(not math.isfinite(x) for x in (*w, self.dphi_s, self.dphi_f)):
            raise ValueError("noise parameters must be finite")
        if min(w) < 0 or abs(sum(w) - 1) > SIMPLEX_TOL:
            raise ValueError(f"Bell weights {w} are not a probability vector")

    @property
    def weights(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    def to_dict(self) -> dict:
        out = {"a": self.a, "b": self.b, "c": self.c, "d": self.d, "dphi_s": self.dphi_s, "dphi_f": self.dphi_f}
        if self.fluctuation is not None:
            out["fluctuation"] = self.fluctuation.to_dict()
        return out


class StepBranch(NamedTuple):
    record: QndOutcome
    probability: float
    corrections: tuple[str, ...]
    state: DensityMatrix


@dataclass
class Branch:
    records: tuple[QndOutcome, ...]
    corrections: tuple[tuple[str, ...], ...]
    probability: float
    state: DensityMatrix
    fidelity: float
    error_class: str | None = None
    count: int | None = None

    def to_dict(self) -> dict:
        pol = pol_marginal(self.state)
        out = {
            "error_class": self.error_class,
            "records": [r.to_dict() for r in self.records],
            "modes": _modes(self.records),
            "corrections": [list(c) for c in self.corrections],
            "probability": self.probability,
            "fidelity": self.fidelity,
            "pol_state": {"re": pol.real.tolist(), "im": pol.imag.tolist()},
        }
        if self.count is not None:
            out["count"] = self.count
        return out


def _modes(records) -> list[str]:
    names = (("a", "b"), ("c", "d"))
    return [r.modes(*names[k]) for k, r in enumerate(records)]


@dataclass
class PurificationReport:
    branches: list[Branch]
    mode: str
    noise: NoiseModel
    target: str = "phi+"
    meta: dict = field(default_factory=dict)

    @property
    def total_probability(self) -> float:
        return float(sum(b.probability for b in self.branches))

    @property
    def min_final_fidelity(self) -> float:
        return min(b.fidelity for b in self.branches)

    @property
    def max_final_fidelity(self) -> float:
        return max(b.fidelity for b in self.branches)

    @property
    def mean_final_fidelity(self) -> float:
        return float(sum(b.probability * b.fidelity for b in self.branches) / self.total_probability)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "target": self.target,
            "noise": self.noise.to_dict(),
            **self.meta,
            "total_probability": self.total_probability,
            "min_final_fidelity": self.min_final_fidelity,
            "max_final_fidelity": self.max_final_fidelity,
            "mean_final_fidelity": self.mean_final_fidelity,
            "branches": [b.to_dict() for b in self.branches],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["error_class", "step1_outcome", "step1_modes", "step2_outcome", "step2_modes",
                    "corrections", "probability", "fidelity"])
        for b in self.branches:
            modes = _modes(b.records)
            row = [b.error_class or ""]
            for k in range(2):
                if k < len(b.records):
                    row += ["/".join(b.records[k].phase_labels()), modes[k]]
                else:
                    row += ["", ""]
            row += [";".join("+".join(c) or "I" for c in b.corrections), repr(b.probability), repr(b.fidelity)]
            w.writerow(row)
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"mode={self.mode} target={self.target} total_probability={self.total_probability:.12f}",
                 f"fidelity min={self.min_final_fidelity:.12f} max={self.max_final_fidelity:.12f}",
                 f"{'class':6} {'step1':18} {'step2':18} {'prob':>14} {'fidelity':>14}  corrections"]
        for b in self.branches:
            s = [f"{'/'.join(r.phase_labels())}@{m}" for r, m in zip(b.records, _modes(b.records))]
            corr = ";".join("+".join(c) or "I" for c in b.corrections)
            lines.append(f"{b.error_class or '-':6} {s[0]:18} {s[1] if len(s) > 1 else '':18} "
                         f"{b.probability:14.10f} {b.fidelity:14.10f}  {corr}")
        return "\n".join(lines) + "\n"


# -- states and channel --------------------------------------------------------

def source_vector() -> np.ndarray:
    return product_vector(BELL["phi+"], PSI_F, PHI_S)


@lru_cache(maxsize=1)
def source_state() -> DensityMatrix:
    """(|HH>+|VV>)(|w1w2>+|w2w1>)(|a1b1>+|a2b2>)/(2 sqrt 2)."""
    return make_pure(source_vector())


@lru_cache(maxsize=None)
def _pauli_b_unitary(label: str) -> np.ndarray:
    U = check_unitary(operator_on("pol_B", _PAULI_B[label]))
    U.setflags(write=False)
    return U


def pauli_kraus(n: NoiseModel) -> KrausSet:
    ops = [math.sqrt(w) * operator_on("pol_B", _PAULI_B[k]) for k, w in zip(BELL_ORDER, n.weights)]
    return KrausSet(ops, BELL_ORDER)


def _carrier_phases(rho: DensityMatrix, n: NoiseModel) -> DensityMatrix:
    if n.dphi_s:
        rho = optics.local_phase(rho, "rail_B", n.dphi_s)
    if n.dphi_f:
        rho = optics.local_phase(rho, "freq_A", n.dphi_f)
    return rho


def apply_channel(rho: DensityMatrix, n: NoiseModel) -> DensityMatrix:
    """Pauli channel on Bob's polarization, then spatial and frequency dispersion phases."""
    if not isinstance(n, NoiseModel):
        raise ValueError("apply_channel needs a NoiseModel")
    m = rho.matrix
    out = sum(K @ m @ K.conj().T for K in pauli_kraus(n).operators)
    return _carrier_phases(DensityMatrix((out + out.conj().T) / 2), n)


def channel_branches(n: NoiseModel, rho: DensityMatrix | None = None):
    """The channel output as a weighted list of pure error classes ``(label, weight, state)``."""
    rho = source_state() if rho is None else rho
    out = []
    for k, w in zip(BELL_ORDER, n.weights):
        if w > 0:
            out.append((k, w, _carrier_phases(apply_unitary(rho, _pauli_b_unitary(k), checked=True), n)))
    return out


# -- purification steps ----------------------------------------------------------

def _correct(rho: DensityMatrix, outcome: QndOutcome, party: str) -> tuple[DensityMatrix, tuple[str, ...]]:
    if outcome.equal:
        return rho, ()
    return optics.sigma_x(rho, party), (f"sigma_x:{party}",)


def bitflip_step(rho: DensityMatrix, correct_party: str = "B") -> list[StepBranch]:
    """Spatial-rail parity check, then sigma_x for unequal probe outcomes."""
    out = []
    for outcome, p, post in optics.qnd_pbs(rho):
        post, corr = _correct(post, outcome, correct_party)
        out.append(StepBranch(outcome, p, corr, post))
    return out


def phaseflip_step(rho: DensityMatrix, correct_party: str = "B", align: bool = True) -> list[StepBranch]:
    """Hadamards, WDM routing, frequency-rail parity check, sigma_x, frequency erasure.

    With ``align`` the branches where the reference party saw no shift get
    sigma_x on both photons, so every branch ends in (|HH>+e^{i dphi_f}|VV>)/sqrt2.
    """
    if not optics.rails_reset(rho):
        raise InvalidStateError("phase-flip step needs both rails reset to rail-1")
    rho = optics.wdm(optics.hadamard_pol(rho, "both"))
    out = []
    for outcome, p, post in optics.qnd_pbs(rho):
        post, corr = _correct(post, outcome, correct_party)
        post = optics.frequency_erase(post)
        ref_phase = outcome.bob_phase if correct_party == "A" else outcome.alice_phase
        if align and ref_phase == 0:
            post = optics.sigma_x(post, "both")
            corr = corr + ("sigma_x:A", "sigma_x:B")
        out.append(StepBranch(outcome, p, corr, post))
    return out


def pol_fidelity(rho: DensityMatrix, target: str = "phi+") -> float:
    return fidelity(pol_marginal(rho), BELL[target])


def after_bitflip(n: NoiseModel, correct_party: str = "B") -> DensityMatrix:
    """Branch-averaged state after the bit-flip step on the channel output."""
    branches = bitflip_step(apply_channel(source_state(), n), correct_party)
    return DensityMatrix(sum(b.probability * b.state.matrix for b in branches))


def _two_steps(rho: DensityMatrix, correct_party: str, align: bool):
    for s1 in bitflip_step(rho, correct_party):
        reset = optics.reset_rails(s1.state, s1.record)
        for s2 in phaseflip_step(reset, correct_party, align):
            yield s1, s2


def _leaf(s1, s2, weight, error_class=None) -> Branch:
    return Branch(
        records=(s1.record, s2.record),
        corrections=(s1.corrections, s2.corrections),
        probability=weight * s1.probability * s2.probability,
        state=s2.state,
        fidelity=pol_fidelity(s2.state),
        error_class=error_class,
    )


def run_epp(
    n: NoiseModel,
    mode: str = "exhaustive",
    seed: int = 0,
    trials: int = 10_000,
    representation: str = "tree",
    correct_party: str = "B",
    align: bool = True,
) -> PurificationReport:
    """Run the two-step protocol on the channel output.

    ``exhaustive`` enumerates every branch. ``representation="tree"`` expands
    the channel into its four Pauli error classes; ``"mixed"`` pushes the
    single mixed state through the measurements. ``sampled`` draws
    ``trials`` trajectories, trial ``i`` using a generator seeded by
    ``(seed, i)``.
    """
    if mode == "exhaustive":
        if n.fluctuation is not None:
            raise ValueError("exhaustive mode needs a fixed dphi_f; use practical.fluctuating_ensemble "
                             "or sampled mode for a fluctuating channel")
        if representation == "tree":
            branches = [
                _leaf(s1, s2, w, label)
                for label, w, rho in channel_branches(n)
                for s1, s2 in _two_steps(rho, correct_party, align)
            ]
        elif representation == "mixed":
            rho = apply_channel(source_state(), n)
            branches = [_leaf(s1, s2, 1.0) for s1, s2 in _two_steps(rho, correct_party, align)]
        else:
            raise ValueError(f"unknown representation {representation!r}")
        return PurificationReport(branches, "exhaustive", n, meta={"representation": representation})
    if mode == "sampled":
        return _run_sampled(n, seed, trials, correct_party, align)
    raise ValueError(f"unknown mode {mode!r}")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def _run_sampled(n: NoiseModel, seed: int, trials: int, correct_party: str, align: bool) -> PurificationReport:
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    weights = np.array(n.weights)
    fluct = None
    if n.fluctuation is not None:
        fluct = n.fluctuation.deltas(seed)

    step1_cache: dict = {}
    step2_cache: dict = {}
    counts: dict = {}
    sums: dict = {}
    for i in range(trials):
        rng = trial_rng(seed, i)
        k = BELL_ORDER[rng.choice(4, p=weights)]
        dphi_f = n.dphi_f
        if fluct is not None:
            dphi_f = n.dphi_f + fluct[rng.integers(len(fluct))]
        key1 = (k, dphi_f)
        if key1 not in step1_cache:
            local = NoiseModel(*n.weights, n.dphi_s, dphi_f)
            rho = _carrier_phases(apply_unitary(source_state(), _pauli_b_unitary(k), checked=True), local)
            step1_cache[key1] = bitflip_step(rho, correct_party)
        s1_all = step1_cache[key1]
        s1 = s1_all[rng.choice(len(s1_all), p=_normalized([s.probability for s in s1_all]))]
        key2 = (key1, s1.record)
        if key2 not in step2_cache:
            step2_cache[key2] = phaseflip_step(optics.reset_rails(s1.state, s1.record), correct_party, align)
        s2_all = step2_cache[key2]
        s2 = s2_all[rng.choice(len(s2_all), p=_normalized([s.probability for s in s2_all]))]
        leaf = (k, s1.record, s2.record)
        counts[leaf] = counts.get(leaf, 0) + 1
        if leaf not in sums:
            sums[leaf] = [s1.corrections, s2.corrections, np.zeros_like(s2.state.matrix)]
        sums[leaf][2] = sums[leaf][2] + s2.state.matrix

    branches = []
    for leaf in sorted(counts, key=_leaf_sort_key):
        c = counts[leaf]
        corr1, corr2, acc = sums[leaf]
        state = DensityMatrix(acc / c)
        branches.append(Branch((leaf[1], leaf[2]), (corr1, corr2), c / trials, state,
                               pol_fidelity(state), error_class=leaf[0], count=c))
    return PurificationReport(branches, "sampled", n, meta={"seed": seed, "trials": trials})


def _normalized(p):
    p = np.asarray(p, dtype=float)
    return p / p.sum()


def _leaf_sort_key(leaf):
    k, r1, r2 = leaf
    return (BELL_ORDER.index(k), -r1.alice_phase, -r1.bob_phase, -r2.alice_phase, -r2.bob_phase)


def aggregate_by_records(branches: list[Branch]) -> dict:
    """Collapse leaves that share measurement records: ``{records: (probability, state matrix)}``."""
    out: dict = {}
    for b in branches:
        p, m = out.get(b.records, (0.0, 0))
        out[b.records] = (p + b.probability, m + b.probability * b.state.matrix)
    return {k: (p, m / p) for k, (p, m) in out.items()}
