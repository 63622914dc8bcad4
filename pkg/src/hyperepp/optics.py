"""Optical elements of the purification setups as operators on the 64-dim space.

The PBS + cross-Kerr parity check is modeled as an ideal projective QND:
a party's probe picks up theta iff the photon's polarization bit equals its
rail bit, and the photon then leaves on the rail numbered by the outcome
(theta -> rail 2, 0 -> rail 1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .statecore import (
    DIM,
    ContractViolation,
    DensityMatrix,
    InvalidStateError,
    KrausSet,
    TRACE_TOL,
    apply_unitary,
    coord_bits,
    apply_phases,
    check_unitary,
    diagonal_unitary,
    measure,
    operator_on,
    permutation_unitary,
    projector,
    BasisLabel,
)

PARTIES = ("A", "B")

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def _parties(party: str) -> tuple[str, ...]:
    if party in ("both", "AB"):
        return PARTIES
    if party not in PARTIES:
        raise ValueError(f"party must be 'A', 'B' or 'both', got {party!r}")
    return (party,)


@dataclass(frozen=True)
class QndOutcome:
    """Probe outcomes (1 = phase theta, 0 = no shift) and the rails the photons leave on."""

    alice_phase: int
    bob_phase: int
    alice_rail: int
    bob_rail: int

    @property
    def equal(self) -> bool:
        return self.alice_phase == self.bob_phase

    def phase_labels(self) -> tuple[str, str]:
        return tuple("theta" if p else "0" for p in (self.alice_phase, self.bob_phase))

    def modes(self, alice: str = "a", bob: str = "b") -> str:
        return f"{alice}{self.alice_rail + 1}{bob}{self.bob_rail + 1}"

    def to_dict(self) -> dict:
        a, b = self.phase_labels()
        return {"alice_phase": a, "bob_phase": b, "alice_rail": self.alice_rail + 1, "bob_rail": self.bob_rail + 1}


@dataclass(frozen=True)
class RoutingMap:
    """Per-party frequency-bit -> rail-bit routing of a WDM."""

    alice: tuple[int, int] = (0, 1)  # w1 -> c1, w2 -> c2
    bob: tuple[int, int] = (1, 0)  # w1 -> d2, w2 -> d1

    def __post_init__(self):
        for name, m in (("alice", self.alice), ("bob", self.bob)):
            if sorted(m) != [0, 1]:
                raise ValueError(f"{name} routing {m} is not a bijection on {{0, 1}}")


DEFAULT_ROUTING = RoutingMap()


# -- unitaries ---------------------------------------------------------------

def _frozen(U: np.ndarray) -> np.ndarray:
    U = check_unitary(U)
    U.setflags(write=False)
    return U


@lru_cache(maxsize=None)
def sigma_x_unitary(party: str) -> np.ndarray:
    U = np.eye(DIM, dtype=complex)
    for p in _parties(party):
        U = operator_on(f"pol_{p}", SIGMA_X) @ U
    return _frozen(U)


@lru_cache(maxsize=None)
def hadamard_unitary(party: str) -> np.ndarray:
    U = np.eye(DIM, dtype=complex)
    for p in _parties(party):
        U = operator_on(f"pol_{p}", HADAMARD) @ U
    return _frozen(U)


def local_phase_flags(coord: str, value: int = 1) -> np.ndarray:
    if value not in (0, 1):
        raise ValueError("coordinate value must be 0 or 1")
    return (coord_bits(coord) == value).astype(float)


def local_phase_unitary(coord: str, phi: float, value: int = 1) -> np.ndarray:
    return diagonal_unitary(phi * local_phase_flags(coord, value))


@lru_cache(maxsize=None)
def wdm_unitary(routing: RoutingMap = DEFAULT_ROUTING) -> np.ndarray:
    # rail ^= map(freq); on a reset rail (=0) this writes rail := map(freq)
    def relabel(b):
        return b.replace(rail_A=b.rail_A ^ routing.alice[b.freq_A], rail_B=b.rail_B ^ routing.bob[b.freq_B])

    return _frozen(permutation_unitary(relabel))


@lru_cache(maxsize=None)
def _qnd_unitary() -> np.ndarray:
    # rail := [pol == rail] for each party; afterwards rail holds the outcome bit
    def relabel(b):
        return b.replace(rail_A=int(b.pol_A == b.rail_A), rail_B=int(b.pol_B == b.rail_B))

    return _frozen(permutation_unitary(relabel))


@lru_cache(maxsize=None)
def qnd_kraus() -> KrausSet:
    """Kraus set of the two-party PBS/Kerr parity check, labelled by ``QndOutcome``."""
    U = _qnd_unitary()
    ops, labels = [], []
    for oa in (1, 0):
        for ob in (1, 0):
            P = projector(lambda b, oa=oa, ob=ob: b.rail_A == oa and b.rail_B == ob)
            ops.append(P @ U)
            labels.append(QndOutcome(oa, ob, oa, ob))
    return KrausSet(ops, labels)


# -- element operations ------------------------------------------------------

def qnd_pbs(rho: DensityMatrix) -> list[tuple[QndOutcome, float, DensityMatrix]]:
    """Both parties' parity checks; branches ordered (theta,theta), (theta,0), (0,theta), (0,0)."""
    return measure(rho, qnd_kraus())


def wdm(rho: DensityMatrix, routing: RoutingMap = DEFAULT_ROUTING, inverse: bool = False) -> DensityMatrix:
    U = wdm_unitary(routing)
    return apply_unitary(rho, U.conj().T if inverse else U, checked=True)


def hadamard_pol(rho: DensityMatrix, party: str = "both") -> DensityMatrix:
    return apply_unitary(rho, hadamard_unitary(party), checked=True)


def sigma_x(rho: DensityMatrix, party: str = "B") -> DensityMatrix:
    return apply_unitary(rho, sigma_x_unitary(party), checked=True)


def local_phase(rho: DensityMatrix, coord: str, phi: float, value: int = 1) -> DensityMatrix:
    """Multiply amplitudes whose ``coord`` bit equals ``value`` by exp(i*phi)."""
    return apply_phases(rho, phi * local_phase_flags(coord, value))


@lru_cache(maxsize=None)
def _erase_map() -> np.ndarray:
    M = np.zeros((DIM, DIM), dtype=complex)
    for i in range(DIM):
        M[BasisLabel.from_index(i).replace(freq_A=0, freq_B=0).index, i] = 1.0
    return M


def frequency_erase(rho: DensityMatrix) -> DensityMatrix:
    """Coherently relabel both photons' frequencies to w1 (up-conversion).

    This is an isometry only on states whose frequency bits are fixed by the
    other coordinates, which is what the phase-flip step leaves behind. Any
    other input raises ``InvalidStateError``.
    """
    M = _erase_map()
    out = M @ rho.matrix @ M.T
    tr = np.trace(out).real
    if abs(tr - 1) > 1e-10:
        raise InvalidStateError(
            "frequency is not a function of the remaining coordinates; erasure would not be isometric"
        )
    out = (out + out.conj().T) / 2
    return DensityMatrix(out / tr if abs(tr - 1) > TRACE_TOL else out)


@lru_cache(maxsize=None)
def _rail_flip(flip_a: int, flip_b: int) -> np.ndarray:
    return _frozen(permutation_unitary(lambda b: b.replace(rail_A=b.rail_A ^ flip_a, rail_B=b.rail_B ^ flip_b)))


def reset_rails(rho: DensityMatrix, outcome: QndOutcome) -> DensityMatrix:
    """Return rails emitted after a parity check to rail-1 using the classical record."""
    return apply_unitary(rho, _rail_flip(outcome.alice_rail, outcome.bob_rail), checked=True)


def rails_reset(rho: DensityMatrix, tol: float = 1e-12) -> bool:
    on_rail1 = (coord_bits("rail_A") == 0) & (coord_bits("rail_B") == 0)
    return abs(np.real(np.diag(rho.matrix))[on_rail1].sum() - 1) <= tol


# -- serializable element descriptors ----------------------------------------

@dataclass(frozen=True)
class Element:
    """A declarative optical element, ``{"element": name, "params": {...}}`` on the wire."""

    element: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.element not in _ELEMENTS:
            raise ValueError(f"unknown element {self.element!r}; known: {sorted(_ELEMENTS)}")

    def apply(self, rho: DensityMatrix):
        return _ELEMENTS[self.element](rho, **self.params)

    def to_dict(self) -> dict:
        return {"element": self.element, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, doc: dict) -> "Element":
        extra = set(doc) - {"element", "params"}
        if extra:
            raise ValueError(f"unknown element keys {sorted(extra)}")
        return cls(doc["element"], dict(doc.get("params", {})))


def _wdm_element(rho, alice=(0, 1), bob=(1, 0), inverse=False):
    return wdm(rho, RoutingMap(tuple(alice), tuple(bob)), inverse=inverse)


_ELEMENTS = {
    "qnd_pbs": qnd_pbs,
    "wdm": _wdm_element,
    "hadamard_pol": hadamard_pol,
    "sigma_x": sigma_x,
    "local_phase": local_phase,
    "frequency_erase": frequency_erase,
}


def load_pipeline(text: str) -> list[Element]:
    return [Element.from_dict(d) for d in json.loads(text)]


def run_pipeline(rho: DensityMatrix, elements: list[Element]):
    """Apply deterministic elements in order. A ``qnd_pbs`` element must be last."""
    for k, el in enumerate(elements):
        rho = el.apply(rho)
        if el.element == "qnd_pbs":
            if k != len(elements) - 1:
                raise ContractViolation("qnd_pbs branches the state and must end a pipeline")
            return rho
    return rho
