"""Dense state algebra for one photon pair carrying polarization, frequency and
spatial-rail qubits.

The joint space is 64-dimensional and ordered by six bits
``(pol_A, pol_B, freq_A, freq_B, rail_A, rail_B)``, most significant first::

    index = 32*pol_A + 16*pol_B + 8*freq_A + 4*freq_B + 2*rail_A + rail_B

with H=0/V=1, w1=0/w2=1 and rail-1=0/rail-2=1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

DIM = 64
COORDS = ("pol_A", "pol_B", "freq_A", "freq_B", "rail_A", "rail_B")
DOFS = {"pol": ("pol_A", "pol_B"), "freq": ("freq_A", "freq_B"), "rail": ("rail_A", "rail_B")}

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
UNITARY_TOL = 1e-12
ZERO_PROB = 1e-14
REPAIR_BELOW = 1e-6  # branch probability under which post-states get a PSD repair


class InvalidStateError(ValueError):
    """Raised when an array cannot represent a valid quantum state."""


class ContractViolation(ValueError):
    """Raised when an operator violates its algebraic contract (unitarity, completeness)."""


class BasisLabel(NamedTuple):
    pol_A: int
    pol_B: int
    freq_A: int
    freq_B: int
    rail_A: int
    rail_B: int

    @property
    def index(self) -> int:
        i = 0
        for bit in self:
            if bit not in (0, 1):
                raise ValueError(f"basis coordinates are bits, got {tuple(self)}")
            i = 2 * i + bit
        return i

    @classmethod
    def from_index(cls, i: int) -> "BasisLabel":
        if not 0 <= i < DIM:
            raise ValueError(f"index {i} outside 0..{DIM - 1}")
        return cls(*((i >> (5 - k)) & 1 for k in range(6)))

    def replace(self, **bits) -> "BasisLabel":
        return self._replace(**bits)


def coord_position(coord: str) -> int:
    try:
        return COORDS.index(coord)
    except ValueError:
        raise ValueError(f"unknown coordinate {coord!r}; expected one of {COORDS}") from None


def ket(*, pol_A=0, pol_B=0, freq_A=0, freq_B=0, rail_A=0, rail_B=0) -> np.ndarray:
    """Computational basis vector for the given bits."""
    v = np.zeros(DIM, dtype=complex)
    v[BasisLabel(pol_A, pol_B, freq_A, freq_B, rail_A, rail_B).index] = 1.0
    return v


def product_vector(pol: Sequence[complex], freq: Sequence[complex], rail: Sequence[complex]) -> np.ndarray:
    """Tensor three 4-dim two-party vectors (ordered AB each) into the 64-dim space."""
    return np.kron(np.kron(np.asarray(pol, complex), np.asarray(freq, complex)), np.asarray(rail, complex))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Immutable 64x64 density matrix.

    Construction checks Hermiticity and unit trace. Positivity is checked by
    :meth:`validate` since it needs an eigendecomposition.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (DIM, DIM):
            raise InvalidStateError(f"expected {DIM}x{DIM} matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise InvalidStateError("matrix is not Hermitian")
        if abs(np.trace(m) - 1) > TRACE_TOL:
            raise InvalidStateError(f"trace is {np.trace(m).real:.15g}, expected 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def validate(self) -> "DensityMatrix":
        if np.linalg.eigvalsh(self.matrix).min() < -PSD_TOL:
            raise InvalidStateError("matrix is not positive semidefinite")
        return self

    @property
    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix.T, self.matrix)))

    def allclose(self, other: "DensityMatrix | np.ndarray", atol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.matrix - np.asarray(other))) <= atol)

    def to_json(self) -> str:
        return json.dumps({"basis": "v1", "re": self.matrix.real.tolist(), "im": self.matrix.imag.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix":
        doc = json.loads(text)
        if doc.get("basis") != "v1":
            raise InvalidStateError(f"unsupported basis tag {doc.get('basis')!r}")
        re, im = np.asarray(doc["re"], dtype=float), np.asarray(doc["im"], dtype=float)
        if re.shape != (DIM, DIM) or im.shape != (DIM, DIM):
            raise InvalidStateError(f"state dump must be {DIM}x{DIM}, got {re.shape} / {im.shape}")
        return cls(re + 1j * im)


class KrausSet:
    """Generalized measurement: labelled operators with sum K^dag K = I."""

    def __init__(self, operators: Sequence[np.ndarray], labels: Sequence | None = None):
        ops = [np.asarray(k, dtype=complex) for k in operators]
        if not ops:
            raise ContractViolation("empty Kraus set")
        dim = ops[0].shape[1]
        if any(k.shape[1] != dim for k in ops):
            raise ContractViolation("Kraus operators have mismatched input dimension")
        total = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(total - np.eye(dim))) > UNITARY_TOL:
            raise ContractViolation("Kraus set is not complete (sum K^dag K != I)")
        self.operators = tuple(ops)
        self.labels = tuple(labels) if labels is not None else tuple(range(len(ops)))
        if len(self.labels) != len(ops):
            raise ValueError("one label per Kraus operator required")

    def __len__(self):
        return len(self.operators)


def _as_array(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def make_pure(amplitudes: Iterable[complex]) -> DensityMatrix:
    psi = np.asarray(list(amplitudes) if not isinstance(amplitudes, np.ndarray) else amplitudes, dtype=complex)
    if psi.shape != (DIM,):
        raise InvalidStateError(f"expected {DIM} amplitudes, got shape {psi.shape}")
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise InvalidStateError("all-zero amplitude vector")
    psi = psi / norm
    return DensityMatrix(np.outer(psi, psi.conj()))


def maximally_mixed() -> DensityMatrix:
    return DensityMatrix(np.eye(DIM) / DIM)


def mix(weights: Sequence[float], states: Sequence[DensityMatrix]) -> DensityMatrix:
    return DensityMatrix(sum(w * s.matrix for w, s in zip(weights, states)))


def check_unitary(U: np.ndarray) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.shape != (DIM, DIM):
        raise ContractViolation(f"expected {DIM}x{DIM} operator, got {U.shape}")
    if np.max(np.abs(U.conj().T @ U - np.eye(DIM))) > UNITARY_TOL:
        raise ContractViolation("operator is not unitary")
    return U


def apply_unitary(rho: DensityMatrix, U: np.ndarray, *, checked: bool = False) -> DensityMatrix:
    """U rho U^dag. ``checked=True`` skips the unitarity test for operators verified at build time."""
    if not checked:
        U = check_unitary(U)
    return DensityMatrix(_hermitize(U @ _as_array(rho) @ U.conj().T))


def apply_phases(rho: DensityMatrix, phases: np.ndarray) -> DensityMatrix:
    """Apply the diagonal unitary diag(exp(i*phases)) without forming it."""
    ph = np.exp(1j * np.asarray(phases, dtype=float))
    return DensityMatrix(_as_array(rho) * np.outer(ph, ph.conj()))


def _hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def measure(rho: DensityMatrix, kraus: KrausSet) -> list[tuple[object, float, DensityMatrix]]:
    """Return ``(label, probability, post_state)`` for every nonzero branch.

    Probabilities are ``Tr(K rho K^dag)``; post-states are renormalized.
    """
    if not isinstance(kraus, KrausSet):
        kraus = KrausSet(kraus)
    m = _as_array(rho)
    out = []
    for label, K in zip(kraus.labels, kraus.operators):
        post = K @ m @ K.conj().T
        p = float(np.real(np.trace(post)))
        if p <= ZERO_PROB:
            continue
        post = _hermitize(post) / p
        if p < REPAIR_BELOW:
            post = _clip_negative(post)
        out.append((label, p, DensityMatrix(post)))
    return out


def _clip_negative(m: np.ndarray) -> np.ndarray:
    # renormalizing a rare branch amplifies roundoff by 1/p; drop the spurious negative spectrum
    w, v = np.linalg.eigh(m)
    if w.min() >= 0:
        return m
    w = np.clip(w, 0, None)
    m = (v * w) @ v.conj().T
    return _hermitize(m / np.trace(m).real)


def _keep_positions(keep: Iterable[str]) -> list[int]:
    keep = list(keep)
    if not keep:
        raise ValueError("partial_trace needs a nonempty keep set")
    coords: list[str] = []
    for k in keep:
        coords.extend(DOFS.get(k, (k,)))
    positions = sorted({coord_position(c) for c in coords})
    return positions


def partial_trace(rho: DensityMatrix | np.ndarray, keep: Iterable[str]) -> np.ndarray:
    """Reduced density matrix over the kept coordinates.

    ``keep`` mixes degree-of-freedom names (``pol``, ``freq``, ``rail``) and
    single coordinates (``pol_A``...). Kept coordinates stay in basis order.
    """
    pos = _keep_positions(keep)
    m = _as_array(rho).reshape((2,) * 12)
    traced = [p for p in range(6) if p not in pos]
    # einsum letters: rows a..f, columns g..l; contract traced row/col pairs
    rows = list("abcdef")
    cols = list("ghijkl")
    for p in traced:
        cols[p] = rows[p]
    out = "".join(rows[p] for p in pos) + "".join(cols[p] for p in pos)
    red = np.einsum("".join(rows) + "".join(cols) + "->" + out, m)
    d = 2 ** len(pos)
    return red.reshape(d, d)


def fidelity(rho: DensityMatrix | np.ndarray, target: Sequence[complex]) -> float:
    """<target|rho|target> for a normalized pure target of matching dimension."""
    t = np.asarray(target, dtype=complex)
    m = _as_array(rho)
    if t.shape != (m.shape[0],):
        raise ValueError(f"target dimension {t.shape} does not match state {m.shape}")
    if abs(np.linalg.norm(t) - 1) > 1e-12:
        raise ValueError("target state is not normalized")
    return float(np.real(t.conj() @ m @ t))


def operator_on(coord: str, op: np.ndarray) -> np.ndarray:
    """Embed a 2x2 single-coordinate operator into the full space."""
    pos = coord_position(coord)
    mats = [np.eye(2)] * 6
    mats[pos] = np.asarray(op, dtype=complex)
    out = mats[0]
    for mat in mats[1:]:
        out = np.kron(out, mat)
    return out


def permutation_unitary(relabel) -> np.ndarray:
    """Unitary sending ``|label>`` to ``|relabel(label)>``; ``relabel`` must be a bijection."""
    U = np.zeros((DIM, DIM), dtype=complex)
    seen = set()
    for i in range(DIM):
        j = BasisLabel(*relabel(BasisLabel.from_index(i))).index
        if j in seen:
            raise ContractViolation("relabeling is not a bijection on the basis")
        seen.add(j)
        U[j, i] = 1.0
    return U


def diagonal_unitary(phases: np.ndarray) -> np.ndarray:
    return np.diag(np.exp(1j * np.asarray(phases, dtype=float)))


def coord_bits(coord: str) -> np.ndarray:
    """Bit value of ``coord`` for every basis index."""
    return (np.arange(DIM) >> (5 - coord_position(coord))) & 1


def projector(predicate) -> np.ndarray:
    """Diagonal projector onto basis states whose label satisfies ``predicate``."""
    return np.diag([1.0 if predicate(BasisLabel.from_index(i)) else 0.0 for i in range(DIM)]).astype(complex)


_S = 1 / np.sqrt(2)

#: Two-photon polarization Bell states over (pol_A, pol_B), keyed by their serialized label.
BELL = {
    "phi+": np.array([_S, 0, 0, _S], dtype=complex),
    "phi-": np.array([_S, 0, 0, -_S], dtype=complex),
    "psi+": np.array([0, _S, _S, 0], dtype=complex),
    "psi-": np.array([0, _S, -_S, 0], dtype=complex),
}

#: Frequency carrier (|w1 w2> + |w2 w1>)/sqrt2 and rail carrier (|a1 b1> + |a2 b2>)/sqrt2.
PSI_F = np.array([0, _S, _S, 0], dtype=complex)
PHI_S = np.array([_S, 0, 0, _S], dtype=complex)


def pol_marginal(rho: DensityMatrix | np.ndarray) -> np.ndarray:
    return partial_trace(rho, ["pol"])


def bell_weights(pol_rho: np.ndarray) -> dict[str, float]:
    """Diagonal of a 4x4 polarization matrix in the Bell basis."""
    return {k: float(np.real(v.conj() @ pol_rho @ v)) for k, v in BELL.items()}
