"""Purification over dispersive channels: spatial/frequency phase dispersion,
phase compensation, time-fluctuating frequency phase, and the fiber-length
factorization check."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import optics
from .epp import (
    NoiseModel,
    PurificationReport,
    after_bitflip,
    channel_branches,
    pol_fidelity,
    run_epp,
)
from .statecore import (
    BELL,
    DensityMatrix,
    fidelity,
    ket,
    pol_marginal,
)

CATALOG_TOL = 1e-12


def bitflip_fidelity_formula(a: float, b: float, c: float, d: float, dphi_s: float) -> float:
    """Fidelity to phi+ after the bit-flip step: [1 + (a+c-b-d) cos dphi_s] / 2."""
    NoiseModel(a, b, c, d)  # simplex validation
    return 0.5 * (1 + (a + c - b - d) * math.cos(dphi_s))


def compensate_phase(rho: DensityMatrix, phi: float) -> DensityMatrix:
    """Undo a relative phase exp(i phi) on |VV> by a phase plate on Bob's V component."""
    return optics.local_phase(rho, "pol_B", -phi, value=1)


# -- fluctuating frequency phase ---------------------------------------------------

FLUCTUATION_MODELS = ("constant", "uniform-jitter", "sinusoid", "user-series")


@dataclass(frozen=True)
class FluctuationSpec:
    """Time series of the residual frequency phase Delta_f(t) = dphi_f(t) - dphi_f(0).

    ``uniform-jitter`` draws stratified uniform values in [-delta, delta]
    (one per equal-width stratum, shuffled in time with ``seed``), with
    Delta_f(0) = 0. ``user-series`` takes the samples as given.
    """

    model: str = "constant"
    base: float = 0.0
    horizon: float = 1.0
    samples: int = 1000
    delta: float = 0.0
    amplitude: float = 0.0
    period: float = 1.0
    series: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.model not in FLUCTUATION_MODELS:
            raise ValueError(f"unknown fluctuation model {self.model!r}; expected one of {FLUCTUATION_MODELS}")
        if self.delta < 0:
            raise ValueError("jitter width delta must be >= 0")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if self.model == "user-series":
            if not self.series:
                raise ValueError("user-series needs at least one sample")
            object.__setattr__(self, "series", tuple(float(x) for x in self.series))
            object.__setattr__(self, "samples", len(self.series))
        elif self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.model == "sinusoid" and not self.period > 0:
            raise ValueError("sinusoid period must be > 0")

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.samples)

    def deltas(self, seed: int | None = None) -> np.ndarray:
        n = self.samples
        if self.model == "constant":
            return np.zeros(n)
        if self.model == "sinusoid":
            return self.amplitude * np.sin(2 * np.pi * self.times() / self.period)
        if self.model == "user-series":
            return np.asarray(self.series, dtype=float)
        rng = np.random.default_rng(self.seed if seed is None else seed)
        if n == 1:
            return np.zeros(1)
        strata = (np.arange(n - 1) + rng.random(n - 1)) / (n - 1)
        vals = -self.delta + 2 * self.delta * strata
        return np.concatenate([[0.0], rng.permutation(vals)])

    def weights(self) -> np.ndarray:
        """Trapezoid weights over the sample times, normalized to sum 1."""
        if self.samples == 1:
            return np.ones(1)
        t = self.times()
        w = np.zeros(self.samples)
        dt = np.diff(t)
        w[:-1] += dt / 2
        w[1:] += dt / 2
        return w / self.horizon

    def to_dict(self) -> dict:
        out = {"model": self.model, "base": self.base, "horizon": self.horizon, "samples": self.samples,
               "seed": self.seed}
        if self.model == "uniform-jitter":
            out["delta"] = self.delta
        elif self.model == "sinusoid":
            out.update(amplitude=self.amplitude, period=self.period)
        elif self.model == "user-series":
            out["series"] = list(self.series)
        return out


class FfResult(NamedTuple):
    ff: float
    rho_e: np.ndarray  # 4x4 polarization ensemble F|phi+><phi+| + (1-F)|phi-><phi-|


def ff_from_series(deltas: Sequence[float], horizon: float = 1.0) -> float:
    """(1/2T) * integral of (1 + cos Delta_f(t)) over [0, T], trapezoid on uniform samples."""
    d = np.asarray(deltas, dtype=float)
    if d.size == 0:
        raise ValueError("empty fluctuation series")
    if d.size == 1:
        return 0.5 * (1 + math.cos(d[0]))
    t = np.linspace(0.0, horizon, d.size)
    return float(np.trapezoid(1 + np.cos(d), t) / (2 * horizon))


def time_avg_ff(spec: FluctuationSpec) -> FfResult:
    if spec.model == "constant":
        ff = 1.0
    else:
        ff = ff_from_series(spec.deltas(), spec.horizon)
    phi_p, phi_m = BELL["phi+"], BELL["phi-"]
    rho_e = ff * np.outer(phi_p, phi_p.conj()) + (1 - ff) * np.outer(phi_m, phi_m.conj())
    return FfResult(ff, rho_e)


def fluctuating_ensemble(n: NoiseModel, spec: FluctuationSpec) -> np.ndarray:
    """Time-averaged 4x4 polarization output when each time sample runs the full protocol.

    Trajectory k uses dphi_f = base + Delta_f(t_k); every trajectory is
    compensated with exp(i * base), i.e. the phase at t = 0.
    """
    acc = np.zeros((4, 4), dtype=complex)
    for w, dlt in zip(spec.weights(), spec.deltas()):
        local = NoiseModel(*n.weights, n.dphi_s, spec.base + dlt)
        report = run_epp(local)
        for b in report.branches:
            acc += w * b.probability * pol_marginal(compensate_phase(b.state, spec.base))
    return acc


# -- fiber geometry ------------------------------------------------------------------

@dataclass(frozen=True)
class FiberGeometry:
    L_a1: float
    L_a2: float
    L_b1: float
    L_b2: float
    omega1: float
    omega2: float
    v: float

    def __post_init__(self):
        if min(self.L_a1, self.L_a2, self.L_b1, self.L_b2) < 0:
            raise ValueError("channel lengths must be >= 0")
        if not self.v > 0:
            raise ValueError("propagation speed must be > 0")
        if self.omega1 == self.omega2:
            raise ValueError("omega1 and omega2 must differ")


class Factorization(NamedTuple):
    exact: np.ndarray  # 16-vector over (freq_A, freq_B, rail_A, rail_B)
    factorized: np.ndarray
    overlap: float
    condition: float
    residual_phase: float


def _fs_index(fa, fb, ra, rb) -> int:
    return 8 * fa + 4 * fb + 2 * ra + rb


def factorization_overlap(g: FiberGeometry) -> Factorization:
    """Compare the exactly phased frequency-spatial state with its product approximation."""
    w = (g.omega1, g.omega2)
    L_a = (g.L_a1, g.L_a2)
    L_b = (g.L_b1, g.L_b2)
    exact = np.zeros(16, dtype=complex)
    # frequency pairs w1w2 (fa=0, fb=1) and w2w1 (fa=1, fb=0); rails a1b1 and a2b2
    for fa, fb in ((0, 1), (1, 0)):
        for r in (0, 1):
            exact[_fs_index(fa, fb, r, r)] = 0.5 * np.exp(1j * (w[fa] * L_a[r] + w[fb] * L_b[r]) / g.v)

    global_phase = (g.omega1 * g.L_a1 + g.omega2 * g.L_b1) / g.v
    freq_phase = ((g.omega2 - g.omega1) * g.L_a1 + (g.omega1 - g.omega2) * g.L_b1) / g.v
    rail_phase = (g.omega1 * (g.L_a2 - g.L_a1) + g.omega2 * (g.L_b2 - g.L_b1)) / g.v
    freq = np.array([0, 1, np.exp(1j * freq_phase), 0], dtype=complex)
    rail = np.array([1, 0, 0, np.exp(1j * rail_phase)], dtype=complex)
    factorized = 0.5 * np.exp(1j * global_phase) * np.kron(freq, rail)

    overlap = float(abs(np.vdot(exact, factorized)) ** 2)
    condition = (2 * (g.omega2 * g.L_a2 + g.omega1 * g.L_b2) - g.omega2 * g.L_a1 - g.omega1 * g.L_b1
                 - g.omega1 * (g.L_a2 - g.L_a1) - g.omega2 * (g.L_b2 - g.L_b1))
    residual = float(np.angle(exact[_fs_index(1, 0, 1, 1)] / factorized[_fs_index(1, 0, 1, 1)]))
    return Factorization(exact, factorized, overlap, condition, residual)


# -- branch catalog -----------------------------------------------------------------

def _state(terms, rails) -> np.ndarray:
    """Sum of ``coef * |pol_A pol_B, freq_A freq_B>`` on fixed output rails, normalized."""
    v = np.zeros(64, dtype=complex)
    for coef, (pa, pb), (fa, fb) in terms:
        v += coef * ket(pol_A=pa, pol_B=pb, freq_A=fa, freq_B=fb, rail_A=rails[0], rail_B=rails[1])
    return v / np.linalg.norm(v)


H, V = 0, 1
W1, W2 = 0, 1


def step1_catalog(dphi_s: float, dphi_f: float) -> dict:
    """Pre-correction bit-flip branch states keyed by (error class, (alice theta?, bob theta?))."""
    es, ef = np.exp(1j * dphi_s), np.exp(1j * dphi_f)
    fterms = ((1, (W1, W2)), (ef, (W2, W1)))

    def branch(c_first, pols_first, c_second, pols_second, rails):
        terms = [(c1 * cf, pols_first, f) for c1 in (c_first,) for cf, f in fterms]
        terms += [(c2 * cf, pols_second, f) for c2 in (c_second,) for cf, f in fterms]
        return _state(terms, rails)

    return {
        ("phi+", (1, 1)): branch(1, (H, H), es, (V, V), (1, 1)),
        ("phi-", (1, 1)): branch(1, (H, H), -es, (V, V), (1, 1)),
        ("phi+", (0, 0)): branch(es, (H, H), 1, (V, V), (0, 0)),
        ("phi-", (0, 0)): branch(es, (H, H), -1, (V, V), (0, 0)),
        ("psi+", (1, 0)): branch(1, (H, V), es, (V, H), (1, 0)),
        ("psi-", (1, 0)): branch(1, (H, V), -es, (V, H), (1, 0)),
        ("psi+", (0, 1)): branch(es, (H, V), 1, (V, H), (0, 1)),
        ("psi-", (0, 1)): branch(es, (H, V), -1, (V, H), (0, 1)),
    }


def step2_catalog(dphi_f: float) -> dict:
    """Pre-correction phase-flip branch states keyed by (alice theta?, bob theta?)."""
    ef = np.exp(1j * dphi_f)
    return {
        (1, 1): _state([(1, (H, H), (W1, W2)), (ef, (V, V), (W2, W1))], (1, 1)),  # c2d2
        (0, 0): _state([(ef, (H, H), (W2, W1)), (1, (V, V), (W1, W2))], (0, 0)),  # c1d1
        (1, 0): _state([(1, (H, V), (W1, W2)), (ef, (V, H), (W2, W1))], (1, 0)),  # c2d1
        (0, 1): _state([(ef, (H, V), (W2, W1)), (1, (V, H), (W1, W2))], (0, 1)),  # c1d2
    }


def step2_catalog_literal(dphi_f: float) -> dict:
    """c1d1 and c1d2 exactly as printed for the dispersive case (frequency labels as in the text)."""
    ef = np.exp(1j * dphi_f)
    return {
        (0, 0): _state([(ef, (H, H), (W1, W2)), (1, (V, V), (W2, W1))], (0, 0)),
        (0, 1): _state([(ef, (H, V), (W1, W2)), (1, (V, H), (W2, W1))], (0, 1)),
    }


def catalog_fidelities(n: NoiseModel) -> dict:
    """Fidelity of every simulated pre-correction branch to its catalog state.

    Keys: ``("step1", class, outcome)`` and ``("step2", class, step1 outcome, outcome)``.
    """
    cat1 = step1_catalog(n.dphi_s, n.dphi_f)
    cat2 = step2_catalog(n.dphi_f)
    out = {}
    for label, _, rho in channel_branches(n):
        for o1, _, post in optics.qnd_pbs(rho):
            key1 = (o1.alice_phase, o1.bob_phase)
            out[("step1", label, key1)] = fidelity(post, cat1[(label, key1)])
            corrected = post if o1.equal else optics.sigma_x(post, "B")
            routed = optics.wdm(optics.hadamard_pol(optics.reset_rails(corrected, o1), "both"))
            for o2, _, post2 in optics.qnd_pbs(routed):
                key2 = (o2.alice_phase, o2.bob_phase)
                out[("step2", label, key1, key2)] = fidelity(post2, cat2[key2])
    return out


def dispersive_epp_run(n: NoiseModel, compensation: bool = True) -> PurificationReport:
    """Full protocol under fixed dphi_s, dphi_f; optionally compensate dphi_f at the end.

    Raises ``AssertionError`` if any branch deviates from the catalog states.
    """
    cat = catalog_fidelities(n)
    worst = min(cat.values())
    if abs(worst - 1) > CATALOG_TOL:
        bad = [k for k, f in cat.items() if abs(f - 1) > CATALOG_TOL]
        raise AssertionError(f"branch states deviate from the catalog: {bad}")
    report = run_epp(n)
    if compensation:
        for b in report.branches:
            b.state = compensate_phase(b.state, n.dphi_f)
            b.fidelity = pol_fidelity(b.state)
            b.corrections = b.corrections + ((f"phase:B:V:{-n.dphi_f!r}",),)
    report.meta.update(compensation=compensation, catalog_min_fidelity=worst)
    return report


# -- sweeps --------------------------------------------------------------------------

SWEEP_COLUMNS = ("a", "b", "c", "d", "dphi_s", "dphi_f", "F_formula", "F_simulated", "abs_error")


def simplex_grid(levels: int = 5) -> list[tuple[float, float, float, float]]:
    """levels**3 simplex points by stick breaking over a uniform grid in [0, 1]^3."""
    u = np.linspace(0.0, 1.0, levels)
    pts = []
    for u1 in u:
        for u2 in u:
            for u3 in u:
                a = u1
                b = (1 - u1) * u2
                c = (1 - u1) * (1 - u2) * u3
                d = max(0.0, 1 - a - b - c)
                pts.append((float(a), float(b), float(c), float(d)))
    return pts


def sweep_row(n: NoiseModel, param: str = "dphi_s") -> dict:
    if param == "dphi_s":
        formula = bitflip_fidelity_formula(*n.weights, n.dphi_s)
        simulated = fidelity(pol_marginal(after_bitflip(n)), BELL["phi+"])
    elif param == "dphi_f":
        formula = 0.5 * (1 + math.cos(n.dphi_f))
        simulated = run_epp(n).mean_final_fidelity
    else:
        raise ValueError(f"sweep parameter must be dphi_s or dphi_f, got {param!r}")
    return {"a": n.a, "b": n.b, "c": n.c, "d": n.d, "dphi_s": n.dphi_s, "dphi_f": n.dphi_f,
            "F_formula": formula, "F_simulated": simulated, "abs_error": abs(formula - simulated)}


def sweep(points, values, param: str = "dphi_s", fixed: NoiseModel | None = None) -> list[dict]:
    """Rows ordered by (point index, value index)."""
    fixed = fixed or NoiseModel()
    rows = []
    for p in points:
        for x in values:
            n = replace(fixed, a=p[0], b=p[1], c=p[2], d=p[3], **{param: float(x)})
            rows.append(sweep_row(n, param))
    return rows
