import json

import numpy as np
import pytest

from conftest import assert_valid, erasable_vector, random_density
from hyperepp import optics
from hyperepp import statecore as sc
from hyperepp.statecore import BELL, PHI_S, PSI_F, DensityMatrix, ket, make_pure


def with_carriers(pol, freq=PSI_F, rail=PHI_S):
    return make_pure(np.kron(np.kron(pol, freq), rail))


def pol_of(rho):
    return sc.pol_marginal(rho)


def rails_of(rho):
    r = sc.partial_trace(rho, ["rail"])
    return tuple(int(x) for x in divmod(int(np.argmax(np.real(np.diag(r)))), 2))


def test_qnd_phi_plus():
    branches = optics.qnd_pbs(with_carriers(BELL["phi+"]))
    got = {(o.alice_phase, o.bob_phase): (p, o, post) for o, p, post in branches}
    assert set(got) == {(1, 1), (0, 0)}
    for key, rails in (((1, 1), (1, 1)), ((0, 0), (0, 0))):
        p, o, post = got[key]
        assert p == pytest.approx(0.5, abs=1e-12)
        assert (o.alice_rail, o.bob_rail) == rails == rails_of(post)
        assert sc.fidelity(pol_of(post), BELL["phi+"]) == pytest.approx(1, abs=1e-12)
    assert got[(1, 1)][1].modes() == "a2b2"


def test_qnd_psi_plus():
    branches = optics.qnd_pbs(with_carriers(BELL["psi+"]))
    got = {(o.alice_phase, o.bob_phase): (p, post) for o, p, post in branches}
    assert set(got) == {(1, 0), (0, 1)}
    assert rails_of(got[(1, 0)][1]) == (1, 0)
    assert rails_of(got[(0, 1)][1]) == (0, 1)
    for p, post in got.values():
        assert p == pytest.approx(0.5, abs=1e-12)
        assert sc.fidelity(pol_of(post), BELL["psi+"]) == pytest.approx(1, abs=1e-12)


def test_qnd_product_basis_state():
    # apply the parity rule by hand: H on rail 1 fires for Alice (0 == 0), V on rail 1 does not for Bob
    rho = make_pure(ket(pol_A=0, pol_B=1))
    branches = optics.qnd_pbs(rho)
    assert len(branches) == 1
    o, p, post = branches[0]
    assert (o.alice_phase, o.bob_phase) == (1, 0)
    assert p == pytest.approx(1)
    assert post.allclose(make_pure(ket(pol_A=0, pol_B=1, rail_A=1)))


def test_qnd_kraus_complete_and_labelled():
    K = optics.qnd_kraus()
    total = sum(k.conj().T @ k for k in K.operators)
    assert np.allclose(total, np.eye(64), atol=1e-12)
    assert [(o.alice_phase, o.bob_phase) for o in K.labels] == [(1, 1), (1, 0), (0, 1), (0, 0)]


def test_qnd_invariants_random(rng):
    for _ in range(30):
        rho = DensityMatrix(random_density(rng))
        branches = optics.qnd_pbs(rho)
        assert sum(p for _, p, _ in branches) == pytest.approx(1, abs=1e-12)
        for o, p, post in branches:
            assert_valid(post.matrix)
            r = np.real(np.diag(sc.partial_trace(post, ["rail"])))
            assert r[2 * o.alice_rail + o.bob_rail] == pytest.approx(1, abs=1e-12)


def test_qnd_never_equal_for_odd_polarization(rng):
    for _ in range(30):
        v = np.zeros(64, dtype=complex)
        for pa, pb in ((0, 1), (1, 0)):
            for r in (0, 1):
                for fa in (0, 1):
                    for fb in (0, 1):
                        v += (rng.normal() + 1j * rng.normal()) * ket(
                            pol_A=pa, pol_B=pb, freq_A=fa, freq_B=fb, rail_A=r, rail_B=r)
        for o, p, _ in optics.qnd_pbs(make_pure(v)):
            assert not o.equal


def test_wdm_routing_examples():
    rho = make_pure(ket(freq_A=0, freq_B=0))
    out = optics.wdm(rho)
    assert out.allclose(make_pure(ket(freq_A=0, freq_B=0, rail_A=0, rail_B=1)))
    out = optics.wdm(make_pure(ket(freq_A=1, freq_B=1)))
    assert out.allclose(make_pure(ket(freq_A=1, freq_B=1, rail_A=1, rail_B=0)))


def test_wdm_inverse(rng):
    rho = DensityMatrix(random_density(rng))
    assert optics.wdm(optics.wdm(rho), inverse=True).allclose(rho)


def test_wdm_rejects_non_bijective_map():
    with pytest.raises(ValueError):
        optics.RoutingMap(alice=(0, 0))


def test_wdm_psi_plus_gives_c2d1():
    # rails reset to a1b1; frequency routing then never gives equal outcomes for Psi+
    rho = optics.wdm(with_carriers(BELL["psi+"], rail=np.array([1, 0, 0, 0])))
    outs = optics.qnd_pbs(rho)
    assert all(not o.equal for o, _, _ in outs)
    assert {o.modes("c", "d") for o, _, _ in outs} == {"c2d1", "c1d2"}


def test_hadamard_examples(rng):
    rho = DensityMatrix(random_density(rng))
    assert optics.hadamard_pol(optics.hadamard_pol(rho)).allclose(rho)
    out = optics.hadamard_pol(with_carriers(BELL["phi-"]))
    assert sc.fidelity(pol_of(out), BELL["psi+"]) == pytest.approx(1, abs=1e-12)
    out = optics.hadamard_pol(with_carriers(BELL["phi+"]))
    assert sc.fidelity(pol_of(out), BELL["phi+"]) == pytest.approx(1, abs=1e-12)


def test_hadamard_bell_diagonal_map():
    # 4x4 oracle: H (x) H conjugation of a {Phi+, Phi-} mixture
    H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    HH = np.kron(H, H)
    w = 0.7
    rho_p = w * np.outer(BELL["phi+"], BELL["phi+"]) + (1 - w) * np.outer(BELL["phi-"], BELL["phi-"])
    full = np.kron(rho_p, np.kron(np.outer(PSI_F, PSI_F), np.outer(PHI_S, PHI_S)))
    out = optics.hadamard_pol(DensityMatrix(full))
    assert np.allclose(pol_of(out), HH @ rho_p @ HH.T, atol=1e-14)
    expected = w * np.outer(BELL["phi+"], BELL["phi+"]) + (1 - w) * np.outer(BELL["psi+"], BELL["psi+"])
    assert np.allclose(pol_of(out), expected, atol=1e-14)


def test_sigma_x_examples(rng):
    out = optics.sigma_x(with_carriers(BELL["psi+"]), "B")
    assert sc.fidelity(pol_of(out), BELL["phi+"]) == pytest.approx(1, abs=1e-12)
    out = optics.sigma_x(with_carriers(BELL["psi-"]), "B")
    assert sc.fidelity(pol_of(out), BELL["phi-"]) == pytest.approx(1, abs=1e-12)
    rho = DensityMatrix(random_density(rng))
    for party in ("A", "B", "both"):
        assert optics.sigma_x(optics.sigma_x(rho, party), party).allclose(rho)
    with pytest.raises(ValueError):
        optics.sigma_x(rho, "C")


def test_local_phase_examples(rng):
    rho = DensityMatrix(random_density(rng))
    assert optics.local_phase(rho, "rail_B", 0.0).allclose(rho)
    assert optics.local_phase(optics.local_phase(rho, "freq_A", 0.8), "freq_A", -0.8).allclose(rho)
    phi = 0.6
    src = make_pure(np.kron(np.kron(BELL["phi+"], PSI_F), PHI_S))
    out = sc.partial_trace(optics.local_phase(src, "rail_B", phi), ["rail"])
    target = np.array([1, 0, 0, np.exp(1j * phi)]) / np.sqrt(2)
    assert np.allclose(out, np.outer(target, target.conj()), atol=1e-14)


def _freq_pol_vector(phase=0.0):
    a = ket(pol_A=0, pol_B=0, freq_A=0, freq_B=1)
    b = ket(pol_A=1, pol_B=1, freq_A=1, freq_B=0)
    return (a + np.exp(1j * phase) * b) / np.sqrt(2)


def test_frequency_erase_examples():
    out = optics.frequency_erase(make_pure(_freq_pol_vector()))
    target = np.kron(np.kron(BELL["phi+"], [1, 0, 0, 0]), [1, 0, 0, 0])
    assert sc.fidelity(out, target) == pytest.approx(1, abs=1e-12)
    phi = 1.3
    out = optics.frequency_erase(make_pure(_freq_pol_vector(phi)))
    pol = np.array([1, 0, 0, np.exp(1j * phi)]) / np.sqrt(2)
    assert sc.fidelity(pol_of(out), pol) == pytest.approx(1, abs=1e-12)


def test_frequency_erase_keeps_other_marginals(rng):
    for _ in range(10):
        rho = make_pure(erasable_vector(rng))
        out = optics.frequency_erase(rho)
        assert_valid(out.matrix)
        assert np.allclose(sc.partial_trace(out, ["pol", "rail"]).diagonal(),
                           sc.partial_trace(rho, ["pol", "rail"]).diagonal(), atol=1e-12)
    # frequency-independent state: the pol/rail marginal is untouched
    pr = random_density(rng, dim=16)
    full = np.zeros((64, 64), dtype=complex)
    idx = [sc.BasisLabel(i >> 3 & 1, i >> 2 & 1, 0, 0, i >> 1 & 1, i & 1).index for i in range(16)]
    full[np.ix_(idx, idx)] = pr
    out = optics.frequency_erase(DensityMatrix(full))
    assert np.allclose(sc.partial_trace(out, ["pol", "rail"]), pr, atol=1e-12)


def test_frequency_erase_rejects_non_isometric_input():
    v = (ket(freq_A=0) + ket(freq_A=1)) / np.sqrt(2)
    with pytest.raises(sc.InvalidStateError):
        optics.frequency_erase(make_pure(v))


def test_non_measurement_elements_unitary():
    for U in (optics.sigma_x_unitary("both"), optics.hadamard_unitary("A"), optics.wdm_unitary(),
              optics.local_phase_unitary("rail_B", 0.3)):
        assert np.max(np.abs(U.conj().T @ U - np.eye(64))) <= 1e-12


def test_reset_rails(rng):
    for o, p, post in optics.qnd_pbs(DensityMatrix(random_density(rng))):
        assert optics.rails_reset(optics.reset_rails(post, o))


def test_outcome_serialization():
    o = optics.QndOutcome(1, 0, 1, 0)
    assert o.to_dict()["alice_rail"] == 2
    assert o.phase_labels() == ("theta", "0")
    assert o.modes("c", "d") == "c2d1"


def test_element_descriptor_roundtrip(rng):
    doc = [
        {"element": "hadamard_pol", "params": {"party": "both"}},
        {"element": "wdm", "params": {"alice": [0, 1], "bob": [1, 0]}},
        {"element": "local_phase", "params": {"coord": "freq_A", "phi": 0.2}},
        {"element": "qnd_pbs", "params": {}},
    ]
    pipe = optics.load_pipeline(json.dumps(doc))
    assert [e.to_dict() for e in pipe] == doc
    rho = DensityMatrix(random_density(rng))
    expected = optics.qnd_pbs(optics.local_phase(optics.wdm(optics.hadamard_pol(rho)), "freq_A", 0.2))
    got = optics.run_pipeline(rho, pipe)
    assert len(got) == len(expected)
    for (o1, p1, s1), (o2, p2, s2) in zip(got, expected):
        assert o1 == o2 and p1 == pytest.approx(p2) and s1.allclose(s2)


def test_element_descriptor_rejects_unknown():
    with pytest.raises(ValueError):
        optics.Element("beamsplitter")
    with pytest.raises(ValueError):
        optics.Element.from_dict({"element": "wdm", "colour": 1})
    with pytest.raises(sc.ContractViolation):
        optics.run_pipeline(sc.maximally_mixed(), [optics.Element("qnd_pbs"), optics.Element("sigma_x")])
