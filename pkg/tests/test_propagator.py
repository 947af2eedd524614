import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial.legendre import leggauss
from scipy.linalg import expm

from adiabatic_error import (
    ConvergenceError,
    DegenerateGroundStateError,
    DimensionMismatchError,
    DEFAULT_TOLERANCES,
    HermitianOperator,
    Linear,
    MagnusDivergenceError,
    Quadratic,
    Resonant,
    convergence_margin,
    epsilon_estimate,
    epsilon_exact,
    evolve,
    magnus_evolve,
    magnus_terms,
    random_system,
    reference_system,
)
from adiabatic_error.propagator import _tree_product

from .conftest import random_hermitian


def final_H(H1, dH, lam):
    return H1 + lam * dH


def eps_of(H1, dH, lam, schedule, **kw):
    return epsilon_exact(evolve(H1, dH, lam, schedule, **kw), final_H(H1, dH, lam))


# --- stationary cases -------------------------------------------------------------


def test_zero_coupling_is_stationary(random6):
    H1, dH = random6
    res = evolve(H1, dH, 0.0, Linear(10.0))
    assert epsilon_exact(res, H1) <= 1e-12
    w, V = np.linalg.eigh(H1.entries)
    overlap = np.vdot(V[:, 0], res.final_state.amplitudes)
    assert abs(overlap) == pytest.approx(1.0, abs=1e-12)


def test_zero_coupling_phase():
    H1 = HermitianOperator(np.diag([0.7, 2.0]))
    T = 3.0
    res = evolve(H1, np.array([[0, 1], [1, 0]]), 0.0, Linear(T))
    assert np.allclose(res.final_state.amplitudes, [np.exp(-0.7j * T), 0], atol=1e-12)


def test_commuting_perturbation_is_stationary():
    H1 = np.diag([0.0, 1.0, 2.5])
    dH = np.diag([0.3, -0.7, 0.2])
    for sched in (Linear(10.0), Quadratic(10.0)):
        assert eps_of(H1, dH, 0.05, sched) <= 1e-10


# --- exact evolution accuracy -----------------------------------------------------


def test_two_level_agrees_with_estimate(ref_system):
    H1, dH = ref_system
    T = 10.0
    for lam in (1e-2, 5e-3):
        exact = eps_of(H1, dH, lam, Linear(T))
        est = epsilon_estimate(H1, dH, lam, Linear(T)).eps_estimate
        assert est == pytest.approx(lam**2 * 4 * math.sin(T / 2) ** 2 / T**2, rel=1e-12)
        assert abs(exact - est) <= lam**3


def test_unitarity_and_purity(random6):
    H1, dH = random6
    res = evolve(H1, dH, 0.1, Quadratic(10.0))
    assert res.unitarity_defect <= 1e-10
    assert res.max_local_error_estimate <= DEFAULT_TOLERANCES.auto_state_tol
    rho = res.final_state.density_matrix()
    assert abs(np.trace(rho @ rho) - 1) <= 1e-12


def test_doubling_past_auto_changes_little(random6):
    H1, dH = random6
    sched, lam = Linear(10.0), 0.01
    auto = evolve(H1, dH, lam, sched)
    finer = evolve(H1, dH, lam, sched, steps=2 * auto.step_count)
    H2 = final_H(H1, dH, lam)
    assert abs(epsilon_exact(auto, H2) - epsilon_exact(finer, H2)) <= 1e-10


def test_matches_dense_reference(rng):
    # independent propagator: scipy expm on a fixed fine midpoint grid
    H1 = random_hermitian(rng, 3)
    dH = random_hermitian(rng, 3)
    lam, T, K = 0.3, 2.0, 4000
    sched = Quadratic(T)
    w, V = np.linalg.eigh(H1)
    psi = V[:, 0].astype(complex)
    j = np.flatnonzero(np.abs(psi) > 1e-8 * np.abs(psi).max())[0]
    psi *= abs(psi[j]) / psi[j]
    h = T / K
    for k in range(K):
        psi = expm(-1j * h * (H1 + lam * sched((k + 0.5) * h) * dH)) @ psi
    res = evolve(H1, dH, lam, sched, steps=K)
    assert np.linalg.norm(res.final_state.amplitudes - psi) <= 1e-11


def test_midpoint_rule_is_second_order(ref_system):
    H1, dH = ref_system
    sched = Resonant(8.0, 0.5, 1.0)
    ref = evolve(H1, dH, 0.5, sched).final_state.amplitudes
    errs = [np.linalg.norm(evolve(H1, dH, 0.5, sched, steps=k).final_state.amplitudes - ref) for k in (100, 200)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


# --- failure modes ----------------------------------------------------------------


def test_degenerate_ground_state_refused():
    with pytest.raises(DegenerateGroundStateError):
        evolve(np.diag([0.0, 0.0, 1.0]), np.eye(3), 0.1, Linear(1.0))


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        evolve(np.diag([0.0, 1.0]), np.eye(3), 0.1, Linear(1.0))


@pytest.mark.parametrize("lam", [-0.1, math.inf, math.nan])
def test_bad_lambda(lam):
    with pytest.raises(ValueError):
        evolve(np.diag([0.0, 1.0]), np.eye(2), lam, Linear(1.0))


def test_auto_refinement_budget_exhausted(ref_system):
    H1, dH = ref_system
    tol = DEFAULT_TOLERANCES.override(auto_max_doublings=1)
    with pytest.raises(ConvergenceError):
        evolve(H1, dH, 0.5, Resonant(50.0, 0.5, 1.0), tol=tol)


@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_tree_product_matches_sequential(k, seed):
    rng = np.random.default_rng(seed)
    Us = [expm(-1j * 0.1 * random_hermitian(rng, 3)) for _ in range(k)]
    seq = np.eye(3)
    for U in Us:
        seq = U @ seq
    E = np.array([U - np.eye(3) for U in Us])
    assert np.allclose(np.eye(3) + _tree_product(E), seq, atol=1e-13)


# --- Magnus expansion -------------------------------------------------------------


def brute_force_magnus(H1, dH, schedule, m=24):
    """Nested Gauss-Legendre over the time-ordered simplex."""
    H1 = np.asarray(H1, dtype=complex)
    dH = np.asarray(dH, dtype=complex)
    x, w = leggauss(m)
    T = schedule.T

    def A(t):
        U = expm(1j * H1 * t)
        return -1j * schedule(t) * U @ dH @ U.conj().T

    def comm(a, b):
        return a @ b - b @ a

    o1 = np.zeros_like(H1)
    o2 = np.zeros_like(H1)
    o3 = np.zeros_like(H1)
    for x1, w1 in zip(x, w):
        t1 = T * (x1 + 1) / 2
        a1 = A(t1)
        o1 += w1 * T / 2 * a1
        for x2, w2 in zip(x, w):
            t2 = t1 * (x2 + 1) / 2
            a2 = A(t2)
            wt2 = w1 * T / 2 * w2 * t1 / 2
            o2 += 0.5 * wt2 * comm(a1, a2)
            for x3, w3 in zip(x, w):
                t3 = t2 * (x3 + 1) / 2
                a3 = A(t3)
                o3 += wt2 * w3 * t2 / 2 / 6 * (comm(a1, comm(a2, a3)) + comm(a3, comm(a2, a1)))
    return o1, o2, o3


def test_magnus_terms_match_brute_force(rng):
    H1 = random_hermitian(rng, 3)
    dH = random_hermitian(rng, 3)
    sched = Quadratic(2.0)
    lam = 0.4
    terms = magnus_terms(H1, dH, lam, sched, order=3)
    o1, o2, o3 = brute_force_magnus(H1, dH, sched)
    for got, ref, k in ((terms.omega1, o1, 1), (terms.omega2, o2, 2), (terms.omega3, o3, 3)):
        ref = ref * lam**k
        assert np.max(np.abs(got - ref)) <= 1e-9 * np.max(np.abs(ref))


def test_magnus_terms_anti_hermitian(random6):
    H1, dH = random6
    t = magnus_terms(H1, dH, 0.05, Linear(10.0))
    for m in (t.omega1, t.omega2, t.omega3):
        assert np.max(np.abs(m + m.conj().T)) <= 1e-10


def test_magnus_order_padding(ref_system):
    H1, dH = ref_system
    t = magnus_terms(H1, dH, 0.1, Linear(5.0), order=1)
    assert not np.any(t.omega2) and not np.any(t.omega3)


def test_magnus_zero_coupling_matches_evolve(random6):
    H1, dH = random6
    a = magnus_evolve(H1, dH, 0.0, Linear(10.0)).final_state.amplitudes
    b = evolve(H1, dH, 0.0, Linear(10.0)).final_state.amplitudes
    assert np.linalg.norm(a - b) <= 1e-10


def magnus_error(H1, dH, lam, sched, order):
    exact = evolve(H1, dH, lam, sched).final_state.amplitudes
    approx = magnus_evolve(H1, dH, lam, sched, order=order).final_state.amplitudes
    return np.linalg.norm(approx - exact)


def test_magnus_first_order_error_ratio(ref_system):
    H1, dH = ref_system
    sched = Linear(10.0)
    e = [magnus_error(H1, dH, lam, sched, 1) for lam in (0.02, 0.01)]
    assert 3.5 <= e[0] / e[1] <= 4.5


def test_magnus_third_order_beats_first(random6):
    H1, dH = random6
    sched = Quadratic(10.0)
    assert magnus_error(H1, dH, 0.05, sched, 3) <= magnus_error(H1, dH, 0.05, sched, 1)


# --- convergence gate -------------------------------------------------------------


def test_margin_at_zero_coupling(ref_system):
    assert convergence_margin(0.0, ref_system[1], Linear(10.0)) == math.pi


def test_margin_value():
    assert convergence_margin(0.1, np.array([[0, 1], [1, 0]]), Linear(10.0)) == pytest.approx(math.pi - 0.5, abs=1e-15)


def test_gate_boundary(ref_system):
    H1, dH = ref_system
    sched = Linear(10.0)
    lam_star = math.pi / (dH.norm() * sched.time_integral())
    assert abs(convergence_margin(lam_star, dH, sched)) <= 1e-12
    magnus_evolve(H1, dH, lam_star * (1 - 1e-9), sched)
    with pytest.raises(MagnusDivergenceError):
        magnus_evolve(H1, dH, lam_star * (1 + 1e-9), sched)


def test_gate_override_flags(ref_system):
    H1, dH = ref_system
    res = magnus_evolve(H1, dH, 1.0, Linear(10.0), allow_divergent=True)
    assert "magnus_gate=violated" in res.flags


def test_random_system_normalization():
    H1, dH = random_system(5, seed=3)
    w = np.linalg.eigvalsh(H1.entries)
    assert w[1] - w[0] == pytest.approx(1.0, rel=1e-12)
    assert dH.norm() == pytest.approx(1.0, rel=1e-12)
    assert reference_system()[1].norm() == pytest.approx(1.0)
