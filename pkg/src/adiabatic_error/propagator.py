"""Time evolution under H(t) = H1 + lam f(t) dH.

``evolve`` is the reference propagator (exponential midpoint rule, each step
exactly unitary). ``magnus_evolve`` truncates the interaction-picture Magnus
series after one to three terms. We propagate pure states throughout; the
density matrix rho_T = |psi_T><psi_T| is derived on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import ConvergenceError, DimensionMismatchError, MagnusDivergenceError
from .operators import HermitianOperator, QuantumState, as_hermitian, spectrum
from .schedules import Schedule


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    final_state: QuantumState
    step_count: int
    max_local_error_estimate: float
    unitarity_defect: float
    flags: tuple = ()


@dataclass(frozen=True, eq=False)
class MagnusTerms:
    """Omega_1..Omega_3 at time T, anti-Hermitian, in the original basis.

    Terms beyond the requested order are zero matrices.
    """

    omega1: np.ndarray
    omega2: np.ndarray
    omega3: np.ndarray
    order: int = 3

    def total(self) -> np.ndarray:
        return self.omega1 + self.omega2 + self.omega3


def convergence_margin(lam: float, dH, schedule: Schedule) -> float:
    """pi - lam ||dH||_2 int_0^T f dt; positive when the Magnus series surely converges."""
    dH = as_hermitian(dH)
    return math.pi - lam * dH.norm() * schedule.time_integral()


def _check_inputs(H1, dH, lam):
    H1 = as_hermitian(H1)
    dH = as_hermitian(dH)
    if H1.dim != dH.dim:
        raise DimensionMismatchError(f"H1 is {H1.dim}x{H1.dim} but dH is {dH.dim}x{dH.dim}")
    if not (lam >= 0 and math.isfinite(lam)):
        raise ValueError(f"lambda must be finite and >= 0, got {lam!r}")
    return H1, dH


def _tree_product(E: np.ndarray) -> np.ndarray:
    """Ordered product of (I + E_k), returned as its deviation from I.

    E[0] acts first. Keeping the identity implicit means rounding errors scale
    with ||E|| rather than with 1, so they do not pile up over millions of
    steps.
    """
    while E.shape[0] > 1:
        if E.shape[0] % 2:
            E = np.concatenate([E, np.zeros_like(E[:1])])
        a, b = E[0::2], E[1::2]
        E = a + b + b @ a
    return E[0]


def _chunk_size(n: int) -> int:
    return int(min(1 << 16, max(256, (1 << 20) // (n * n))))


def _propagate(H1s: np.ndarray, dHm: np.ndarray, lam: float, schedule: Schedule, steps: int) -> np.ndarray:
    """Deviation E of the full midpoint-rule propagator U = I + E."""
    n = H1s.shape[0]
    T = schedule.T
    h = T / steps
    chunk = _chunk_size(n)
    E_tot = np.zeros((n, n), dtype=complex)
    for start in range(0, steps, chunk):
        k = min(chunk, steps - start)
        tm = (start + np.arange(k) + 0.5) * h
        Hs = H1s[None, :, :] + (lam * schedule(tm))[:, None, None] * dHm[None, :, :]
        w, V = np.linalg.eigh(Hs)
        E = (V * np.expm1(-1j * h * w)[:, None, :]) @ V.conj().transpose(0, 2, 1)
        Ec = _tree_product(E)
        E_tot = Ec + E_tot + Ec @ E_tot
    return E_tot


def evolve(H1, dH, lam: float, schedule: Schedule, steps="auto", tol: Tolerances = DEFAULT_TOLERANCES) -> EvolutionResult:
    """Integrate i d|psi>/dt = H(t)|psi> from the ground state of H1.

    Each step applies exp(-i H(t_k + h/2) h) computed by diagonalizing the
    step Hamiltonian. With ``steps="auto"`` the step count starts at
    ``tol.initial_steps`` and doubles until the final state moves by at most
    ``tol.auto_state_tol`` in 2-norm.

    The ground energy w1 of H1 is removed during stepping and restored as the
    exact phase exp(-i w1 T) at the end; this keeps the global phase out of
    the rounding budget.
    """
    H1, dH = _check_inputs(H1, dH, lam)
    sp = spectrum(H1, tol)
    sp.require_nondegenerate(tol)
    w1 = sp.ground_energy
    psi0 = sp.eigenvectors[:, 0]
    n = H1.dim
    H1s = H1.entries - w1 * np.eye(n)
    dHm = dH.entries

    if steps == "auto":
        K = int(tol.initial_steps)
        E = _propagate(H1s, dHm, lam, schedule, K)
        prev = psi0 + E @ psi0
        change = math.inf
        for _ in range(int(tol.auto_max_doublings)):
            K *= 2
            E = _propagate(H1s, dHm, lam, schedule, K)
            cur = psi0 + E @ psi0
            change = float(np.linalg.norm(cur - prev))
            if change <= tol.auto_state_tol:
                break
            prev = cur
        else:
            raise ConvergenceError(
                f"auto refinement did not converge after {tol.auto_max_doublings} doublings "
                f"({K} steps, last change {change:.3e} > {tol.auto_state_tol:.1e})"
            )
        local_err = change
    else:
        K = int(steps)
        if K < 1:
            raise ValueError("steps must be a positive integer or 'auto'")
        E = _propagate(H1s, dHm, lam, schedule, K)
        local_err = math.nan

    defect = float(np.linalg.norm(E + E.conj().T + E.conj().T @ E, 2))
    if defect > tol.unitarity_atol:
        raise ConvergenceError(f"propagator unitarity defect {defect:.3e} exceeds {tol.unitarity_atol:.1e}")
    psi = (psi0 + E @ psi0) * np.exp(-1j * w1 * schedule.T)
    return EvolutionResult(
        final_state=QuantumState.normalized(psi),
        step_count=K,
        max_local_error_estimate=local_err,
        unitarity_defect=defect,
    )


# --- Magnus expansion ---------------------------------------------------------


def _magnus_unit(H1: HermitianOperator, dH: HermitianOperator, schedule: Schedule, order: int, rtol: float):
    """Magnus terms for lam = 1 in the eigenbasis of H1.

    Omega_k is homogeneous of degree k in lam, so callers rescale by lam**k.
    With A(t) = -i f(t) e^{i H1 t} dH e^{-i H1 t}, the nested-commutator
    integrals
        Omega_1 = int A
        Omega_2 = 1/2 int_0^T dt1 int_0^t1 dt2 [A1, A2]
        Omega_3 = 1/6 int int int ([A1,[A2,A3]] + [A3,[A2,A1]])
    are accumulated as cumulative integrals along t:
        Omega_1' = A
        Omega_2' = 1/2 [A, Omega_1]
        Omega_3' = 1/2 [A, Omega_2] + 1/12 [Omega_1, [Omega_1, A]]
    and integrated with an adaptive high-order rule.
    """
    sp = spectrum(H1)
    V = sp.eigenvectors
    w = sp.eigenvalues
    n = len(w)
    D = V.conj().T @ dH.entries @ V
    nu = w[:, None] - w[None, :]

    def A(t):
        return -1j * schedule(t) * D * np.exp(1j * nu * t)

    def rhs(t, y):
        a = A(t)
        parts = [a]
        if order >= 2:
            o1 = y[: n * n].reshape(n, n)
            parts.append(0.5 * (a @ o1 - o1 @ a))
        if order >= 3:
            o2 = y[n * n : 2 * n * n].reshape(n, n)
            c1 = o1 @ a - a @ o1
            parts.append(0.5 * (a @ o2 - o2 @ a) + (o1 @ c1 - c1 @ o1) / 12.0)
        return np.concatenate([p.ravel() for p in parts])

    T = schedule.T
    scale = max(1.0, T * float(np.max(np.abs(D))))
    bps = np.unique(np.concatenate([[0.0], schedule.breakpoints(), [T]]))
    y = np.zeros(order * n * n, dtype=complex)
    max_step = math.pi / (4.0 * max(1e-12, float(np.max(np.abs(nu))) + schedule.max_frequency()))
    for a_, b_ in zip(bps[:-1], bps[1:]):
        sol = solve_ivp(rhs, (a_, b_), y, method="DOP853", rtol=rtol, atol=rtol * 1e-2 * scale, max_step=max_step)
        if not sol.success:
            raise ConvergenceError(f"Magnus quadrature failed: {sol.message}")
        y = sol.y[:, -1]
    terms = [y[k * n * n : (k + 1) * n * n].reshape(n, n) for k in range(order)]
    return V, terms


def magnus_terms(H1, dH, lam: float, schedule: Schedule, order: int = 3, tol: Tolerances = DEFAULT_TOLERANCES) -> MagnusTerms:
    """Interaction-picture Magnus terms up to ``order`` at time T."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    H1, dH = _check_inputs(H1, dH, lam)
    V, unit = _magnus_unit(H1, dH, schedule, order, tol.magnus_rtol)
    n = H1.dim
    out = []
    for k in range(3):
        if k < order:
            m = V @ (unit[k] * lam ** (k + 1)) @ V.conj().T
            defect = float(np.max(np.abs(m + m.conj().T)))
            if defect > tol.anti_hermitian_atol * max(1.0, float(np.max(np.abs(m)))):
                raise ConvergenceError(f"Omega_{k + 1} not anti-Hermitian (defect {defect:.3e})")
            m = 0.5 * (m - m.conj().T)
        else:
            m = np.zeros((n, n), dtype=complex)
        m.setflags(write=False)
        out.append(m)
    return MagnusTerms(*out, order=order)


def _expm_antihermitian(omega: np.ndarray) -> np.ndarray:
    # omega = -i K with K Hermitian, so exp(omega) = V exp(-i k) V^dagger
    k, V = np.linalg.eigh(1j * omega)
    return (V * np.exp(-1j * k)) @ V.conj().T


def magnus_evolve(
    H1,
    dH,
    lam: float,
    schedule: Schedule,
    order: int = 1,
    allow_divergent: bool = False,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> EvolutionResult:
    """Final state e^{-i H1 T} exp(Omega_1 + ... + Omega_order)|ground of H1>.

    Refuses with MagnusDivergenceError when ``convergence_margin <= 0`` unless
    ``allow_divergent`` is set, in which case the result carries the
    ``magnus_gate=violated`` flag.
    """
    H1, dH = _check_inputs(H1, dH, lam)
    sp = spectrum(H1, tol)
    sp.require_nondegenerate(tol)
    flags = []
    margin = convergence_margin(lam, dH, schedule)
    if margin <= 0:
        if not allow_divergent:
            raise MagnusDivergenceError(
                f"lam ||dH|| int f = {math.pi - margin:.6g} >= pi; pass allow_divergent=True to proceed"
            )
        flags.append("magnus_gate=violated")
    terms = magnus_terms(H1, dH, lam, schedule, order, tol)
    U_int = _expm_antihermitian(terms.total())
    psi0 = sp.eigenvectors[:, 0]
    w, V = sp.eigenvalues, sp.eigenvectors
    free = (V * np.exp(-1j * w * schedule.T)) @ V.conj().T
    U = free @ U_int
    defect = float(np.linalg.norm(U.conj().T @ U - np.eye(H1.dim), 2))
    return EvolutionResult(
        final_state=QuantumState.normalized(U @ psi0),
        step_count=0,
        max_local_error_estimate=math.nan,
        unitarity_defect=defect,
        flags=tuple(flags),
    )
