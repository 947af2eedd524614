"""Dense Hermitian operator algebra.

Units follow hbar = 1. Every operator is an immutable ``HermitianOperator``
wrapping a read-only complex ndarray; states are ``QuantumState`` wrappers
around unit vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateGroundStateError,
    DimensionMismatchError,
    HermiticityError,
)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


class HermitianOperator:
    """N x N complex Hermitian matrix, N >= 2.

    The input is checked entrywise against its conjugate transpose and then
    symmetrized exactly, so downstream eigensolvers see a truly Hermitian
    array.
    """

    __slots__ = ("_m",)

    def __init__(self, entries, atol: float = DEFAULT_TOLERANCES.hermitian_atol):
        m = np.asarray(entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"expected a square matrix, got shape {m.shape}")
        if m.shape[0] < 2:
            raise DimensionMismatchError("dimension must be at least 2")
        if not np.all(np.isfinite(m)):
            raise HermiticityError("matrix has non-finite entries")
        defect = np.max(np.abs(m - m.conj().T))
        if defect > atol:
            raise HermiticityError(f"max |H - H^dagger| = {defect:.3e} exceeds {atol:.1e}")
        self._m = _frozen(0.5 * (m + m.conj().T))

    @property
    def entries(self) -> np.ndarray:
        return self._m

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self._m if dtype is None else self._m.astype(dtype)

    def __add__(self, other):
        return HermitianOperator(self._m + _as_matrix(other))

    def __sub__(self, other):
        return HermitianOperator(self._m - _as_matrix(other))

    def __mul__(self, scalar):
        if np.iscomplexobj(scalar) and np.imag(scalar) != 0:
            raise HermiticityError("multiplying by a complex scalar breaks hermiticity")
        return HermitianOperator(self._m * float(np.real(scalar)))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, HermitianOperator):
            return NotImplemented
        return np.array_equal(self._m, other._m)

    __hash__ = None

    def norm(self) -> float:
        """Spectral norm (largest |eigenvalue|)."""
        return float(np.max(np.abs(np.linalg.eigvalsh(self._m))))

    def commutes_with(self, other, atol: float = 1e-12) -> bool:
        b = _as_matrix(other)
        return bool(np.max(np.abs(self._m @ b - b @ self._m)) <= atol)

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim})"


def _as_matrix(x) -> np.ndarray:
    return x.entries if isinstance(x, HermitianOperator) else np.asarray(x, dtype=complex)


def as_hermitian(x) -> HermitianOperator:
    return x if isinstance(x, HermitianOperator) else HermitianOperator(x)


def identity(n: int) -> HermitianOperator:
    return HermitianOperator(np.eye(n))


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure state with unit 2-norm."""

    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > DEFAULT_TOLERANCES.norm_atol:
            raise ValueError(f"state norm {norm!r} differs from 1 by more than tolerance")
        object.__setattr__(self, "amplitudes", _frozen(v))

    @classmethod
    def normalized(cls, vector) -> "QuantumState":
        v = np.asarray(vector, dtype=complex).reshape(-1)
        return cls(v / np.linalg.norm(v))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density_matrix(self) -> np.ndarray:
        v = self.amplitudes
        return np.outer(v, v.conj())

    def overlap(self, other: "QuantumState") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending eigenvalues, gaps to the ground level, and eigenvectors.

    ``eigenvectors[:, i]`` is the i-th eigenvector.
    """

    eigenvalues: np.ndarray
    gaps: np.ndarray
    eigenvectors: np.ndarray

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def first_gap(self) -> float:
        return float(self.gaps[1])

    def state(self, i: int) -> QuantumState:
        return QuantumState.normalized(self.eigenvectors[:, i])

    def ground_state(self) -> QuantumState:
        return self.state(0)

    def require_nondegenerate(self, tol: Tolerances = DEFAULT_TOLERANCES) -> None:
        if self.gaps[1] <= tol.degeneracy_gap:
            raise DegenerateGroundStateError(
                f"ground state is degenerate: first gap {self.gaps[1]:.3e} <= {tol.degeneracy_gap:.1e}"
            )


def _first_significant(v: np.ndarray) -> int:
    mags = np.abs(v)
    idx = np.flatnonzero(mags > 1e-8 * mags.max())
    return int(idx[0])


def spectrum(H, tol: Tolerances = DEFAULT_TOLERANCES) -> Spectrum:
    """Diagonalize H with a reproducible eigenvector convention.

    Each eigenvector's first significant component is made real positive.
    Within a cluster of eigenvalues closer than ``tol.degeneracy_gap`` the
    vectors are ordered by decreasing magnitude of that component.
    """
    H = as_hermitian(H)
    try:
        w, V = np.linalg.eigh(H.entries)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}") from exc
    V = V.copy()
    lead = np.empty(len(w))
    for k in range(V.shape[1]):
        v = V[:, k]
        j = _first_significant(v)
        V[:, k] = v * (abs(v[j]) / v[j])
        lead[k] = abs(v[j])

    order = np.arange(len(w))
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[stop] - w[stop - 1] <= tol.degeneracy_gap:
            stop += 1
        if stop - start > 1:
            block = order[start:stop]
            order[start:stop] = block[np.argsort(-lead[block], kind="stable")]
        start = stop
    w = np.array(w[order], dtype=float)
    gaps = w - w[0]
    w.setflags(write=False)
    gaps.setflags(write=False)
    return Spectrum(eigenvalues=w, gaps=gaps, eigenvectors=_frozen(V[:, order]))


def offset_ground(H) -> tuple[HermitianOperator, float]:
    """Shift H by its smallest eigenvalue, returning (H - w1 I, w1)."""
    H = as_hermitian(H)
    w1 = float(np.linalg.eigvalsh(H.entries)[0])
    return HermitianOperator(H.entries - w1 * np.eye(H.dim)), w1


def expectation(X, state: QuantumState, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """<s|X|s> as a real number.

    The imaginary rounding residue is checked against
    ``tol.expectation_imag_atol`` scaled by max(1, ||X||_max).
    """
    X = as_hermitian(X)
    v = state.amplitudes
    if X.dim != v.shape[0]:
        raise DimensionMismatchError(f"operator dim {X.dim} != state dim {v.shape[0]}")
    val = np.vdot(v, X.entries @ v)
    scale = max(1.0, float(np.max(np.abs(X.entries))))
    if abs(val.imag) > tol.expectation_imag_atol * scale:
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


# --- matrix text format -----------------------------------------------------


def _parse_entry(token: str) -> complex:
    t = token.strip().replace("I", "i")
    if t.endswith("i"):
        body = t[:-1]
        if body in ("", "+", "-"):
            t = body + "1j"
        else:
            t = body + "j"
    return complex(t)


def parse_matrix(text: str, path=None) -> HermitianOperator:
    """Parse the whitespace matrix format: first line N, then N rows of N entries.

    Entries look like ``1.5``, ``-2i``, or ``0.5-0.25i``.
    """
    rows = [(n, ln.split()) for n, ln in enumerate(text.splitlines(), start=1) if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ConfigError("empty matrix file", path=path)
    lineno, head = rows[0]
    try:
        (n_str,) = head
        n = int(n_str)
    except ValueError:
        raise ConfigError("first line must be the dimension N", line=lineno, path=path) from None
    if n < 2:
        raise ConfigError(f"dimension must be >= 2, got {n}", line=lineno, path=path)
    body = rows[1:]
    if len(body) != n:
        raise ConfigError(f"expected {n} rows, found {len(body)}", path=path)
    m = np.empty((n, n), dtype=complex)
    for r, (lineno, tokens) in enumerate(body):
        if len(tokens) != n:
            raise ConfigError(f"expected {n} entries, found {len(tokens)}", line=lineno, path=path)
        for c, tok in enumerate(tokens):
            try:
                m[r, c] = _parse_entry(tok)
            except ValueError:
                raise ConfigError(f"bad entry {tok!r}", line=lineno, path=path) from None
    try:
        return HermitianOperator(m)
    except HermiticityError as exc:
        raise ConfigError(str(exc), path=path) from exc


def read_matrix(path) -> HermitianOperator:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read matrix file: {exc}", path=path) from exc
    return parse_matrix(text, path=path)


def format_matrix(H) -> str:
    m = _as_matrix(H)
    lines = [str(m.shape[0])]
    for row in m:
        lines.append(" ".join(f"{z.real:.17g}{z.imag:+.17g}i" for z in row))
    return "\n".join(lines) + "\n"


def write_matrix(path, H) -> None:
    Path(path).write_text(format_matrix(H))
