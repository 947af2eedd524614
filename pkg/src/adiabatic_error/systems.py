"""Built-in test systems."""

import numpy as np

from .operators import HermitianOperator, spectrum

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])


def reference_system() -> tuple[HermitianOperator, HermitianOperator]:
    """Two-level system H1 = diag(0, 1), dH = Pauli-X."""
    return HermitianOperator(np.diag([0.0, 1.0])), HermitianOperator(PAULI_X)


def gue(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def random_system(n: int, seed: int) -> tuple[HermitianOperator, HermitianOperator]:
    """Seeded GUE pair with H1 scaled to first gap 1 and ||dH||_2 = 1."""
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    h1 = gue(rng, n)
    dh = gue(rng, n)
    gap = spectrum(h1).first_gap
    h1 = h1 / gap
    dh = dh / np.max(np.abs(np.linalg.eigvalsh(dh)))
    return HermitianOperator(h1), HermitianOperator(dh)
