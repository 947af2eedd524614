"""Central tolerance record.

Every numeric threshold used by the library lives here so that experiments
can override any of them (the config file accepts ``tol.<field> = value``).
"""

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    # operator-core
    hermitian_atol: float = 1e-12
    norm_atol: float = 1e-12
    orthonormality_atol: float = 1e-10
    reconstruction_rtol: float = 1e-10
    expectation_imag_atol: float = 1e-12
    degeneracy_gap: float = 1e-10
    # schedules
    table_endpoint_atol: float = 1e-9
    # propagator
    auto_state_tol: float = 1e-11
    auto_max_doublings: int = 24
    initial_steps: int = 256
    unitarity_atol: float = 1e-10
    magnus_rtol: float = 1e-10
    anti_hermitian_atol: float = 1e-10
    # estimator
    gap_underflow: float = 1e-8
    quadrature_rtol: float = 1e-9
    coupling_floor: float = 1e-16
    # harness
    eps_floor: float = 1e-14

    def override(self, **kwargs) -> "Tolerances":
        """Return a copy with some fields replaced, coercing to the field type."""
        known = {f.name: f for f in fields(self)}
        coerced = {}
        for key, value in kwargs.items():
            if key not in known:
                raise KeyError(f"unknown tolerance {key!r}")
            default = getattr(self, key)
            coerced[key] = int(value) if isinstance(default, int) else float(value)
        return replace(self, **coerced)


DEFAULT_TOLERANCES = Tolerances()
