"""Single-qubit polarization algebra.

States are two complex amplitudes over the {|H>, |V>} basis.  Rotations are
the real matrix ``[[cos, -sin], [sin, cos]]``; all of them commute, which is
the whole reason the three-pass protocols work.

Measurement never draws randomness itself: callers pass a uniform variate
``u`` from their own seeded stream, and the outcome is 0 iff ``u < p0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from qtp.errors import InvalidAngleError

NORM_TOL = 1e-12
SAME_STATE_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class PureState:
    """A normalized polarization state ``amp_h |H> + amp_v |V>``."""

    amp_h: complex
    amp_v: complex

    def __post_init__(self) -> None:
        norm = _norm2(self.amp_h, self.amp_v)
        if not abs(norm - 1.0) <= NORM_TOL:
            raise ValueError(f"state is not normalized: |h|^2+|v|^2 = {norm!r}")

    @classmethod
    def normalized(cls, amp_h: complex, amp_v: complex) -> PureState:
        """Build a state from unnormalized amplitudes."""
        scale = math.sqrt(_norm2(amp_h, amp_v))
        if scale == 0.0 or not math.isfinite(scale):
            raise ValueError("cannot normalize a zero or non-finite vector")
        return cls(complex(amp_h) / scale, complex(amp_v) / scale)

    def __iter__(self):
        yield self.amp_h
        yield self.amp_v


def _norm2(h: complex, v: complex) -> float:
    h = complex(h)
    v = complex(v)
    return h.real * h.real + h.imag * h.imag + v.real * v.real + v.imag * v.imag


def _check_angle(phi: float) -> float:
    phi = float(phi)
    if not math.isfinite(phi):
        raise InvalidAngleError(f"angle must be finite, got {phi!r}")
    return phi


H = PureState(1 + 0j, 0j)
V = PureState(0j, 1 + 0j)


def bit_state(bit: int) -> PureState:
    """``(bit xor 1)|H> + bit|V>``, the classical encoding of one bit."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    return V if bit else H


def state_from_angle(phi: float) -> PureState:
    """Linear polarization at angle ``phi``: ``cos(phi)|H> + sin(phi)|V>``."""
    phi = _check_angle(phi)
    return PureState(complex(math.cos(phi)), complex(math.sin(phi)))


def rotate(s: PureState, phi: float) -> PureState:
    phi = _check_angle(phi)
    c = math.cos(phi)
    sn = math.sin(phi)
    h, v = s.amp_h, s.amp_v
    return PureState(c * h - sn * v, sn * h + c * v)


def born_p0(s: PureState, basis: float) -> float:
    """Probability of outcome 0 when measuring ``s`` in the basis at ``basis``."""
    basis = _check_angle(basis)
    amp = math.cos(basis) * s.amp_h + math.sin(basis) * s.amp_v
    return amp.real * amp.real + amp.imag * amp.imag


def measure(s: PureState, basis: float, u: float) -> tuple[int, PureState]:
    """Projective measurement in ``{|basis>, |basis + pi/2>}``.

    Returns the outcome bit and the collapsed state.  Outcome 0 iff
    ``u < p0`` with ``p0 = |<basis|s>|^2``.
    """
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u!r}")
    p0 = born_p0(s, basis)
    if u < p0:
        return 0, state_from_angle(basis)
    return 1, state_from_angle(basis + math.pi / 2)


def inner(a: PureState, b: PureState) -> complex:
    return a.amp_h.conjugate() * b.amp_h + a.amp_v.conjugate() * b.amp_v


def fidelity(a: PureState, b: PureState) -> float:
    """``|<a|b>|^2``, clipped into [0, 1]."""
    z = inner(a, b)
    f = z.real * z.real + z.imag * z.imag
    return min(1.0, max(0.0, f))


def same_state(a: PureState, b: PureState, tol: float = SAME_STATE_TOL) -> bool:
    """Physical equality: fidelity within ``tol`` of 1 (ignores global phase)."""
    return fidelity(a, b) >= 1.0 - tol
