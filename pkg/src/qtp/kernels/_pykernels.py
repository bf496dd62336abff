"""numpy implementations of the batch kernels (used when the extension is absent).

Arithmetic mirrors :mod:`qtp.statekit` operation for operation, so a batch
run and a per-photon session agree to the last bit wherever numpy's
trigonometry matches the platform libm.
"""

import math

import numpy as np

HALF_PI = math.pi / 2


def _rotate(h, v, phi):
    c = np.cos(phi)
    s = np.sin(phi)
    return c * h - s * v, s * h + c * v


def measure(h, v, basis, u):
    """Projective measurement per row; returns (outcomes int8, post_h, post_v)."""
    h = np.asarray(h, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    basis = np.asarray(basis, dtype=np.float64)
    amp = np.cos(basis) * h + np.sin(basis) * v
    p0 = amp.real * amp.real + amp.imag * amp.imag
    one = ~(np.asarray(u) < p0)
    theta = np.where(one, basis + HALF_PI, basis)
    post_h = np.cos(theta).astype(np.complex128)
    post_v = np.sin(theta).astype(np.complex128)
    return one.astype(np.int8), post_h, post_v


def three_pass(psi_h, psi_v, rot, taps, tap_basis, tap_u):
    """Rotate through passes 1-3 and the final undo, measuring on tapped passes.

    ``rot[:, 0..2]`` are the rotations applied before passes 1, 2, 3 hit the
    channel, ``rot[:, 3]`` the receiver's final undo.  Returns
    ``(final_h, final_v, outcomes)`` with outcome -1 on untapped passes.
    """
    h = np.array(psi_h, dtype=np.complex128)
    v = np.array(psi_v, dtype=np.complex128)
    rot = np.asarray(rot, dtype=np.float64)
    n = h.shape[0]
    outcomes = np.full((n, 3), -1, dtype=np.int8)
    for p in range(3):
        h, v = _rotate(h, v, rot[:, p])
        if taps[p]:
            outcomes[:, p], h, v = measure(h, v, tap_basis[:, p], tap_u[:, p])
    h, v = _rotate(h, v, rot[:, 3])
    return h, v, outcomes


def fidelity(ah, av, bh, bv):
    # spelled out in real parts: numpy's complex multiply may round differently
    ah, av, bh, bv = (np.asarray(x, dtype=np.complex128) for x in (ah, av, bh, bv))
    zr = (ah.real * bh.real + ah.imag * bh.imag) + (av.real * bv.real + av.imag * bv.imag)
    zi = (ah.real * bh.imag - ah.imag * bh.real) + (av.real * bv.imag - av.imag * bv.real)
    return np.clip(zr * zr + zi * zi, 0.0, 1.0)
