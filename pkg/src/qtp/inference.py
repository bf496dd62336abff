"""Eve's bit estimator for intercept/resend.

Eve knows the protocol, the lattice, her own bases and her outcomes.  She
scores each candidate input by the probability of her observed outcomes,
averaged over every lattice value of the honest parties' angles (and of the
pre-shared angles in V3, which she does not know), and picks the maximum.
Exact ties go to the outcome of her earliest intercepted pass, which makes the
single-pass rule "guess = outcome bit".
"""

from __future__ import annotations

import math

import numpy as np

TIE_RTOL = 1e-9


def wire_likelihoods(variant, k: int, passes, bases, outcomes, candidates) -> np.ndarray:
    """``P(outcomes | candidate)`` for each candidate input state.

    ``passes``, ``bases`` and ``outcomes`` are aligned sequences describing
    Eve's intercepts in pass order.  Collapse after each measurement is
    sequential: a measured photon continues as the basis eigenstate.
    """
    from qtp.protocol import Variant

    ang = np.arange(k) * math.pi / k
    a = ang[:, None, None]
    b = ang[None, :, None]
    c = ang[None, None, :] if variant is Variant.V3_AUTHENTICATED else np.zeros((1, 1, 1))
    taps = dict(zip(passes, zip(bases, outcomes)))
    pass_rot = {1: a + c, 2: b, 3: -a}
    out = np.empty(len(candidates))
    for j, cand in enumerate(candidates):
        h = np.complex128(cand.amp_h)
        v = np.complex128(cand.amp_v)
        prob = np.ones(1)
        for p in (1, 2, 3):
            co, si = np.cos(pass_rot[p]), np.sin(pass_rot[p])
            h, v = co * h - si * v, si * h + co * v
            if p in taps:
                basis, e = taps[p]
                theta = basis + e * math.pi / 2
                amp = math.cos(theta) * h + math.sin(theta) * v
                prob = prob * (amp.real ** 2 + amp.imag ** 2)
                h = np.complex128(math.cos(theta))
                v = np.complex128(math.sin(theta))
        out[j] = float(np.mean(np.broadcast_to(prob, np.broadcast_shapes(prob.shape, (k, k, c.shape[2])))))
    return out


def ml_guess(likelihoods, prior, earliest_outcome: int) -> int:
    """Index of the most likely candidate; ties resolve to ``earliest_outcome``."""
    w = np.asarray(prior, dtype=float) * np.asarray(likelihoods, dtype=float)
    best = float(w.max())
    if best <= 0.0:
        return earliest_outcome if 0 <= earliest_outcome < len(w) else 0
    tied = np.flatnonzero(w >= best * (1.0 - TIE_RTOL))
    if earliest_outcome in tied:
        return int(earliest_outcome)
    return int(tied[0])
