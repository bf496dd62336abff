"""Vectorized session engine.

Draws exactly the same random numbers, from the same named streams and in the
same order, as :func:`qtp.protocol.run_session` with the matching channel,
then pushes all positions through the batch kernels at once.  Decoded bits and
Eve's guesses therefore coincide with a per-photon session; only the speed
differs.
"""

from __future__ import annotations

import math

import numpy as np

import qtp.kernels
from qtp.adversary import mean_and_stderr
from qtp.config import SessionConfig
from qtp.inference import ml_guess, wire_likelihoods
from qtp.phases import PhaseSet, angles_of, sample, stream
from qtp.protocol import Message, Variant
from qtp.report import RunReport, build_report
from qtp.statekit import H, V, PureState


def _inputs(msg: Message, variant: Variant) -> tuple[np.ndarray, np.ndarray]:
    if variant is Variant.V1_CLASSICAL or msg.qubits is None:
        bits = np.asarray(msg.bits, dtype=np.int64)
        return (1 - bits).astype(np.complex128), bits.astype(np.complex128)
    h = np.fromiter((s.amp_h for s in msg.qubits), dtype=np.complex128, count=len(msg))
    v = np.fromiter((s.amp_v for s in msg.qubits), dtype=np.complex128, count=len(msg))
    return h, v


def _states(h: np.ndarray, v: np.ndarray) -> list[PureState]:
    return [PureState(a, b) for a, b in zip(h.tolist(), v.tolist())]


def _eve_summary(cfg, n, measurements, guesses, msg, eve_fids=None) -> dict:
    spec = cfg.attack
    out = {
        "kind": spec.kind,
        "analysis_mode": spec.secret_known,
        "positions_touched": n,
        "measurements": measurements,
        "guesses": 0,
        "eve_accuracy": None,
        "eve_accuracy_stderr": None,
        "eve_mean_fidelity": None,
        "eve_fidelity_stderr": None,
        "attack": spec.to_dict(),
    }
    if guesses is not None and msg.bits is not None:
        correct = guesses == np.asarray(msg.bits)
        p = math.fsum(1.0 for c in correct.tolist() if c) / n
        out["guesses"] = n
        out["eve_accuracy"] = p
        out["eve_accuracy_stderr"] = math.sqrt(p * (1.0 - p) / n)
    if eve_fids is not None:
        out.update(mean_and_stderr(eve_fids.tolist(), "eve_mean_fidelity", "eve_fidelity_stderr"))
    return out


def _intercept_guesses(variant, k, passes, bases, outcomes) -> np.ndarray:
    keys = np.concatenate([bases, outcomes.astype(np.float64)], axis=1)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    m = len(passes)
    picks = np.empty(len(uniq), dtype=np.int64)
    for r, row in enumerate(uniq):
        b = [float(x) for x in row[:m]]
        e = [int(x) for x in row[m:]]
        lk = wire_likelihoods(variant, k, passes, b, e, (H, V))
        picks[r] = ml_guess(lk, (0.5, 0.5), e[0])
    return picks[inverse.reshape(-1)]


def run_batch(cfg: SessionConfig, message: Message | None = None, kernels=None) -> RunReport:
    """Batch equivalent of ``run_session(cfg, build_channel(cfg.attack, ...))``."""
    kern = kernels if kernels is not None else qtp.kernels
    msg = message if message is not None else cfg.build_message()
    n = len(msg)
    variant = cfg.variant
    ps = PhaseSet(cfg.k)
    v3 = variant is Variant.V3_AUTHENTICATED
    a_ang = angles_of(ps, sample(ps, stream(cfg.seeds.alice, "alice"), n))
    bob_rng = stream(cfg.seeds.bob, "bob")
    b_ang = angles_of(ps, sample(ps, bob_rng, n))
    c_ang = angles_of(ps, cfg.secret.indices) if v3 else None
    alice_first = c_ang + a_ang if v3 else a_ang
    bob_last = -(b_ang + c_ang) if v3 else -b_ang
    psi_h, psi_v = _inputs(msg, variant)
    zeros = np.zeros(n)
    spec = cfg.attack
    eve = None
    guesses = None

    if spec.kind == "mitm":
        eve_rng = stream(spec.eve_seed, "eve")
        eve_measure = stream(spec.eve_seed, "eve.measure")
        e1 = angles_of(ps, sample(ps, eve_rng, n))
        e2 = angles_of(ps, sample(ps, eve_rng, n))
        known = v3 and spec.secret_known
        leg1 = np.column_stack([alice_first, e1, -a_ang, -(e1 + c_ang) if known else -e1])
        rh, rv, _ = kern.three_pass(psi_h, psi_v, leg1, (False, False, False), np.zeros((n, 3)), np.zeros((n, 3)))
        measuring = variant is Variant.V1_CLASSICAL or cfg.alphabet == "bits"
        eve_fids = None if variant is Variant.V1_CLASSICAL else kern.fidelity(rh, rv, psi_h, psi_v)
        if measuring:
            guesses, ph, pv = kern.measure(rh, rv, zeros, eve_measure.random(n))
            guesses = guesses.astype(np.int64)
            if variant is Variant.V1_CLASSICAL:
                ph, pv = (1 - guesses).astype(np.complex128), guesses.astype(np.complex128)
        else:
            ph, pv = rh, rv
        leg2 = np.column_stack([c_ang + e2 if known else e2, b_ang, -e2, bob_last])
        fh, fv, _ = kern.three_pass(ph, pv, leg2, (False, False, False), np.zeros((n, 3)), np.zeros((n, 3)))
        eve = _eve_summary(cfg, n, n if measuring else 0, guesses, msg, eve_fids)
    else:
        taps = tuple(p in spec.passes for p in (1, 2, 3))
        tap_basis = np.zeros((n, 3))
        tap_u = np.zeros((n, 3))
        passes = sorted(spec.passes)
        cols = [p - 1 for p in passes]
        if spec.kind == "intercept_resend":
            m = len(passes)
            eve_rng = stream(spec.eve_seed, "eve")
            strat = spec.basis
            if strat.kind == "fixed":
                bases = np.full((n, m), strat.angle)
            elif strat.kind == "lattice":
                bases = angles_of(ps, sample(ps, eve_rng, n * m)).reshape(n, m)
            else:
                bases = (eve_rng.random(n * m) * math.pi).reshape(n, m)
            tap_basis[:, cols] = bases
            tap_u[:, cols] = stream(spec.eve_seed, "eve.measure").random(n * m).reshape(n, m)
        rot = np.column_stack([alice_first, b_ang, -a_ang, bob_last])
        fh, fv, outcomes = kern.three_pass(psi_h, psi_v, rot, taps, tap_basis, tap_u)
        if spec.kind == "intercept_resend":
            if cfg.alphabet == "bits":
                guesses = _intercept_guesses(variant, cfg.k, passes, tap_basis[:, cols], outcomes[:, cols])
            eve = _eve_summary(cfg, n, n * len(passes), guesses, msg)

    if variant is Variant.V1_CLASSICAL:
        bits, _, _ = kern.measure(fh, fv, zeros, bob_rng.random(n))
        decoded = bits.tolist()
    else:
        decoded = _states(fh, fv)
    rep = build_report(cfg, msg, decoded, eve_summary=eve)
    if guesses is not None:
        rep.eve_guesses = guesses.tolist()
    return rep
