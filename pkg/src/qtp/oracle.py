"""Exact probabilities by exhaustive enumeration over the angle lattice.

Every lattice value of every free angle (Alice's, Bob's, the pre-shared one
in V3, Eve's own lattice choices) is enumerated, each of Eve's measurement
outcome branches is weighted by its Born probability, and the results are
averaged.  Bob's final measurement is folded in analytically: with input
|psi> and final state |f>, his error probability is ``1 - |<psi|f>|^2``.

Partial sums use numpy's pairwise summation; totals use ``math.fsum``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from qtp.adversary import AttackSpec
from qtp.config import Seeds, SessionConfig
from qtp.errors import OracleUnsupportedError
from qtp.inference import ml_guess
from qtp.phases import PhaseSet, derive_secret, stream
from qtp.protocol import Variant
from qtp.report import RunReport
from qtp.statekit import H, V, PureState

MAX_K = 64
MAX_TERMS = 1 << 21
HALF_PI = math.pi / 2


@dataclass(frozen=True)
class ExactResult:
    variant: str
    k: int
    attack: dict
    alphabet: str
    eve_accuracy: float | None
    bob_error_rate: float
    mean_output_fidelity: float
    eve_mean_fidelity: float | None
    term_count: int

    def to_dict(self) -> dict:
        return {"schema": 1, **asdict(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _check(k: int, term_count: int) -> None:
    PhaseSet(k)
    if k > MAX_K:
        raise OracleUnsupportedError(f"K={k} exceeds the oracle limit of {MAX_K}")
    if term_count > MAX_TERMS:
        raise OracleUnsupportedError(
            f"{term_count} terms exceed the enumeration guard of {MAX_TERMS}"
        )


def _rot(h, v, phi):
    c, s = np.cos(phi), np.sin(phi)
    return c * h - s * v, s * h + c * v


def _overlap2(h, v, psi: PureState):
    z = np.conj(h) * psi.amp_h + np.conj(v) * psi.amp_v
    return z.real * z.real + z.imag * z.imag


def _axes(names: list[str], k: int) -> dict[str, np.ndarray]:
    """One broadcastable lattice array per named axis."""
    ang = np.arange(k) * math.pi / k
    out = {}
    for i, name in enumerate(names):
        shape = [1] * len(names)
        shape[i] = k
        out[name] = ang.reshape(shape)
    return out


def _mean(x, shape) -> float:
    x = np.broadcast_to(x, shape)
    return math.fsum(x.ravel().tolist()) / x.size


def _resolve_inputs(alphabet, inputs, weights):
    if alphabet == "bits":
        states = (H, V)
    elif alphabet == "qubits":
        if not inputs:
            raise ValueError("the qubits alphabet needs a finite list of test states")
        states = tuple(inputs)
    else:
        raise ValueError(f"unknown alphabet {alphabet!r}")
    if weights is None:
        weights = [1.0 / len(states)] * len(states)
    weights = [float(w) for w in weights]
    if len(weights) != len(states) or any(w < 0 for w in weights) or not math.isclose(sum(weights), 1.0):
        raise ValueError("weights must be a probability vector over the inputs")
    return states, weights


def enumerate_honest(variant, k: int, inputs=None, weights=None) -> ExactResult:
    """Honest-channel correctness: error 0 and fidelity 1 for every lattice combination."""
    alphabet = "bits" if inputs is None else "qubits"
    return enumerate_attack(variant, k, AttackSpec("none"), alphabet=alphabet, inputs=inputs, weights=weights)


def enumerate_attack(
    variant,
    k: int,
    spec: AttackSpec,
    *,
    alphabet: str = "bits",
    inputs=None,
    weights=None,
) -> ExactResult:
    """Exact Eve accuracy, Bob error and Bob fidelity for one scenario.

    ``alphabet="bits"`` sends |H>/|V> (weights default to uniform) and Eve
    guesses bits; ``alphabet="qubits"`` averages over the caller's finite
    ``inputs`` and Eve makes no bit guess.  V1 always uses bits.
    """
    variant = Variant.parse(variant)
    if variant is Variant.V1_CLASSICAL:
        alphabet = "bits"
    states, w = _resolve_inputs(alphabet, inputs, weights)
    if spec.kind == "mitm":
        return _enumerate_mitm(variant, k, spec, alphabet, states, w)
    return _enumerate_intercept(variant, k, spec, alphabet, states, w)


def _enumerate_intercept(variant, k, spec, alphabet, states, w) -> ExactResult:
    v3 = variant is Variant.V3_AUTHENTICATED
    passes = sorted(spec.passes) if spec.kind == "intercept_resend" else []
    strat = spec.basis.kind
    if passes and strat == "continuous":
        raise OracleUnsupportedError("continuous basis choices can only be sampled (use monte_carlo)")
    lattice_bases = passes if strat == "lattice" else []
    free = ["A", "B"] + (["C"] if v3 else [])
    names = free + [f"b{p}" for p in lattice_bases]
    m = len(passes)
    term_count = k ** len(names) * 2 ** m
    _check(k, term_count)

    ax = _axes(names, k)
    shape = (k,) * len(names)
    a, b = ax["A"], ax["B"]
    c = ax["C"] if v3 else 0.0
    pass_rot = {1: a + c, 2: b, 3: -a}
    final_rot = -(b + c)
    basis = {p: (ax[f"b{p}"] if strat == "lattice" else spec.basis.angle) for p in passes}
    free_axes = tuple(range(len(free)))

    fid_terms = []
    # likelihood tables L[j][e]: P(e | input j, Eve's bases), averaged over free angles
    lik = [[None] * (2 ** m) for _ in states]
    branches = list(itertools.product((0, 1), repeat=m))
    for j, psi in enumerate(states):
        for bi, e in enumerate(branches):
            h = np.complex128(psi.amp_h)
            v = np.complex128(psi.amp_v)
            prob = np.ones(1)
            outcome = dict(zip(passes, e))
            for p in (1, 2, 3):
                h, v = _rot(h, v, pass_rot[p])
                if p in outcome:
                    theta = basis[p] + outcome[p] * HALF_PI
                    ct, st = np.cos(theta), np.sin(theta)
                    amp = ct * h + st * v
                    prob = prob * (amp.real * amp.real + amp.imag * amp.imag)
                    h, v = ct.astype(np.complex128), st.astype(np.complex128)
            h, v = _rot(h, v, final_rot)
            full = np.broadcast_to(prob, shape)
            fid_terms.append(w[j] * _mean(full * _overlap2(h, v, psi), shape))
            lik[j][bi] = full.mean(axis=free_axes) if free_axes else full
    fid = math.fsum(fid_terms)
    err = 1.0 - fid
    eve_acc = None
    if passes and alphabet == "bits":
        eve_acc = _ml_accuracy(lik, w, branches, k ** len(lattice_bases))
    return ExactResult(
        variant=variant.value,
        k=k,
        attack=spec.to_dict(),
        alphabet=alphabet,
        eve_accuracy=eve_acc,
        bob_error_rate=_clip(err),
        mean_output_fidelity=_clip(fid),
        eve_mean_fidelity=None,
        term_count=term_count,
    )


def _ml_accuracy(lik, w, branches, n_cells) -> float:
    """Probability that Eve's maximum-likelihood bit guess is right."""
    terms = []
    prior = (0.5, 0.5)
    for bi, e in enumerate(branches):
        tables = [np.asarray(lik[j][bi]).ravel() for j in range(len(w))]
        for cell in range(tables[0].size):
            lk = [t[cell] for t in tables]
            g = ml_guess(lk, prior, e[0])
            terms.append(w[g] * lk[g] / n_cells)
    return _clip(math.fsum(terms))


def _enumerate_mitm(variant, k, spec, alphabet, states, w) -> ExactResult:
    v3 = variant is Variant.V3_AUTHENTICATED
    known = v3 and spec.secret_known
    measuring = variant is Variant.V1_CLASSICAL or alphabet == "bits"
    names = ["A", "E1", "E2", "B"] + (["C"] if v3 else [])
    term_count = k ** len(names) * (2 if measuring else 1)
    _check(k, term_count)
    ax = _axes(names, k)
    shape = (k,) * len(names)
    a, e1, e2, b = ax["A"], ax["E1"], ax["E2"], ax["B"]
    c = ax["C"] if v3 else 0.0

    fid_terms, eve_fid_terms, acc_terms = [], [], []
    for j, psi in enumerate(states):
        h, v = np.complex128(psi.amp_h), np.complex128(psi.amp_v)
        for phi in (a + c, e1, -a, -(e1 + c) if known else -e1):
            h, v = _rot(h, v, phi)
        rec_h, rec_v = h, v
        if variant is not Variant.V1_CLASSICAL:
            eve_fid_terms.append(w[j] * _mean(_overlap2(rec_h, rec_v, psi), shape))
        if measuring:
            branches = []
            for g in (0, 1):
                theta = g * HALF_PI
                amp = math.cos(theta) * rec_h + math.sin(theta) * rec_v
                pg = amp.real * amp.real + amp.imag * amp.imag
                if variant is Variant.V1_CLASSICAL:
                    payload = (H, V)[g]
                    branches.append((g, pg, payload.amp_h, payload.amp_v))
                else:
                    branches.append((g, pg, complex(math.cos(theta)), complex(math.sin(theta))))
        else:
            branches = [(None, np.ones(1), rec_h, rec_v)]
        for g, pg, ph, pv in branches:
            h, v = np.complex128(ph) if np.isscalar(ph) else ph, np.complex128(pv) if np.isscalar(pv) else pv
            for phi in (c + e2 if known else e2, b, -e2, -(b + c)):
                h, v = _rot(h, v, phi)
            fid_terms.append(w[j] * _mean(np.broadcast_to(pg, shape) * _overlap2(h, v, psi), shape))
            if g is not None and g == j:
                acc_terms.append(w[j] * _mean(pg, shape))
    fid = math.fsum(fid_terms)
    return ExactResult(
        variant=variant.value,
        k=k,
        attack=spec.to_dict(),
        alphabet=alphabet,
        eve_accuracy=_clip(math.fsum(acc_terms)) if measuring else None,
        bob_error_rate=_clip(1.0 - fid),
        mean_output_fidelity=_clip(fid),
        eve_mean_fidelity=_clip(math.fsum(eve_fid_terms)) if eve_fid_terms else None,
        term_count=term_count,
    )


def _clip(x: float) -> float:
    return min(1.0, max(0.0, x))


def monte_carlo(
    variant,
    k: int,
    spec: AttackSpec,
    n: int,
    seeds: Seeds | int = 0,
    *,
    alphabet: str = "bits",
    complex_qubits: bool = False,
    secret=None,
) -> RunReport:
    """Sample ``n`` positions through the batch engine.

    For V3 without an explicit secret, one is derived from the ``secret``
    stream seeded with ``seeds.message``.
    """
    from qtp.batch import run_batch

    variant = Variant.parse(variant)
    if isinstance(seeds, int):
        seeds = Seeds.all(seeds)
    if variant is Variant.V3_AUTHENTICATED and secret is None:
        secret = derive_secret(PhaseSet(k), stream(seeds.message, "secret"), n)
    if variant is Variant.V1_CLASSICAL:
        alphabet = "bits"
    spec = AttackSpec(spec.kind, spec.passes, spec.basis, seeds.eve, spec.secret_known)
    cfg = SessionConfig(
        variant=variant,
        k=k,
        n=n,
        message_source="random_bits" if alphabet == "bits" else "random_qubits",
        complex_qubits=complex_qubits,
        seeds=seeds,
        attack=spec,
        secret=secret if variant is Variant.V3_AUTHENTICATED else None,
    )
    return run_batch(cfg)


def agreement(exact: ExactResult, mc: RunReport, sigmas: float = 4.0) -> dict[str, tuple[float, float, float, bool]]:
    """Compare each Monte Carlo statistic to its exact value.

    Returns ``{name: (empirical, exact, allowed deviation, ok)}``.  The
    allowed deviation is ``sigmas`` standard errors computed from the exact
    probability (Bernoulli statistics) or from the sample spread (fidelities),
    plus 1e-9 so that deterministic statistics must match to that precision.
    """
    out = {}
    n = mc.counters["positions"]

    def bern(name, emp, p):
        tol = sigmas * math.sqrt(p * (1.0 - p) / n) + 1e-9
        out[name] = (emp, p, tol, abs(emp - p) <= tol)

    if mc.bob_bit_error_rate is not None:
        bern("bob_error_rate", mc.bob_bit_error_rate, exact.bob_error_rate)
    else:
        tol = sigmas * (mc.fidelity_stderr or 0.0) + 1e-9
        emp = mc.mean_output_fidelity
        out["mean_output_fidelity"] = (emp, exact.mean_output_fidelity, tol, abs(emp - exact.mean_output_fidelity) <= tol)
    if exact.eve_accuracy is not None and mc.eve and mc.eve.get("eve_accuracy") is not None:
        bern("eve_accuracy", mc.eve["eve_accuracy"], exact.eve_accuracy)
    if exact.eve_mean_fidelity is not None and mc.eve and mc.eve.get("eve_mean_fidelity") is not None:
        emp = mc.eve["eve_mean_fidelity"]
        tol = sigmas * mc.eve["eve_fidelity_stderr"] + 1e-9
        out["eve_mean_fidelity"] = (emp, exact.eve_mean_fidelity, tol, abs(emp - exact.eve_mean_fidelity) <= tol)
    return out
