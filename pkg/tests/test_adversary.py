import dataclasses
import math

import numpy as np
import pytest

from qtp import statekit as sk
from qtp.adversary import (
    PROVENANCE_TAGS,
    AttackSpec,
    IdentityChannel,
    InterceptResendChannel,
    MitmChannel,
    build_channel,
)
from qtp.batch import run_batch
from qtp.errors import ConfigError
from qtp.inference import ml_guess, wire_likelihoods
from qtp.phases import PhaseSet, SecretAngles
from qtp.protocol import PartyState, Variant, run_session

from conftest import intercept, make_cfg


def session(cfg, **kw):
    ch = build_channel(cfg.attack, cfg.variant, PhaseSet(cfg.k), alphabet=cfg.alphabet, secret=cfg.secret, **kw)
    return run_session(cfg, ch), ch


def reachable(obj, seen=None, depth=0):
    """Every object reachable through instance attributes and containers."""
    seen = seen if seen is not None else {}
    if id(obj) in seen or depth > 6:
        return seen
    seen[id(obj)] = obj
    if isinstance(obj, dict):
        children = list(obj.keys()) + list(obj.values())
    elif isinstance(obj, (list, tuple, set, frozenset)):
        children = list(obj)
    elif hasattr(obj, "__dict__"):
        children = list(vars(obj).values())
    elif hasattr(obj, "__slots__"):
        children = [getattr(obj, s) for s in obj.__slots__ if hasattr(obj, s)]
    else:
        children = []
    for c in children:
        if isinstance(c, (int, float, str, bytes, complex, type(None))):
            continue
        reachable(c, seen, depth + 1)
    return seen


def test_identity_channel_records_nothing():
    rep, ch = session(make_cfg(n=50))
    assert isinstance(ch, IdentityChannel)
    assert ch.record is None and rep.eve is None


@pytest.mark.parametrize("basis", ["fixed:0", "lattice", "continuous"])
def test_provenance_audit_intercept(basis):
    cfg = make_cfg("classical", k=8, n=300, attack=intercept([1, 2], basis))
    rep, ch = session(cfg)
    entries = ch.record.entries
    assert len(entries) == 300
    for e in entries.values():
        assert set(e.provenance.values()) <= PROVENANCE_TAGS
        assert e.provenance["outcomes"] == "statekit.measure"
        assert e.provenance["guess"] == "rule:ml"
        assert e.provenance["bases"] == ("fixed" if basis.startswith("fixed") else "eve_rng")
        assert e.passes == [1, 2] and len(e.outcomes) == 2


@pytest.mark.parametrize("variant", ["classical", "quantum", "auth"])
def test_provenance_audit_mitm(variant):
    cfg = make_cfg(variant, k=4, n=100, attack=AttackSpec("mitm"))
    _, ch = session(cfg)
    for e in ch.record.entries.values():
        assert set(e.provenance.values()) <= PROVENANCE_TAGS
        assert e.provenance["guess"] == "statekit.measure"


@pytest.mark.parametrize("variant", ["classical", "quantum", "auth"])
def test_guesses_use_only_wire_observations(variant):
    # each guess must be reproducible from the public variant/K and Eve's own
    # bases and outcomes; nothing else is an input to the rule
    cfg = make_cfg(variant, k=4, n=200, attack=intercept([1, 3], "lattice"))
    _, ch = session(cfg)
    for e in ch.record.entries.values():
        lk = wire_likelihoods(Variant.parse(variant), 4, e.passes, e.bases, e.outcomes, (sk.H, sk.V))
        assert e.guess == ml_guess(lk, (0.5, 0.5), e.outcomes[0])


@pytest.mark.parametrize("spec", [intercept([1, 2, 3], "lattice"), AttackSpec("mitm")])
def test_eve_holds_no_honest_secrets(spec):
    cfg = make_cfg("auth", k=4, n=30, attack=spec)
    _, ch = session(cfg)
    objs = reachable(ch).values()
    assert not any(isinstance(o, SecretAngles) for o in objs)
    # the only parties she holds are her own impersonations
    for o in objs:
        if isinstance(o, PartyState):
            assert o.secret is None and o.variant is Variant.V2_QUANTUM


def test_analysis_mode_needs_and_uses_the_secret():
    cfg = make_cfg("auth", k=4, n=30, attack=AttackSpec("mitm", secret_known=True))
    with pytest.raises(ConfigError):
        MitmChannel(Variant.V3_AUTHENTICATED, PhaseSet(4), 0, True)
    rep, ch = session(cfg)
    assert rep.eve["analysis_mode"] is True
    assert rep.eve["eve_accuracy"] == 1.0


def test_eve_is_reproducible_and_seed_sensitive():
    cfg = make_cfg("classical", n=300, attack=intercept([2], "continuous"))
    a, _ = session(cfg)
    b, _ = session(cfg)
    assert a.to_dict(False) == b.to_dict(False)
    other = dataclasses.replace(cfg, attack=dataclasses.replace(cfg.attack, eve_seed=cfg.attack.eve_seed + 1))
    c, _ = session(other)
    assert c.decoded_digest != a.decoded_digest


def test_intercept_disturbs_classical():
    cfg = make_cfg("classical", k=4, n=20_000, attack=intercept([1]))
    rep = run_batch(cfg)
    se = math.sqrt(0.25 * 0.75 / 20_000)
    assert abs(rep.bob_bit_error_rate - 0.25) <= 4 * se
    assert abs(rep.eve["eve_accuracy"] - 0.5) <= 4 * math.sqrt(0.25 / 20_000)


def test_intercept_disturbs_qubits():
    cfg = make_cfg("quantum", k=8, n=5_000, attack=intercept([2], "lattice"), source="random_qubits",
                   complex_qubits=True)
    rep = run_batch(cfg)
    assert rep.mean_output_fidelity < 0.9
    assert rep.eve["eve_accuracy"] is None  # no bit guesses on a qubit alphabet
    assert rep.eve["measurements"] == 5_000


def test_mitm_is_invisible_to_bob_for_v1_and_v2():
    for variant in ("classical", "quantum"):
        rep, ch = session(make_cfg(variant, k=8, n=500, attack=AttackSpec("mitm")))
        assert rep.eve["eve_accuracy"] == 1.0
        if variant == "classical":
            assert rep.bob_bit_errors == 0
        else:
            assert rep.min_output_fidelity >= 1 - 1e-9


def test_mitm_recovers_arbitrary_qubits_in_v2():
    cfg = make_cfg("quantum", k=8, n=300, attack=AttackSpec("mitm"), source="random_qubits", complex_qubits=True)
    rep, ch = session(cfg)
    msg = rep.message
    for pos, e in ch.record.entries.items():
        assert sk.fidelity(e.recovered, msg.qubits[pos - 1]) >= 1 - 1e-9
    assert rep.min_output_fidelity >= 1 - 1e-9


def test_mitm_against_auth_is_blind():
    rep = run_batch(make_cfg("auth", k=8, n=20_000, attack=AttackSpec("mitm")))
    assert abs(rep.eve["eve_accuracy"] - 0.5) <= 4 * math.sqrt(0.25 / 20_000)
    # and her replay does not survive Bob's secret undo
    assert rep.mean_output_fidelity < 0.9


def test_channel_kinds():
    ps = PhaseSet(4)
    assert isinstance(build_channel(AttackSpec(), Variant.V1_CLASSICAL, ps), IdentityChannel)
    assert isinstance(build_channel(intercept([1]), Variant.V1_CLASSICAL, ps), InterceptResendChannel)
    assert isinstance(build_channel(AttackSpec("mitm"), Variant.V1_CLASSICAL, ps), MitmChannel)
    with pytest.raises(ConfigError):
        InterceptResendChannel(AttackSpec("mitm"))


def test_spec_dict_roundtrip():
    for spec in (AttackSpec(), intercept([3, 1], "fixed:0.25"), intercept([2], "lattice"),
                 AttackSpec("mitm", eve_seed=9, secret_known=True)):
        assert AttackSpec.from_dict(spec.to_dict()) == spec


def test_ml_guess_tie_break():
    assert ml_guess([0.5, 0.5], (0.5, 0.5), 1) == 1
    assert ml_guess([0.5, 0.5], (0.5, 0.5), 0) == 0
    assert ml_guess([0.7, 0.3], (0.5, 0.5), 1) == 0
    assert ml_guess(np.array([0.2, 0.6]), (0.5, 0.5), 0) == 1
