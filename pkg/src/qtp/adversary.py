"""Eavesdropper models implementing the :class:`~qtp.protocol.Channel` contract.

Eve touches photons only through :func:`qtp.statekit.measure` and
:func:`qtp.statekit.rotate` (directly or via the honest party functions she
impersonates).  Every datum in her :class:`EveRecord` carries a provenance
tag naming where it came from; the tests audit those tags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


from qtp import statekit
from qtp.errors import ConfigError, ProtocolOrderError
from qtp.inference import ml_guess, wire_likelihoods
from qtp.phases import PhaseSet, SecretAngles, angle_of, sample, stream
from qtp.protocol import (
    Channel,
    Direction,
    PhotonMessage,
    SessionInfo,
    Variant,
    alice_pass2,
    alice_send,
    bob_finish,
    bob_pass1,
    new_party,
)
from qtp.statekit import PureState

KINDS = ("none", "intercept_resend", "mitm")
PROVENANCE_TAGS = frozenset(
    {"fixed", "eve_rng", "statekit.measure", "statekit.rotate", "rule:ml"}
)


@dataclass(frozen=True)
class BasisStrategy:
    kind: str = "fixed"
    angle: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("fixed", "lattice", "continuous"):
            raise ConfigError(f"unknown basis strategy {self.kind!r}")
        if not math.isfinite(self.angle):
            raise ConfigError("fixed basis angle must be finite")

    @classmethod
    def parse(cls, text: str) -> BasisStrategy:
        """``fixed:<radians>``, ``fixed`` (= 0), ``lattice`` or ``continuous``."""
        head, _, tail = text.partition(":")
        if head == "fixed":
            try:
                return cls("fixed", float(tail) if tail else 0.0)
            except ValueError:
                raise ConfigError(f"bad fixed basis angle {tail!r}") from None
        if tail:
            raise ConfigError(f"basis strategy {head!r} takes no argument")
        return cls(head)

    def __str__(self) -> str:
        return f"fixed:{self.angle!r}" if self.kind == "fixed" else self.kind


@dataclass(frozen=True)
class AttackSpec:
    kind: str = "none"
    passes: frozenset[int] = frozenset()
    basis: BasisStrategy = BasisStrategy()
    eve_seed: int = 0
    secret_known: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown attack kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "passes", frozenset(int(p) for p in self.passes))
        if not self.passes <= {1, 2, 3}:
            raise ConfigError(f"intercepted passes must be within {{1, 2, 3}}, got {sorted(self.passes)}")
        if self.kind == "intercept_resend" and not self.passes:
            raise ConfigError("intercept_resend needs at least one pass to intercept")
        if self.secret_known and self.kind != "mitm":
            raise ConfigError("secret_known analysis mode applies only to mitm")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "eve_seed": self.eve_seed}
        if self.kind == "intercept_resend":
            d["passes"] = sorted(self.passes)
            d["basis"] = str(self.basis)
        if self.kind == "mitm":
            d["secret_known"] = self.secret_known
        return d

    @classmethod
    def from_dict(cls, d: dict) -> AttackSpec:
        return cls(
            kind=d.get("kind", "none"),
            passes=frozenset(d.get("passes", ())),
            basis=BasisStrategy.parse(d.get("basis", "fixed:0.0")),
            eve_seed=int(d.get("eve_seed", 0)),
            secret_known=bool(d.get("secret_known", False)),
        )


@dataclass
class EveEntry:
    position: int
    passes: list[int] = field(default_factory=list)
    bases: list[float] = field(default_factory=list)
    outcomes: list[int] = field(default_factory=list)
    recovered: PureState | None = None
    guess: int | PureState | None = None
    guess_correct: bool | None = None
    provenance: dict[str, str] = field(default_factory=dict)


@dataclass
class EveRecord:
    kind: str
    variant: Variant | None = None
    k: int | None = None
    entries: dict[int, EveEntry] = field(default_factory=dict)
    analysis_mode: bool = False
    spec: AttackSpec | None = None

    def entry(self, position: int) -> EveEntry:
        e = self.entries.get(position)
        if e is None:
            e = self.entries[position] = EveEntry(position)
        return e

    def to_dict(self) -> dict:
        """What Eve herself knows: her guesses and measurement counts, no truth."""
        entries = [e for _, e in sorted(self.entries.items())]
        return {
            "kind": self.kind,
            "analysis_mode": self.analysis_mode,
            "attack": self.spec.to_dict() if self.spec is not None else None,
            "variant": self.variant.value if self.variant is not None else None,
            "k": self.k,
            "positions_touched": len(entries),
            "measurements": sum(len(e.outcomes) for e in entries),
            "bit_guesses": [e.guess if isinstance(e.guess, int) else None for e in entries],
        }

    def score(self, message) -> None:
        """Mark each bit guess right or wrong against the true message."""
        if message.bits is None:
            return
        for pos, e in self.entries.items():
            if isinstance(e.guess, int):
                e.guess_correct = e.guess == message.bits[pos - 1]

    def summary(self, message) -> dict:
        self.score(message)
        entries = [e for _, e in sorted(self.entries.items())]
        correct = [e.guess_correct for e in entries if e.guess_correct is not None]
        out: dict = {
            "kind": self.kind,
            "analysis_mode": self.analysis_mode,
            "positions_touched": len(entries),
            "measurements": sum(len(e.outcomes) for e in entries),
            "guesses": len(correct),
            "eve_accuracy": None,
            "eve_accuracy_stderr": None,
            "eve_mean_fidelity": None,
            "eve_fidelity_stderr": None,
        }
        if self.spec is not None:
            out["attack"] = self.spec.to_dict()
        if correct:
            p = math.fsum(1.0 for c in correct if c) / len(correct)
            out["eve_accuracy"] = p
            out["eve_accuracy_stderr"] = math.sqrt(p * (1.0 - p) / len(correct))
        recovered = [
            (e.position, e.recovered) for e in entries if e.recovered is not None
        ]
        if recovered:
            fids = [
                statekit.fidelity(s, message.input_state(pos - 1)) for pos, s in recovered
            ]
            out.update(mean_and_stderr(fids, "eve_mean_fidelity", "eve_fidelity_stderr"))
        return out


def mean_and_stderr(values, mean_key: str, err_key: str) -> dict:
    values = list(values)
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((x - mean) ** 2 for x in values) / (n - 1) if n > 1 else 0.0
    return {mean_key: mean, err_key: math.sqrt(var / n)}


class IdentityChannel(Channel):
    """Honest channel: every photon arrives unchanged."""

    def deliver(self, photon: PhotonMessage, direction: Direction) -> PhotonMessage:
        return photon


def identity_channel() -> IdentityChannel:
    return IdentityChannel()


class InterceptResendChannel(Channel):
    """Eve measures photons on the configured passes and forwards the collapsed state.

    Bases come from the ``eve`` stream, measurement variates from the
    ``eve.measure`` stream, both seeded with ``spec.eve_seed``.  With a bit
    alphabet she also guesses each bit from her outcomes (see
    :mod:`qtp.inference`).
    """

    def __init__(self, spec: AttackSpec, alphabet: str = "bits"):
        if spec.kind != "intercept_resend":
            raise ConfigError(f"expected an intercept_resend spec, got {spec.kind!r}")
        self.spec = spec
        self.alphabet = alphabet
        self.basis_rng = stream(spec.eve_seed, "eve")
        self.measure_rng = stream(spec.eve_seed, "eve.measure")
        self.record = EveRecord("intercept_resend", spec=spec)
        self.phase_set: PhaseSet | None = None
        self._last_pass = max(spec.passes)
        self._likelihood_cache: dict = {}

    def open(self, info: SessionInfo) -> None:
        self.phase_set = info.phase_set
        self.variant = info.variant
        self.record.variant = info.variant
        self.record.k = info.phase_set.k_count

    def _draw_basis(self) -> tuple[float, str]:
        strat = self.spec.basis
        if strat.kind == "fixed":
            return strat.angle, "fixed"
        if strat.kind == "lattice":
            idx = sample(self.phase_set, self.basis_rng, 1)[0]
            return angle_of(self.phase_set, idx), "eve_rng"
        return float(self.basis_rng.random()) * math.pi, "eve_rng"

    def deliver(self, photon: PhotonMessage, direction: Direction) -> PhotonMessage:
        if photon.pass_no not in self.spec.passes:
            return photon
        if self.phase_set is None:
            raise ProtocolOrderError("channel used before open()")
        basis, basis_tag = self._draw_basis()
        u = float(self.measure_rng.random())
        outcome, collapsed = statekit.measure(photon.state, basis, u)
        e = self.record.entry(photon.position)
        e.passes.append(photon.pass_no)
        e.bases.append(basis)
        e.outcomes.append(outcome)
        e.provenance["bases"] = basis_tag
        e.provenance["outcomes"] = "statekit.measure"
        if photon.pass_no == self._last_pass and self.alphabet == "bits":
            e.guess = self.guess(e.passes, e.bases, e.outcomes)
            e.provenance["guess"] = "rule:ml"
        return replace(photon, state=collapsed)

    def guess(self, passes, bases, outcomes) -> int:
        key = (tuple(passes), tuple(bases), tuple(outcomes))
        lk = self._likelihood_cache.get(key)
        if lk is None:
            lk = wire_likelihoods(
                self.variant, self.phase_set.k_count, passes, bases, outcomes,
                (statekit.H, statekit.V),
            )
            self._likelihood_cache[key] = lk
        return ml_guess(lk, (0.5, 0.5), outcomes[0])


def intercept_resend(spec: AttackSpec, alphabet: str = "bits") -> InterceptResendChannel:
    return InterceptResendChannel(spec, alphabet)


class MitmChannel(Channel):
    """Eve cuts the quantum channel and runs two honest protocol instances.

    Toward Alice she is Bob with her own angles; once she has decoded a
    position she replays it toward Bob as Alice with a second set of angles.
    She cannot undo V3's pre-shared angles unless ``secret_known`` (analysis
    mode), so against V3 her decoded states are rotated by them.

    With a bit alphabet she measures her decoded state in {|H>, |V>} to get a
    bit guess and forwards the collapsed photon; otherwise she forwards the
    decoded state itself.
    """

    def __init__(
        self,
        variant: Variant,
        phase_set: PhaseSet,
        eve_seed: int,
        secret_known: bool = False,
        *,
        alphabet: str = "bits",
        secret: SecretAngles | None = None,
    ):
        if secret_known and variant is Variant.V3_AUTHENTICATED and secret is None:
            raise ConfigError("secret_known analysis mode needs the secret itself")
        self.variant = variant
        self.phase_set = phase_set
        self.secret_known = secret_known
        self.secret = secret if secret_known else None
        self.alphabet = "bits" if variant is Variant.V1_CLASSICAL else alphabet
        self.angle_rng = stream(eve_seed, "eve")
        self.measure_rng = stream(eve_seed, "eve.measure")
        spec = AttackSpec("mitm", eve_seed=eve_seed, secret_known=secret_known)
        self.record = EveRecord("mitm", variant, phase_set.k_count, analysis_mode=secret_known, spec=spec)
        if variant is Variant.V3_AUTHENTICATED and not secret_known:
            self.eve_variant = Variant.V2_QUANTUM
        else:
            self.eve_variant = variant

    def open(self, info: SessionInfo) -> None:
        if info.variant is not self.variant or info.phase_set != self.phase_set:
            raise ConfigError("mitm channel built for a different variant or phase set")
        n = info.n
        self.as_bob = new_party(
            "bob", self.eve_variant, self.phase_set, n, self.angle_rng, self.secret,
            measure_rng=self.measure_rng,
        )
        self.as_alice = new_party("alice", self.eve_variant, self.phase_set, n, self.angle_rng, self.secret)

    def deliver(self, photon: PhotonMessage, direction: Direction) -> PhotonMessage:
        if direction is Direction.A_TO_B and photon.pass_no == 1:
            return bob_pass1(self.as_bob, photon)
        if direction is Direction.A_TO_B and photon.pass_no == 3:
            payload = self._decode(photon)
            return alice_send(self.as_alice, payload, photon.position, photon.session_id)
        if direction is Direction.B_TO_A and photon.pass_no == 2:
            return alice_pass2(self.as_alice, photon)
        raise ProtocolOrderError(f"unexpected pass {photon.pass_no} travelling {direction.value}")

    def _decode(self, photon: PhotonMessage) -> PureState:
        e = self.record.entry(photon.position)
        e.passes.extend((1, 2, 3))
        result = bob_finish(self.as_bob, photon)
        if isinstance(result, int):
            e.bases.append(0.0)
            e.outcomes.append(result)
            e.guess = result
            e.provenance.update(bases="fixed", outcomes="statekit.measure", guess="statekit.measure")
            return statekit.bit_state(result)
        e.recovered = result
        e.provenance["recovered"] = "statekit.rotate"
        if self.alphabet != "bits":
            e.guess = result
            e.provenance["guess"] = "statekit.rotate"
            return result
        bit, collapsed = statekit.measure(result, 0.0, float(self.measure_rng.random()))
        e.bases.append(0.0)
        e.outcomes.append(bit)
        e.guess = bit
        e.provenance.update(bases="fixed", outcomes="statekit.measure", guess="statekit.measure")
        return collapsed


def mitm(
    variant: Variant,
    phase_set: PhaseSet,
    eve_seed: int,
    secret_known: bool = False,
    *,
    alphabet: str = "bits",
    secret: SecretAngles | None = None,
) -> MitmChannel:
    return MitmChannel(variant, phase_set, eve_seed, secret_known, alphabet=alphabet, secret=secret)


def build_channel(
    spec: AttackSpec,
    variant: Variant,
    phase_set: PhaseSet,
    *,
    alphabet: str = "bits",
    secret: SecretAngles | None = None,
) -> Channel:
    """Channel for an attack spec, as used by sessions, batch runs and the proxy."""
    if spec.kind == "none":
        return identity_channel()
    if spec.kind == "intercept_resend":
        return intercept_resend(spec, alphabet)
    return mitm(variant, phase_set, spec.eve_seed, spec.secret_known, alphabet=alphabet, secret=secret)
