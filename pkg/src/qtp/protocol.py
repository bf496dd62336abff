"""Alice and Bob state machines for the three-pass rotation protocols.

Every position travels A->B (pass 1), B->A (pass 2), A->B (pass 3).  Each
party rotates by a fresh lattice angle on the way out and undoes it on the way
back; because rotations commute, Bob ends up with the original state.

Variants:

* ``V1_CLASSICAL``: bits encoded as |H>/|V>, Bob measures in {|H>, |V>}.
* ``V2_QUANTUM``: arbitrary qubits, Bob keeps the final state.
* ``V3_AUTHENTICATED``: as V2, plus pre-shared angles that Alice adds on
  pass 1 and Bob removes at the end.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from qtp import statekit
from qtp.errors import MissingSecretError, ProtocolOrderError, SessionAbort
from qtp.phases import PhaseSet, SecretAngles, angle_of, sample, stream
from qtp.statekit import PureState

if TYPE_CHECKING:
    from qtp.config import SessionConfig
    from qtp.report import RunReport


class Variant(enum.Enum):
    V1_CLASSICAL = "classical"
    V2_QUANTUM = "quantum"
    V3_AUTHENTICATED = "auth"

    @property
    def code(self) -> int:
        return {"classical": 1, "quantum": 2, "auth": 3}[self.value]

    @classmethod
    def from_code(cls, code: int) -> Variant:
        for v in cls:
            if v.code == code:
                return v
        raise ValueError(f"unknown variant code {code}")

    @classmethod
    def parse(cls, text: str | Variant) -> Variant:
        if isinstance(text, cls):
            return text
        aliases = {
            "classical": cls.V1_CLASSICAL, "v1": cls.V1_CLASSICAL,
            "quantum": cls.V2_QUANTUM, "v2": cls.V2_QUANTUM,
            "auth": cls.V3_AUTHENTICATED, "authenticated": cls.V3_AUTHENTICATED,
            "v3": cls.V3_AUTHENTICATED,
        }
        try:
            return aliases[str(text).lower()]
        except KeyError:
            raise ValueError(f"unknown variant {text!r}") from None


class Direction(enum.Enum):
    A_TO_B = "A->B"
    B_TO_A = "B->A"


def destination(pass_no: int) -> Direction:
    """Where a photon with this pass number is headed."""
    if pass_no in (1, 3):
        return Direction.A_TO_B
    if pass_no == 2:
        return Direction.B_TO_A
    raise ProtocolOrderError(f"invalid pass number {pass_no}")


@dataclass(frozen=True, slots=True)
class PhotonMessage:
    session_id: bytes
    position: int
    pass_no: int
    state: PureState


@dataclass(frozen=True)
class Message:
    """Either ``bits`` (V1) or ``qubits`` (V2/V3).

    Bit-encoded qubit messages carry both: ``qubits`` holds |H>/|V> and
    ``bits`` the labels, so an eavesdropper's bit guesses can be scored.
    """

    bits: tuple[int, ...] | None = None
    qubits: tuple[PureState, ...] | None = None

    def __post_init__(self) -> None:
        if self.bits is None and self.qubits is None:
            raise ValueError("a message needs bits or qubits")
        if self.bits is not None:
            object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
            if any(b not in (0, 1) for b in self.bits):
                raise ValueError("bits must be 0 or 1")
        if self.qubits is not None:
            object.__setattr__(self, "qubits", tuple(self.qubits))
        if self.bits is not None and self.qubits is not None and len(self.bits) != len(self.qubits):
            raise ValueError("bits and qubits differ in length")
        if len(self) < 1:
            raise ValueError("a message must contain at least one symbol")

    @classmethod
    def from_bits(cls, bits) -> Message:
        return cls(bits=tuple(bits))

    @classmethod
    def from_qubits(cls, qubits) -> Message:
        return cls(qubits=tuple(qubits))

    @classmethod
    def bit_encoded(cls, bits) -> Message:
        bits = tuple(int(b) for b in bits)
        return cls(bits=bits, qubits=tuple(statekit.bit_state(b) for b in bits))

    def __len__(self) -> int:
        return len(self.bits) if self.bits is not None else len(self.qubits)

    @property
    def is_bit_alphabet(self) -> bool:
        return self.bits is not None

    def input_state(self, pos: int) -> PureState:
        """Input state at 0-based ``pos`` (the bit encoding for bit messages)."""
        if self.qubits is not None:
            return self.qubits[pos]
        return statekit.bit_state(self.bits[pos])


@dataclass
class PartyState:
    role: str
    variant: Variant
    phase_set: PhaseSet
    local_indices: np.ndarray
    secret: SecretAngles | None = None
    rng: np.random.Generator | None = None
    cursor: tuple[int, int] = (1, 1)

    def __post_init__(self) -> None:
        if self.role not in ("alice", "bob"):
            raise ValueError(f"role must be 'alice' or 'bob', got {self.role!r}")
        if self.variant is Variant.V3_AUTHENTICATED:
            if self.secret is None:
                raise MissingSecretError("the authenticated variant needs pre-shared angles")
            if len(self.secret) != len(self.local_indices):
                raise MissingSecretError(
                    f"secret has {len(self.secret)} angles for {len(self.local_indices)} positions"
                )
            if self.secret.k_count != self.phase_set.k_count:
                raise MissingSecretError("secret was drawn from a different phase set")

    @property
    def n(self) -> int:
        return len(self.local_indices)

    def local_angle(self, i: int) -> float:
        return angle_of(self.phase_set, self.local_indices[i - 1])

    def secret_angle(self, i: int) -> float:
        if self.variant is not Variant.V3_AUTHENTICATED:
            return 0.0
        if self.secret is None:
            raise MissingSecretError("the authenticated variant needs pre-shared angles")
        return self.secret.angle(i - 1)

    def _expect(self, i: int, pass_no: int) -> None:
        if self.cursor != (i, pass_no):
            raise ProtocolOrderError(
                f"{self.role} expected position/pass {self.cursor}, got {(i, pass_no)}"
            )
        if not 1 <= i <= self.n:
            raise ProtocolOrderError(f"position {i} outside [1, {self.n}]")


def new_party(
    role: str,
    variant: Variant,
    phase_set: PhaseSet,
    n: int,
    rng: np.random.Generator,
    secret: SecretAngles | None = None,
    measure_rng: np.random.Generator | None = None,
) -> PartyState:
    """Create a party and draw its fresh local angles (step 1 / step 3).

    The same generator is used for measurement variates unless
    ``measure_rng`` is given.
    """
    indices = sample(phase_set, rng, n)
    return PartyState(role, variant, phase_set, indices, secret, measure_rng or rng)


def _alice_first_angle(party: PartyState, i: int) -> float:
    if party.variant is Variant.V3_AUTHENTICATED:
        return party.secret_angle(i) + party.local_angle(i)
    return party.local_angle(i)


def _bob_last_angle(party: PartyState, i: int) -> float:
    if party.variant is Variant.V3_AUTHENTICATED:
        return -(party.local_angle(i) + party.secret_angle(i))
    return -party.local_angle(i)


def alice_prepare(party: PartyState, msg: Message, i: int, session_id: bytes = bytes(16)) -> PhotonMessage:
    """Prepare the pass-1 photon for 1-based position ``i``."""
    if party.variant is Variant.V1_CLASSICAL:
        if msg.bits is None:
            raise ValueError("the classical variant transmits bits")
        base = statekit.bit_state(msg.bits[i - 1])
    else:
        if msg.qubits is None:
            raise ValueError("quantum variants transmit qubits")
        base = msg.qubits[i - 1]
    return alice_send(party, base, i, session_id)


def alice_send(party: PartyState, base: PureState, i: int, session_id: bytes = bytes(16)) -> PhotonMessage:
    """Rotate an already-encoded input state and emit it as pass 1."""
    if party.role != "alice":
        raise ProtocolOrderError("only Alice prepares photons")
    party._expect(i, 1)
    state = statekit.rotate(base, _alice_first_angle(party, i))
    party.cursor = (i, 2)
    return PhotonMessage(session_id, i, 1, state)


def bob_pass1(party: PartyState, photon: PhotonMessage) -> PhotonMessage:
    if party.role != "bob":
        raise ProtocolOrderError("pass-1 photons go to Bob")
    if photon.pass_no != 1:
        raise ProtocolOrderError(f"Bob expected a pass-1 photon, got pass {photon.pass_no}")
    party._expect(photon.position, 1)
    state = statekit.rotate(photon.state, party.local_angle(photon.position))
    party.cursor = (photon.position, 3)
    return replace(photon, pass_no=2, state=state)


def alice_pass2(party: PartyState, photon: PhotonMessage) -> PhotonMessage:
    if party.role != "alice":
        raise ProtocolOrderError("pass-2 photons go to Alice")
    if photon.pass_no != 2:
        raise ProtocolOrderError(f"Alice expected a pass-2 photon, got pass {photon.pass_no}")
    party._expect(photon.position, 2)
    state = statekit.rotate(photon.state, -party.local_angle(photon.position))
    party.cursor = (photon.position + 1, 1)
    return replace(photon, pass_no=3, state=state)


def bob_finish(party: PartyState, photon: PhotonMessage, u: float | None = None) -> int | PureState:
    """Undo Bob's rotation (and the secret in V3); V1 then measures in {|H>, |V>}.

    For V1, ``u`` defaults to the next draw from the party's generator.
    """
    if party.role != "bob":
        raise ProtocolOrderError("pass-3 photons go to Bob")
    if photon.pass_no != 3:
        raise ProtocolOrderError(f"Bob expected a pass-3 photon, got pass {photon.pass_no}")
    party._expect(photon.position, 3)
    state = statekit.rotate(photon.state, _bob_last_angle(party, photon.position))
    party.cursor = (photon.position + 1, 1)
    if party.variant is not Variant.V1_CLASSICAL:
        return state
    if u is None:
        if party.rng is None:
            raise ValueError("Bob needs a generator or an explicit u to measure")
        u = float(party.rng.random())
    bit, _ = statekit.measure(state, 0.0, u)
    return bit


@dataclass(frozen=True)
class SessionInfo:
    variant: Variant
    phase_set: PhaseSet
    n: int
    session_id: bytes = bytes(16)


class Channel:
    """The quantum channel between Alice and Bob.

    ``deliver`` receives a photon leaving one party and returns the photon
    that arrives somewhere; its pass number decides the recipient (1 or 3 go
    to Bob, 2 to Alice).  A man-in-the-middle may therefore answer a pass-1
    photon with a pass-2 photon of its own.
    """

    record = None

    def open(self, info: SessionInfo) -> None:
        pass

    def deliver(self, photon: PhotonMessage, direction: Direction) -> PhotonMessage:
        raise NotImplementedError

    def close(self) -> None:
        pass


MAX_HOPS = 8


def exchange_position(
    alice: PartyState,
    bob: PartyState,
    msg: Message,
    i: int,
    channel: Channel,
    session_id: bytes = bytes(16),
) -> int | PureState:
    """Run one position through the channel until Bob finishes it."""
    photon = alice_prepare(alice, msg, i, session_id)
    direction = Direction.A_TO_B
    for _ in range(MAX_HOPS):
        try:
            arrived = channel.deliver(photon, direction)
        except Exception as exc:
            raise SessionAbort(f"channel failed at position {i}: {exc}", position=i) from exc
        if arrived.position != i or arrived.session_id != session_id:
            raise ProtocolOrderError(
                f"photon for position {arrived.position} arrived while position {i} is in flight"
            )
        if arrived.pass_no == 1:
            photon, direction = bob_pass1(bob, arrived), Direction.B_TO_A
        elif arrived.pass_no == 2:
            photon, direction = alice_pass2(alice, arrived), Direction.A_TO_B
        elif arrived.pass_no == 3:
            return bob_finish(bob, arrived)
        else:
            raise ProtocolOrderError(f"invalid pass number {arrived.pass_no}")
    raise SessionAbort(f"position {i} did not complete within {MAX_HOPS} hops", position=i)


def make_parties(cfg: SessionConfig, n: int) -> tuple[PartyState, PartyState]:
    variant = cfg.variant
    ps = PhaseSet(cfg.k)
    alice = new_party("alice", variant, ps, n, stream(cfg.seeds.alice, "alice"), cfg.secret)
    bob = new_party("bob", variant, ps, n, stream(cfg.seeds.bob, "bob"), cfg.secret)
    return alice, bob


def run_session(cfg: SessionConfig, channel: Channel, message: Message | None = None) -> RunReport:
    """Execute all positions of one session in order and summarize the outcome."""
    from qtp.report import build_report

    msg = message if message is not None else cfg.build_message()
    n = len(msg)
    alice, bob = make_parties(cfg, n)
    sid = cfg.session_id()
    channel.open(SessionInfo(cfg.variant, PhaseSet(cfg.k), n, sid))
    decoded = []
    for i in range(1, n + 1):
        decoded.append(exchange_position(alice, bob, msg, i, channel, sid))
    channel.close()
    record = channel.record
    return build_report(cfg, msg, decoded, record)
