"""Session configuration: variant, lattice size, message source, seeds, attack, secret."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qtp import statekit
from qtp.adversary import AttackSpec
from qtp.errors import ConfigError
from qtp.phases import SecretAngles, stream
from qtp.protocol import Message, Variant

BIT_SOURCES = ("random_bits", "bit_file")
QUBIT_SOURCES = ("random_qubits", "qubit_angle_file")
MESSAGE_SOURCES = BIT_SOURCES + QUBIT_SOURCES


@dataclass(frozen=True)
class Seeds:
    alice: int = 0
    bob: int = 0
    eve: int = 0
    message: int = 0

    @classmethod
    def all(cls, seed: int) -> Seeds:
        return cls(seed, seed, seed, seed)

    def to_dict(self) -> dict:
        return {"alice": self.alice, "bob": self.bob, "eve": self.eve, "message": self.message}


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read message file {path}: {exc.strerror or exc}") from None


def read_bit_file(path: str | Path) -> tuple[int, ...]:
    """Bits as '0'/'1' characters; whitespace and '#' comment lines are ignored."""
    bits = []
    for line in _read_text(path).splitlines():
        line = line.split("#", 1)[0]
        for ch in line:
            if ch in "01":
                bits.append(int(ch))
            elif not ch.isspace():
                raise ConfigError(f"{path}: bit files may only contain 0 and 1, found {ch!r}")
    return tuple(bits)


def read_angle_file(path: str | Path) -> tuple[float, ...]:
    """One angle in radians per line; blank lines and '#' comments are ignored."""
    angles = []
    for lineno, line in enumerate(_read_text(path).splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            a = float(line)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: not a number: {line!r}") from None
        if not math.isfinite(a):
            raise ConfigError(f"{path}:{lineno}: angle must be finite")
        angles.append(a)
    return tuple(angles)


@dataclass(frozen=True)
class SessionConfig:
    variant: Variant
    k: int
    n: int
    message_source: str = "random_bits"
    message_file: str | None = None
    complex_qubits: bool = False
    seeds: Seeds = field(default_factory=Seeds)
    attack: AttackSpec = field(default_factory=AttackSpec)
    secret: SecretAngles | None = None
    secret_path: str | None = None

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "variant", Variant.parse(self.variant))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if isinstance(self.k, bool) or not isinstance(self.k, (int, np.integer)) or self.k < 2:
            raise ConfigError(f"k must be an integer >= 2, got {self.k!r}")
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ConfigError(f"n must be an integer >= 1, got {self.n!r}")
        if self.message_source not in MESSAGE_SOURCES:
            raise ConfigError(f"unknown message source {self.message_source!r}; expected one of {MESSAGE_SOURCES}")
        if self.variant is Variant.V1_CLASSICAL and self.message_source in QUBIT_SOURCES:
            raise ConfigError(f"message source {self.message_source!r} needs a quantum variant (quantum or auth)")
        if self.complex_qubits and self.message_source != "random_qubits":
            raise ConfigError("complex qubits apply only to the random_qubits source")
        if self.message_source in ("bit_file", "qubit_angle_file"):
            if not self.message_file:
                raise ConfigError(f"message source {self.message_source!r} needs a message file")
            if not Path(self.message_file).is_file():
                raise ConfigError(f"message file not found: {self.message_file}")
            count = len(self._read_file())
            if count != self.n:
                raise ConfigError(f"message file holds {count} symbols but n = {self.n}")
        elif self.message_file:
            raise ConfigError(f"message source {self.message_source!r} does not read a file")
        if self.variant is Variant.V3_AUTHENTICATED and self.secret is None:
            raise ConfigError("the auth variant needs a pre-shared secret (--secret)")
        if self.variant is not Variant.V3_AUTHENTICATED and self.secret is not None:
            raise ConfigError("a secret is only used by the auth variant")
        if self.secret is not None:
            if self.secret.k_count != self.k:
                raise ConfigError(f"secret was generated for K={self.secret.k_count}, session uses K={self.k}")
            if len(self.secret) != self.n:
                raise ConfigError(f"secret holds {len(self.secret)} angles but n = {self.n}")
        if self.attack.secret_known and self.variant is not Variant.V3_AUTHENTICATED:
            raise ConfigError("secret_known analysis mode only makes sense against the auth variant")

    def _read_file(self):
        if self.message_source == "bit_file":
            return read_bit_file(self.message_file)
        return read_angle_file(self.message_file)

    @property
    def alphabet(self) -> str:
        return "bits" if self.message_source in BIT_SOURCES else "qubits"

    def build_message(self) -> Message:
        """Materialize the message; random sources draw from the ``message`` stream."""
        src = self.message_source
        if src == "random_bits":
            rng = stream(self.seeds.message, "message")
            bits = tuple(int(b) for b in rng.integers(0, 2, size=self.n))
        elif src == "bit_file":
            bits = read_bit_file(self.message_file)
        elif src == "random_qubits":
            rng = stream(self.seeds.message, "message")
            if self.complex_qubits:
                z = rng.standard_normal((self.n, 4))
                return Message.from_qubits(
                    statekit.PureState.normalized(complex(r[0], r[1]), complex(r[2], r[3])) for r in z
                )
            return Message.from_qubits(statekit.state_from_angle(a) for a in rng.random(self.n) * math.pi)
        else:
            return Message.from_qubits(statekit.state_from_angle(a) for a in read_angle_file(self.message_file))
        if self.variant is Variant.V1_CLASSICAL:
            return Message.from_bits(bits)
        return Message.bit_encoded(bits)

    def to_dict(self) -> dict:
        secret = None
        if self.secret is not None:
            secret = {
                "path": self.secret_path,
                "sha256": hashlib.sha256(self.secret.to_json().encode()).hexdigest(),
            }
        return {
            "variant": self.variant.value,
            "k": int(self.k),
            "n": int(self.n),
            "message": {
                "source": self.message_source,
                "file": self.message_file,
                "complex": self.complex_qubits,
            },
            "seeds": self.seeds.to_dict(),
            "attack": self.attack.to_dict(),
            "secret": secret,
        }

    def session_id(self) -> bytes:
        """16-byte id derived from the honest parties' shared config (attack excluded)."""
        d = self.to_dict()
        del d["attack"]
        canon = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(canon).digest()[:16]

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path | None = None) -> SessionConfig:
        """Inverse of :meth:`to_dict`; a ``secret.path`` is loaded from disk."""
        msg = d.get("message", {})
        secret = None
        secret_path = None
        sec = d.get("secret")
        if sec:
            secret_path = sec["path"] if isinstance(sec, dict) else str(sec)
            p = Path(secret_path)
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            try:
                secret = SecretAngles.load(p)
            except FileNotFoundError:
                raise ConfigError(f"secret file not found: {p}") from None
            except ValueError as exc:
                raise ConfigError(f"unreadable secret file {p}: {exc}") from None
        try:
            return cls(
                variant=Variant.parse(d["variant"]),
                k=int(d["k"]),
                n=int(d["n"]),
                message_source=msg.get("source", "random_bits"),
                message_file=msg.get("file"),
                complex_qubits=bool(msg.get("complex", False)),
                seeds=Seeds(**d.get("seeds", {})),
                attack=AttackSpec.from_dict(d.get("attack", {})),
                secret=secret,
                secret_path=secret_path,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed session config: {exc}") from exc
