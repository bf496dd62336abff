"""The K-element angle lattice ``{k*pi/K}``, seeded sampling, and pre-shared angles.

Randomness comes from named streams: ``stream(seed, "alice")`` is a numpy
``Generator`` over PCG64, seeded with ``SeedSequence(seed, spawn_key=(id,))``
where ``id`` is the stream's fixed number in :data:`STREAM_IDS`.  Equal seeds
for different parties therefore still give independent streams.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qtp.errors import DegeneratePhaseSetError, EmptyMessageError, PhaseRangeError

STREAM_IDS = {
    "alice": 1,
    "bob": 2,
    "eve": 3,
    "eve.measure": 4,
    "message": 5,
    "secret": 6,
    "channel": 7,
}

PhaseIndex = int


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent, reproducible generator for one named party stream."""
    try:
        key = STREAM_IDS[name]
    except KeyError:
        raise ValueError(f"unknown stream {name!r}; expected one of {sorted(STREAM_IDS)}") from None
    if seed < 0:
        raise ValueError("seeds must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(key,))))


@dataclass(frozen=True)
class PhaseSet:
    k_count: int

    def __post_init__(self) -> None:
        if isinstance(self.k_count, bool) or int(self.k_count) != self.k_count:
            raise TypeError("k_count must be an integer")
        if self.k_count < 2:
            raise DegeneratePhaseSetError(
                f"K must be at least 2 (got {self.k_count}); with K=1 every rotation is 0 "
                "and the channel carries the message in the clear"
            )

    def __len__(self) -> int:
        return self.k_count

    def angles(self) -> np.ndarray:
        return np.arange(self.k_count) * math.pi / self.k_count


def angle_of(phase_set: PhaseSet, k: PhaseIndex) -> float:
    """``k*pi/K`` for a valid index ``k``."""
    k = int(k)
    if not 0 <= k < phase_set.k_count:
        raise PhaseRangeError(f"index {k} outside [0, {phase_set.k_count - 1}]")
    return k * math.pi / phase_set.k_count


def angles_of(phase_set: PhaseSet, indices) -> np.ndarray:
    """Vectorized :func:`angle_of`; same arithmetic, element by element."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= phase_set.k_count):
        raise PhaseRangeError(f"indices outside [0, {phase_set.k_count - 1}]")
    return idx * math.pi / phase_set.k_count


def sample(phase_set: PhaseSet, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` uniform indices by rejection over the smallest power-of-two range.

    Each candidate consumes one raw 64-bit word and the draw never reads past
    the n-th accepted word, so ``sample(.., n)`` followed by ``sample(.., m)``
    yields the same indices as one ``sample(.., n + m)``.
    """
    if n < 1:
        raise EmptyMessageError("cannot sample an empty index sequence")
    k = phase_set.k_count
    mask = np.uint64((1 << (k - 1).bit_length()) - 1)
    out = np.empty(n, dtype=np.int64)
    filled = 0
    while filled < n:
        raw = rng.bit_generator.random_raw(n - filled) & mask
        keep = raw[raw < k]
        out[filled:filled + keep.size] = keep
        filled += keep.size
    return out


@dataclass(frozen=True)
class SecretAngles:
    """Pre-shared authentication angles, held identically by Alice and Bob."""

    k_count: int
    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        ps = PhaseSet(self.k_count)
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        for i in self.indices:
            if not 0 <= i < ps.k_count:
                raise PhaseRangeError(f"secret index {i} outside [0, {ps.k_count - 1}]")

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def phase_set(self) -> PhaseSet:
        return PhaseSet(self.k_count)

    def angle(self, pos: int) -> float:
        """Angle for 0-based position ``pos``."""
        return angle_of(self.phase_set, self.indices[pos])

    def to_json(self) -> str:
        return json.dumps({"k": self.k_count, "indices": list(self.indices)})

    @classmethod
    def from_json(cls, text: str) -> SecretAngles:
        try:
            data = json.loads(text)
            return cls(int(data["k"]), tuple(data["indices"]))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ValueError(f'secret file must hold {{"k": K, "indices": [...]}}: {exc}') from None

    def save(self, path: str | os.PathLike) -> None:
        """Write the secret file with owner-only permissions (0600)."""
        path = Path(path)
        fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "w") as fh:
            fh.write(self.to_json() + "\n")
        os.chmod(path, 0o600)

    @classmethod
    def load(cls, path: str | os.PathLike) -> SecretAngles:
        return cls.from_json(Path(path).read_text())


def derive_secret(phase_set: PhaseSet, rng: np.random.Generator, n: int) -> SecretAngles:
    return SecretAngles(phase_set.k_count, tuple(int(i) for i in sample(phase_set, rng, n)))
