"""Run reports: JSON summary (schema 1) plus per-position detail for CSV export."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import struct
from dataclasses import dataclass, field, fields
from typing import TYPE_CHECKING

import numpy as np

from qtp import statekit
from qtp.protocol import Message, Variant
from qtp.statekit import PureState

if TYPE_CHECKING:
    from qtp.adversary import EveRecord
    from qtp.config import SessionConfig

SCHEMA = 1
STREAM_DOC = "numpy PCG64 via SeedSequence(seed, spawn_key=(stream_id,))"

CSV_COLUMNS = ("position", "sent", "decoded", "bob_fidelity", "eve_guess", "eve_correct")


def digest_bits(bits) -> str:
    return hashlib.sha256(bytes(int(b) for b in bits)).hexdigest()


def digest_states(states) -> str:
    h = hashlib.sha256()
    for s in states:
        # + 0.0 folds -0.0 into 0.0 so the digest only sees values, not zero signs
        parts = (s.amp_h.real, s.amp_h.imag, s.amp_v.real, s.amp_v.imag)
        h.update(struct.pack(">dddd", *(x + 0.0 for x in parts)))
    return h.hexdigest()


def message_digest(msg: Message, variant: Variant) -> str:
    if variant is Variant.V1_CLASSICAL or msg.qubits is None:
        return digest_bits(msg.bits)
    return digest_states(msg.qubits)


@dataclass
class RunReport:
    config: dict
    sent_digest: str
    decoded_digest: str | None = None
    bob_bit_errors: int | None = None
    bob_bit_error_rate: float | None = None
    bob_bit_error_stderr: float | None = None
    mean_output_fidelity: float | None = None
    min_output_fidelity: float | None = None
    fidelity_stderr: float | None = None
    eve: dict | None = None
    counters: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    wall_clock_s: float | None = None
    # per-position detail, kept out of the JSON summary
    decoded: list | None = field(default=None, repr=False, compare=False)
    fidelities: np.ndarray | None = field(default=None, repr=False, compare=False)
    eve_guesses: list | None = field(default=None, repr=False, compare=False)
    message: Message | None = field(default=None, repr=False, compare=False)

    def to_dict(self, timestamps: bool = True) -> dict:
        d = {"schema": SCHEMA}
        for f in fields(self):
            if not f.compare:
                continue
            if f.name == "wall_clock_s" and not timestamps:
                continue
            d[f.name] = getattr(self, f.name)
        return d

    def to_json(self, timestamps: bool = True) -> str:
        return json.dumps(self.to_dict(timestamps), indent=2, sort_keys=True)

    def write_csv(self, fh) -> None:
        """Columns: position (1-based), sent (bit or 'h_re,h_im,v_re,v_im'),
        decoded (same encoding, empty if unknown), bob_fidelity (quantum
        variants), eve_guess (bit, empty if none), eve_correct (0/1)."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        msg = self.message
        for idx in range(len(msg)):
            sent = _cell(msg.bits[idx] if msg.bits is not None else msg.qubits[idx])
            dec = _cell(self.decoded[idx]) if self.decoded is not None else ""
            fid = repr(float(self.fidelities[idx])) if self.fidelities is not None else ""
            guess = ""
            correct = ""
            if self.eve_guesses is not None and self.eve_guesses[idx] is not None:
                guess = str(self.eve_guesses[idx])
                if msg.bits is not None:
                    correct = str(int(self.eve_guesses[idx] == msg.bits[idx]))
            w.writerow((idx + 1, sent, dec, fid, guess, correct))

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _cell(x) -> str:
    if isinstance(x, PureState):
        return ",".join(repr(v) for v in (x.amp_h.real, x.amp_h.imag, x.amp_v.real, x.amp_v.imag))
    return str(int(x))


def provenance(cfg: SessionConfig) -> dict:
    from qtp import __version__

    return {"seeds": cfg.seeds.to_dict(), "eve_seed": cfg.attack.eve_seed, "streams": STREAM_DOC, "version": __version__}


def build_report(
    cfg: SessionConfig,
    msg: Message,
    decoded: list,
    record: EveRecord | None = None,
    eve_summary: dict | None = None,
) -> RunReport:
    """Summarize Bob's decoded output against the sent message."""
    n = len(msg)
    rep = RunReport(
        config=cfg.to_dict(),
        sent_digest=message_digest(msg, cfg.variant),
        counters={"positions": n, "bob_photons_received": 2 * n, "bob_photons_sent": n},
        provenance=provenance(cfg),
        decoded=list(decoded),
        message=msg,
    )
    if cfg.variant is Variant.V1_CLASSICAL:
        bits = [int(b) for b in decoded]
        errors = sum(1 for a, b in zip(msg.bits, bits) if a != b)
        p = errors / n
        rep.decoded_digest = digest_bits(bits)
        rep.bob_bit_errors = errors
        rep.bob_bit_error_rate = p
        rep.bob_bit_error_stderr = math.sqrt(p * (1.0 - p) / n)
    else:
        fids = np.array([statekit.fidelity(s, msg.qubits[i]) for i, s in enumerate(decoded)])
        rep.decoded_digest = digest_states(decoded)
        _fidelity_stats(rep, fids)
    if record is not None:
        rep.eve = record.summary(msg)
        rep.eve_guesses = bit_guesses(record, n)
    elif eve_summary is not None:
        rep.eve = eve_summary
    return rep


def bit_guesses(record: EveRecord, n: int) -> list | None:
    """Per-position bit guesses (None where Eve made none); None if she made none at all."""
    out = [None] * n
    for pos, e in record.entries.items():
        if isinstance(e.guess, int):
            out[pos - 1] = e.guess
    return out if any(g is not None for g in out) else None


def _fidelity_stats(rep: RunReport, fids: np.ndarray) -> None:
    from qtp.adversary import mean_and_stderr

    stats = mean_and_stderr(fids.tolist(), "mean", "stderr")
    rep.fidelities = fids
    rep.mean_output_fidelity = stats["mean"]
    rep.min_output_fidelity = float(fids.min())
    rep.fidelity_stderr = stats["stderr"]
