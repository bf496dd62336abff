"""Alice, Bob and Eve as separate network peers speaking the :mod:`qtp.wire` protocol.

Bob listens, Alice connects, and an optional Eve proxy sits between them.
Each peer runs the same party step functions as an in-process session and
draws from the same named streams, so with equal seeds a loopback run decodes
exactly what :func:`qtp.protocol.run_session` decodes.

The classical frames (HELLO, DONE, ABORT) pass through Eve untouched; she only
controls the quantum channel, i.e. PHOTON frames.
"""

from __future__ import annotations

import logging
import socket
import threading
from typing import Callable

from qtp import wire
from qtp.adversary import AttackSpec, EveRecord, build_channel
from qtp.config import SessionConfig
from qtp.errors import ProtocolOrderError, QtpError, SessionAbort
from qtp.phases import PhaseSet, SecretAngles, stream
from qtp.protocol import (
    Direction,
    SessionInfo,
    Variant,
    alice_pass2,
    alice_prepare,
    bob_finish,
    bob_pass1,
    new_party,
)
from qtp.report import RunReport, bit_guesses, build_report, message_digest, provenance

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 10.0

Endpoint = tuple[str, int]


def parse_endpoint(text: str) -> Endpoint:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must look like HOST:PORT, got {text!r}")
    if host.startswith("[") and host.endswith("]"):
        host = host[1:-1]
    return (host or "127.0.0.1", int(port))


def _tune(sock: socket.socket, timeout: float | None) -> None:
    sock.settimeout(timeout)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)


def _hello_for(cfg: SessionConfig) -> wire.Hello:
    return wire.Hello(wire.PROTOCOL_VERSION, cfg.variant.code, cfg.k, cfg.n)


def _abort(sock: socket.socket, reason: int) -> None:
    try:
        wire.send_frame(sock, wire.Abort(reason))
    except OSError:
        pass


def _expect_photon(sock: socket.socket, pass_no: int, session_id: bytes):
    frame = wire.read_frame(sock)
    if isinstance(frame, wire.Abort):
        raise SessionAbort(f"peer aborted (reason 0x{frame.reason:02x})", reason=frame.reason)
    if not isinstance(frame, wire.WirePhoton):
        raise ProtocolOrderError(f"expected a PHOTON frame, got {type(frame).__name__}")
    if frame.pass_no != pass_no:
        raise ProtocolOrderError(f"expected pass {pass_no}, got pass {frame.pass_no}")
    if frame.session_id != session_id:
        raise ProtocolOrderError("photon belongs to a different session")
    return frame.to_message()


def _run_bob(cfg: SessionConfig, sock: socket.socket) -> RunReport:
    hello = wire.read_frame(sock)
    if isinstance(hello, wire.Abort):
        raise SessionAbort(f"peer aborted (reason 0x{hello.reason:02x})", reason=hello.reason)
    if not isinstance(hello, wire.Hello):
        _abort(sock, wire.ABORT_PROTOCOL_ERROR)
        raise SessionAbort("first frame was not HELLO", reason=wire.ABORT_PROTOCOL_ERROR)
    if hello.version != wire.PROTOCOL_VERSION:
        _abort(sock, wire.ABORT_VERSION_MISMATCH)
        raise SessionAbort(f"protocol version {hello.version} unsupported", reason=wire.ABORT_VERSION_MISMATCH)
    if hello != _hello_for(cfg):
        _abort(sock, wire.ABORT_PARAMETER_MISMATCH)
        raise SessionAbort(
            f"HELLO parameters {hello} do not match local config", reason=wire.ABORT_PARAMETER_MISMATCH
        )
    wire.send_frame(sock, hello)
    msg = cfg.build_message()
    bob = new_party("bob", cfg.variant, PhaseSet(cfg.k), cfg.n, stream(cfg.seeds.bob, "bob"), cfg.secret)
    sid = cfg.session_id()
    decoded = []
    for i in range(1, cfg.n + 1):
        try:
            p1 = _expect_photon(sock, 1, sid)
            wire.send_frame(sock, wire.WirePhoton.from_message(bob_pass1(bob, p1)))
            p3 = _expect_photon(sock, 3, sid)
            decoded.append(bob_finish(bob, p3))
        except (ProtocolOrderError, wire.FramingError) as exc:
            _abort(sock, wire.ABORT_PROTOCOL_ERROR)
            raise SessionAbort(f"position {i}: {exc}", position=i, reason=wire.ABORT_PROTOCOL_ERROR) from exc
        except SessionAbort as exc:
            exc.position = i
            raise
    if not isinstance(wire.read_frame(sock), wire.Done):
        _abort(sock, wire.ABORT_PROTOCOL_ERROR)
        raise SessionAbort("expected DONE", position=cfg.n, reason=wire.ABORT_PROTOCOL_ERROR)
    wire.send_frame(sock, wire.Done())
    return build_report(cfg, msg, decoded)


def _run_alice(cfg: SessionConfig, sock: socket.socket) -> RunReport:
    wire.send_frame(sock, _hello_for(cfg))
    reply = wire.read_frame(sock)
    if isinstance(reply, wire.Abort):
        raise SessionAbort(f"peer aborted (reason 0x{reply.reason:02x})", reason=reply.reason)
    if reply != _hello_for(cfg):
        _abort(sock, wire.ABORT_PARAMETER_MISMATCH)
        raise SessionAbort("HELLO acknowledgement does not match", reason=wire.ABORT_PARAMETER_MISMATCH)
    msg = cfg.build_message()
    alice = new_party("alice", cfg.variant, PhaseSet(cfg.k), cfg.n, stream(cfg.seeds.alice, "alice"), cfg.secret)
    sid = cfg.session_id()
    for i in range(1, cfg.n + 1):
        try:
            wire.send_frame(sock, wire.WirePhoton.from_message(alice_prepare(alice, msg, i, sid)))
            p2 = _expect_photon(sock, 2, sid)
            wire.send_frame(sock, wire.WirePhoton.from_message(alice_pass2(alice, p2)))
        except (ProtocolOrderError, wire.FramingError) as exc:
            _abort(sock, wire.ABORT_PROTOCOL_ERROR)
            raise SessionAbort(f"position {i}: {exc}", position=i, reason=wire.ABORT_PROTOCOL_ERROR) from exc
        except SessionAbort as exc:
            exc.position = i
            raise
    wire.send_frame(sock, wire.Done())
    if not isinstance(wire.read_frame(sock), wire.Done):
        raise SessionAbort("expected DONE", position=cfg.n, reason=wire.ABORT_PROTOCOL_ERROR)
    return RunReport(
        config=cfg.to_dict(),
        sent_digest=message_digest(msg, cfg.variant),
        counters={"positions": cfg.n, "alice_photons_sent": 2 * cfg.n, "alice_photons_received": cfg.n},
        provenance=provenance(cfg),
        message=msg,
    )


def run_peer(
    role: str,
    cfg: SessionConfig,
    endpoint: Endpoint,
    *,
    timeout: float = DEFAULT_TIMEOUT,
    accept_timeout: float | None = None,
    on_listen: Callable[[Endpoint], None] | None = None,
) -> RunReport:
    """Run one session as ``alice`` (connects) or ``bob`` (listens).

    Bob reports the decoded message; Alice reports what she sent.  A
    ``timeout`` applies to every frame read; expiry aborts the session.
    """
    if role not in ("alice", "bob"):
        raise ValueError(f"role must be 'alice' or 'bob', got {role!r}")
    try:
        if role == "bob":
            with socket.create_server(endpoint) as srv:
                srv.settimeout(accept_timeout)
                if on_listen is not None:
                    on_listen(srv.getsockname()[:2])
                conn, _ = srv.accept()
            with conn:
                _tune(conn, timeout)
                return _run_bob(cfg, conn)
        with socket.create_connection(endpoint, timeout=timeout) as conn:
            _tune(conn, timeout)
            return _run_alice(cfg, conn)
    except socket.timeout as exc:
        raise SessionAbort(f"{role}: timed out waiting for a frame", reason=wire.ABORT_TIMEOUT) from exc
    except wire.FramingError as exc:
        raise SessionAbort(f"{role}: {exc}", reason=wire.ABORT_PROTOCOL_ERROR) from exc
    except OSError as exc:
        raise SessionAbort(f"{role}: connection failed: {exc}") from exc


class EveProxy:
    """Transparent relay between Alice and Bob that applies an attack to PHOTON frames.

    Frames are processed in lock-step: after a photon is forwarded, the next
    frame is read from whichever party must answer it.  With ``kind="none"``
    every frame is relayed byte for byte.
    """

    def __init__(
        self,
        spec: AttackSpec,
        listen: Endpoint,
        upstream: Endpoint,
        *,
        alphabet: str = "bits",
        secret: SecretAngles | None = None,
        timeout: float = DEFAULT_TIMEOUT,
        transcript: list | None = None,
    ):
        self.spec = spec
        self.upstream = upstream
        self.alphabet = alphabet
        self.secret = secret
        self.timeout = timeout
        self.transcript = transcript
        self.server = socket.create_server(listen)

    @property
    def address(self) -> Endpoint:
        return self.server.getsockname()[:2]

    def close(self) -> None:
        self.server.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def serve_one(self) -> EveRecord:
        conn_a, _ = self.server.accept()
        with conn_a:
            _tune(conn_a, self.timeout)
            try:
                conn_b = socket.create_connection(self.upstream, timeout=self.timeout)
            except OSError as exc:
                raise SessionAbort(f"upstream {self.upstream} unreachable: {exc}") from exc
            with conn_b:
                _tune(conn_b, self.timeout)
                return self._relay(conn_a, conn_b)

    def serve(self, count: int) -> list[EveRecord]:
        """Serve ``count`` connections concurrently, each with its own adversary state."""
        results: list = [None] * count
        threads = []

        def work(slot, conn_a):
            with conn_a:
                _tune(conn_a, self.timeout)
                try:
                    with socket.create_connection(self.upstream, timeout=self.timeout) as conn_b:
                        _tune(conn_b, self.timeout)
                        results[slot] = self._relay(conn_a, conn_b)
                except (OSError, QtpError, wire.FramingError) as exc:
                    log.warning("proxy connection %d failed: %s", slot, exc)
                    results[slot] = exc

        for slot in range(count):
            conn_a, _ = self.server.accept()
            t = threading.Thread(target=work, args=(slot, conn_a), daemon=True)
            t.start()
            threads.append(t)
        for t in threads:
            t.join()
        return results

    def _log(self, direction: str, raw_in: bytes, raw_out: bytes) -> None:
        if self.transcript is not None:
            self.transcript.append((direction, raw_in, raw_out))

    def _relay(self, alice: socket.socket, bob: socket.socket) -> EveRecord:
        channel = None
        record = EveRecord(self.spec.kind, spec=self.spec)
        sender = alice
        while True:
            raw = wire.read_raw_frame(sender)
            frame = wire.decode_frame(raw)
            from_alice = sender is alice
            other = bob if from_alice else alice
            tag = "A->B" if from_alice else "B->A"
            if isinstance(frame, wire.Hello):
                if from_alice:
                    variant = Variant.from_code(frame.variant)
                    ps = PhaseSet(frame.k)
                    channel = build_channel(self.spec, variant, ps, alphabet=self.alphabet, secret=self.secret)
                    channel.open(SessionInfo(variant, ps, frame.n))
                    record = channel.record or EveRecord("none", variant, frame.k, spec=self.spec)
                other.sendall(raw)
                self._log(tag, raw, raw)
                sender = other
            elif isinstance(frame, wire.Abort):
                other.sendall(raw)
                self._log(tag, raw, raw)
                raise SessionAbort(f"session aborted by {'alice' if from_alice else 'bob'}", reason=frame.reason)
            elif isinstance(frame, wire.Done):
                other.sendall(raw)
                self._log(tag, raw, raw)
                if not from_alice:
                    if channel is not None:
                        channel.close()
                    return record
                sender = other
            else:
                if channel is None:
                    raise ProtocolOrderError("PHOTON before HELLO")
                photon = frame.to_message()
                direction = Direction.A_TO_B if from_alice else Direction.B_TO_A
                out = channel.deliver(photon, direction)
                data = raw if out is photon else wire.encode_frame(wire.WirePhoton.from_message(out))
                dest = bob if out.pass_no in (1, 3) else alice
                dest.sendall(data)
                self._log(tag, raw, data)
                sender = alice if (dest is alice or out.pass_no == 3) else bob


def run_eve_proxy(
    spec: AttackSpec,
    listen_endpoint: Endpoint,
    upstream_endpoint: Endpoint,
    *,
    alphabet: str = "bits",
    secret: SecretAngles | None = None,
    timeout: float = DEFAULT_TIMEOUT,
    on_listen: Callable[[Endpoint], None] | None = None,
    transcript: list | None = None,
) -> EveRecord:
    """Relay a single Alice->Bob connection through the configured adversary."""
    with EveProxy(
        spec, listen_endpoint, upstream_endpoint,
        alphabet=alphabet, secret=secret, timeout=timeout, transcript=transcript,
    ) as proxy:
        if on_listen is not None:
            on_listen(proxy.address)
        return proxy.serve_one()


def attach_eve_record(report: RunReport, record: EveRecord | None) -> RunReport:
    """Score a proxy's record against Bob's report, as an in-process run would.

    An honest (``none``) record leaves the report untouched.
    """
    if record is None or record.kind == "none":
        return report
    report.eve = record.summary(report.message)
    report.eve_guesses = bit_guesses(record, len(report.message))
    return report


def run_loopback(
    cfg: SessionConfig,
    *,
    with_proxy: bool | None = None,
    timeout: float = DEFAULT_TIMEOUT,
    transcript: list | None = None,
    host: str = "127.0.0.1",
) -> tuple[RunReport, RunReport, EveRecord | None]:
    """Run Bob, an optional Eve proxy (``cfg.attack``) and Alice on loopback sockets.

    Returns ``(alice_report, bob_report, eve_record)``; Bob's report has
    Eve's summary attached so it compares directly with an in-process run.
    The proxy is used whenever the attack is not ``none`` unless
    ``with_proxy`` says otherwise.
    """
    if with_proxy is None:
        with_proxy = cfg.attack.kind != "none"
    results: dict = {}
    bob_ready = threading.Event()
    bob_addr: list = []

    def listening(addr):
        bob_addr.append(addr)
        bob_ready.set()

    def run(name, fn):
        try:
            results[name] = fn()
        except BaseException as exc:  # re-raised in the caller's thread
            results[name] = exc
        finally:
            bob_ready.set()

    bob_t = threading.Thread(
        target=run,
        args=("bob", lambda: run_peer("bob", cfg, (host, 0), timeout=timeout, accept_timeout=timeout, on_listen=listening)),
        daemon=True,
    )
    bob_t.start()
    bob_ready.wait(timeout)
    if not bob_addr:
        raise SessionAbort("bob did not start listening")
    target = bob_addr[0]
    proxy = None
    eve_t = None
    if with_proxy:
        proxy = EveProxy(
            cfg.attack, (host, 0), target,
            alphabet=cfg.alphabet, secret=cfg.secret, timeout=timeout, transcript=transcript,
        )
        target = proxy.address
        eve_t = threading.Thread(target=run, args=("eve", proxy.serve_one), daemon=True)
        eve_t.start()
    try:
        try:
            results["alice"] = run_peer("alice", cfg, target, timeout=timeout)
        except SessionAbort as exc:
            results["alice"] = exc
        bob_t.join(timeout)
        if eve_t is not None:
            eve_t.join(timeout)
    finally:
        if proxy is not None:
            proxy.close()
    for name in ("bob", "eve", "alice"):
        if isinstance(results.get(name), BaseException):
            raise results[name]
    record = results.get("eve")
    return results["alice"], attach_eve_record(results["bob"], record), record
