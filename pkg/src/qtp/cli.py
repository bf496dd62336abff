"""Command-line entry point: ``qtp {run,oracle,serve,connect,proxy,keygen}``.

Exit codes: 0 success, 2 configuration error, 3 session abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from qtp import oracle
from qtp.adversary import AttackSpec, build_channel
from qtp.config import MESSAGE_SOURCES, SessionConfig, read_angle_file, read_bit_file
from qtp.errors import ConfigError, OracleUnsupportedError, ProtocolOrderError, SessionAbort
from qtp.phases import PhaseSet, SecretAngles, derive_secret, stream
from qtp.protocol import run_session
from qtp.report import CSV_COLUMNS
from qtp.statekit import state_from_angle

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3

ATTACK_KINDS = {"none": "none", "intercept": "intercept_resend", "intercept_resend": "intercept_resend", "mitm": "mitm"}

CSV_HELP = (
    "write per-position rows to this CSV file; columns: "
    + ", ".join(CSV_COLUMNS)
    + " (states are written as h_re,h_im,v_re,v_im)"
)


def _default_seed() -> int:
    env = os.environ.get("QTP_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"QTP_SEED must be an integer, got {env!r}") from None


def _parse_passes(text: str) -> list[int]:
    try:
        return sorted({int(p) for p in text.split(",") if p.strip()})
    except ValueError:
        raise ConfigError(f"--passes takes a comma list like 1,3, got {text!r}") from None


def _add_attack_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("attack")
    g.add_argument("--attack", choices=sorted(ATTACK_KINDS), help="eavesdropper model (default none)")
    g.add_argument("--passes", help="intercepted passes, e.g. 1 or 1,2,3 (intercept only; default 1)")
    g.add_argument("--basis", help="fixed:<radians> | lattice | continuous (intercept only; default fixed:0)")
    g.add_argument("--eve-seed", type=int, help="Eve's seed (default: --seed)")
    g.add_argument("--secret-known", action="store_true", default=None,
                   help="analysis mode: MITM Eve knows the pre-shared angles")


def _add_session_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON session config; explicit flags override its fields")
    p.add_argument("--variant", choices=["classical", "quantum", "auth"])
    p.add_argument("--k", type=int, help="lattice size K (default 8)")
    p.add_argument("--n", type=int, help="message length (default: file length, else 1000)")
    p.add_argument("--message", choices=MESSAGE_SOURCES, help="message source (default random_bits)")
    p.add_argument("--message-file", help="bit file (0/1 characters) or angle file (radians per line)")
    p.add_argument("--complex", action="store_true", default=None, help="random_qubits: Haar-random complex states")
    p.add_argument("--seed", type=int, help="default for every seed (fallback: $QTP_SEED, else 0)")
    p.add_argument("--alice-seed", type=int)
    p.add_argument("--bob-seed", type=int)
    p.add_argument("--message-seed", type=int)
    p.add_argument("--secret", help="pre-shared angle file from `keygen` (auth variant)")
    p.add_argument("--no-timestamp", action="store_true", help="omit wall-clock fields for byte-identical reports")
    p.add_argument("--csv", help=CSV_HELP)
    _add_attack_args(p)


def _attack_dict(args, base: dict) -> dict:
    d = dict(base)
    if args.attack is not None:
        d["kind"] = ATTACK_KINDS[args.attack]
    kind = d.get("kind", "none")
    if args.passes is not None:
        d["passes"] = _parse_passes(args.passes)
    elif kind == "intercept_resend" and not d.get("passes"):
        d["passes"] = [1]
    if args.basis is not None:
        d["basis"] = args.basis
    if args.secret_known:
        d["secret_known"] = True
    return d


def config_from_args(args) -> SessionConfig:
    base: dict = {}
    base_dir = None
    if args.config:
        path = Path(args.config)
        try:
            base = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        base_dir = path.parent
    d = dict(base)
    if args.variant is not None:
        d["variant"] = args.variant
    if "variant" not in d:
        raise ConfigError("--variant is required (classical, quantum or auth)")
    if args.k is not None:
        d["k"] = args.k
    d.setdefault("k", 8)
    msg = dict(d.get("message", {}))
    if args.message is not None:
        msg["source"] = args.message
    if args.message_file is not None:
        msg["file"] = args.message_file
    if args.complex:
        msg["complex"] = True
    if msg.get("file") and "source" not in msg:
        msg["source"] = "bit_file" if d["variant"] == "classical" else "qubit_angle_file"
    d["message"] = msg
    if args.n is not None:
        d["n"] = args.n
    elif "n" not in d:
        src = msg.get("source")
        if msg.get("file") and src in ("bit_file", "qubit_angle_file"):
            reader = read_bit_file if src == "bit_file" else read_angle_file
            d["n"] = len(reader(msg["file"]))
        else:
            d["n"] = 1000
    seeds = dict(d.get("seeds", {}))
    default = args.seed if args.seed is not None else (None if seeds else _default_seed())
    for name in ("alice", "bob", "eve", "message"):
        explicit = getattr(args, f"{name}_seed")
        if explicit is not None:
            seeds[name] = explicit
        elif default is not None and (args.seed is not None or name not in seeds):
            seeds[name] = default
    d["seeds"] = seeds
    attack = _attack_dict(args, d.get("attack", {}))
    attack["eve_seed"] = seeds["eve"]
    d["attack"] = attack
    if args.secret is not None:
        d["secret"] = {"path": args.secret}
    return SessionConfig.from_dict(d, base_dir=None if args.secret is not None else base_dir)


def _emit(obj_json: str, out=None) -> None:
    (out or sys.stdout).write(obj_json + "\n")


def _finish_report(report, args, started: float) -> None:
    if not args.no_timestamp:
        report.wall_clock_s = time.perf_counter() - started
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            report.write_csv(fh)
    _emit(report.to_json(timestamps=not args.no_timestamp))


def cmd_run(args) -> int:
    cfg = config_from_args(args)
    started = time.perf_counter()
    if args.engine == "batch":
        from qtp.batch import run_batch

        report = run_batch(cfg)
    else:
        channel = build_channel(cfg.attack, cfg.variant, PhaseSet(cfg.k), alphabet=cfg.alphabet, secret=cfg.secret)
        report = run_session(cfg, channel)
    _finish_report(report, args, started)
    return EXIT_OK


def cmd_oracle(args) -> int:
    attack = _attack_dict(args, {})
    attack["eve_seed"] = 0
    spec = AttackSpec.from_dict(attack)
    inputs = None
    weights = None
    alphabet = "bits"
    if args.inputs:
        inputs = [state_from_angle(a) for a in read_angle_file(args.inputs)]
        alphabet = "qubits"
    if args.weights:
        weights = [float(w) for w in args.weights.split(",")]
    result = oracle.enumerate_attack(args.variant, args.k, spec, alphabet=alphabet, inputs=inputs, weights=weights)
    _emit(result.to_json())
    return EXIT_OK


def cmd_serve(args) -> int:
    from qtp import netsim

    cfg = config_from_args(args)
    endpoint = netsim.parse_endpoint(args.listen)
    started = time.perf_counter()

    def announce(addr):
        print(f"listening on {addr[0]}:{addr[1]}", file=sys.stderr, flush=True)

    report = netsim.run_peer("bob", cfg, endpoint, timeout=args.timeout, on_listen=announce)
    _finish_report(report, args, started)
    return EXIT_OK


def cmd_connect(args) -> int:
    from qtp import netsim

    cfg = config_from_args(args)
    started = time.perf_counter()
    report = netsim.run_peer("alice", cfg, netsim.parse_endpoint(args.to), timeout=args.timeout)
    args.csv = None
    _finish_report(report, args, started)
    return EXIT_OK


def cmd_proxy(args) -> int:
    from qtp import netsim

    attack = _attack_dict(args, {})
    seed = args.eve_seed if args.eve_seed is not None else (args.seed if args.seed is not None else _default_seed())
    attack["eve_seed"] = seed
    spec = AttackSpec.from_dict(attack)
    secret = SecretAngles.load(args.secret) if args.secret else None
    with netsim.EveProxy(
        spec, netsim.parse_endpoint(args.listen), netsim.parse_endpoint(args.upstream),
        alphabet=args.alphabet, secret=secret, timeout=args.timeout,
    ) as proxy:
        host, port = proxy.address
        print(f"proxy listening on {host}:{port}", file=sys.stderr, flush=True)
        records = proxy.serve(args.sessions)
    failed = [r for r in records if isinstance(r, Exception)]
    out = [r.to_dict() for r in records if not isinstance(r, Exception)]
    _emit(json.dumps(out[0] if args.sessions == 1 and out else out, indent=2, sort_keys=True))
    if failed:
        print(f"{len(failed)} proxied session(s) failed: {failed[0]}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def cmd_keygen(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    secret = derive_secret(PhaseSet(args.k), stream(seed, "secret"), args.n)
    secret.save(args.out)
    print(f"wrote {args.n} secret angle indices for K={args.k} to {args.out} (mode 0600; treat as key material)",
          file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one in-process session and print a JSON report")
    _add_session_args(p)
    p.add_argument("--engine", choices=["session", "batch"], default="session",
                   help="per-photon session (default) or the vectorized batch kernels")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", help="exact probabilities by lattice enumeration")
    p.add_argument("--variant", choices=["classical", "quantum", "auth"], required=True)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--inputs", help="angle file of test states (quantum variants); default |H>,|V>")
    p.add_argument("--weights", help="comma-separated input probabilities (default uniform)")
    _add_attack_args(p)
    p.set_defaults(func=cmd_oracle)

    for name, helptext, func in (
        ("serve", "run Bob: listen for Alice and decode", cmd_serve),
        ("connect", "run Alice: connect to Bob (or a proxy) and send", cmd_connect),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_session_args(p)
        if name == "serve":
            p.add_argument("--listen", required=True, help="HOST:PORT (port 0 picks a free port)")
        else:
            p.add_argument("--to", required=True, help="HOST:PORT of Bob or of an Eve proxy")
        p.add_argument("--timeout", type=float, default=10.0, help="seconds to wait for each frame")
        p.set_defaults(func=func)

    p = sub.add_parser("proxy", help="run Eve as a relay between Alice and Bob")
    p.add_argument("--listen", required=True, help="HOST:PORT Alice connects to")
    p.add_argument("--upstream", required=True, help="HOST:PORT of Bob")
    p.add_argument("--alphabet", choices=["bits", "qubits"], default="bits",
                   help="whether Alice sends bit-encoded states (Eve then guesses bits)")
    p.add_argument("--secret", help="pre-shared angles, only with --secret-known (analysis mode)")
    p.add_argument("--seed", type=int)
    p.add_argument("--sessions", type=int, default=1, help="connections to serve before exiting")
    p.add_argument("--timeout", type=float, default=10.0)
    _add_attack_args(p)
    p.set_defaults(func=cmd_proxy)

    p = sub.add_parser("keygen", help="generate pre-shared angles for the auth variant")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_keygen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OracleUnsupportedError, ValueError) as exc:
        print(f"qtp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SessionAbort, ProtocolOrderError, OSError) as exc:
        print(f"qtp: session aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
