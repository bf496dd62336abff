import json
import os
import subprocess
import sys

import pytest
from hypothesis import settings

from qtp.adversary import AttackSpec, BasisStrategy
from qtp.config import Seeds, SessionConfig
from qtp.phases import PhaseSet, derive_secret, stream
from qtp.protocol import Variant

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")


def make_cfg(variant="classical", k=8, n=200, attack=None, seed=7, source=None, complex_qubits=False,
             secret_seed=99, message_file=None):
    variant = Variant.parse(variant)
    attack = attack or AttackSpec("none")
    attack = AttackSpec(attack.kind, attack.passes, attack.basis, seed, attack.secret_known)
    secret = None
    if variant is Variant.V3_AUTHENTICATED:
        secret = derive_secret(PhaseSet(k), stream(secret_seed, "secret"), n)
    return SessionConfig(
        variant=variant,
        k=k,
        n=n,
        message_source=source or "random_bits",
        message_file=message_file,
        complex_qubits=complex_qubits,
        seeds=Seeds(alice=seed, bob=seed + 1, eve=seed, message=seed + 2),
        attack=attack,
        secret=secret,
    )


def intercept(passes, basis="fixed:0"):
    return AttackSpec("intercept_resend", tuple(passes), BasisStrategy.parse(basis))


def run_cli(*args, env_extra=None, cwd=None):
    env = dict(os.environ)
    env.pop("QTP_SEED", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "qtp", *args], capture_output=True, text=True, env=env, cwd=cwd, timeout=120
    )


def cli_json(*args, **kw):
    proc = run_cli(*args, **kw)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout), proc.stdout


@pytest.fixture
def secret_file(tmp_path):
    def write(k, n, seed=5):
        path = tmp_path / f"secret_k{k}_n{n}.json"
        derive_secret(PhaseSet(k), stream(seed, "secret"), n).save(path)
        return path

    return write


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
