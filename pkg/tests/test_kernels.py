import math

import numpy as np
import pytest

from qtp import kernels
from qtp import statekit as sk
from qtp.adversary import AttackSpec, build_channel
from qtp.batch import run_batch
from qtp.phases import PhaseSet
from qtp.protocol import run_session

from conftest import intercept, make_cfg

BACKENDS = [pytest.param(kernels.python_kernels, id="python")]
if kernels.compiled_kernels is not None:
    BACKENDS.append(pytest.param(kernels.compiled_kernels, id="cython"))


def random_batch(n, seed=0):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=n) + 1j * rng.normal(size=n)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    norm = np.sqrt(np.abs(h) ** 2 + np.abs(v) ** 2)
    return h / norm, v / norm, rng.uniform(-7, 7, (n, 4)), rng.uniform(0, 4, (n, 3)), rng.random((n, 3))


def test_backend_selection_is_reported():
    assert kernels.BACKEND in ("cython", "python")
    if kernels.BACKEND == "cython":
        assert kernels.three_pass is kernels.compiled_kernels.three_pass


def test_compiled_extension_was_built():
    # the install builds the extension; a silent fallback would hide a broken build
    import importlib

    mod = importlib.import_module("qtp.kernels._ckernels")
    assert hasattr(mod, "three_pass")


@pytest.mark.parametrize("mod", BACKENDS)
def test_kernels_match_statekit_bit_for_bit(mod):
    n = 2000
    h, v, rot, tb, tu = random_batch(n, 1)
    out_h, out_v, outcomes = mod.three_pass(h, v, rot, (1, 0, 1), tb, tu)
    for i in range(n):
        s = sk.PureState(complex(h[i]), complex(v[i]))
        got = []
        for p in range(3):
            s = sk.rotate(s, rot[i, p])
            if p != 1:
                bit, s = sk.measure(s, tb[i, p], tu[i, p])
                got.append(bit)
        s = sk.rotate(s, rot[i, 3])
        assert (outcomes[i, 0], outcomes[i, 1], outcomes[i, 2]) == (got[0], -1, got[1])
        assert out_h[i] == s.amp_h and out_v[i] == s.amp_v
    f = mod.fidelity(h, v, out_h, out_v)
    for i in range(0, n, 7):
        assert f[i] == sk.fidelity(sk.PureState(complex(h[i]), complex(v[i])),
                                   sk.PureState(complex(out_h[i]), complex(out_v[i])))


@pytest.mark.skipif(kernels.compiled_kernels is None, reason="extension not built")
@pytest.mark.parametrize("taps", [(0, 0, 0), (1, 0, 0), (0, 1, 1), (1, 1, 1)])
def test_compiled_equals_fallback(taps):
    h, v, rot, tb, tu = random_batch(50_000, 2)
    a = kernels.python_kernels.three_pass(h, v, rot, taps, tb, tu)
    b = kernels.compiled_kernels.three_pass(h, v, rot, taps, tb, tu)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
    ma = kernels.python_kernels.measure(h, v, tb[:, 0], tu[:, 0])
    mb = kernels.compiled_kernels.measure(h, v, tb[:, 0], tu[:, 0])
    for x, y in zip(ma, mb):
        assert np.array_equal(x, y)
    assert np.array_equal(kernels.python_kernels.fidelity(h, v, h[::-1], v[::-1]),
                          kernels.compiled_kernels.fidelity(h, v, h[::-1], v[::-1]))


@pytest.mark.parametrize("mod", BACKENDS)
def test_measure_outcome_threshold(mod):
    h = np.array([math.cos(math.pi / 3)] * 4, dtype=complex)
    v = np.array([math.sin(math.pi / 3)] * 4, dtype=complex)
    out, ph, pv = mod.measure(h, v, np.zeros(4), np.array([0.0, 0.2499, 0.2501, 0.9999]))
    assert out.tolist() == [0, 0, 1, 1]
    assert ph.tolist() == [1, 1, math.cos(math.pi / 2), math.cos(math.pi / 2)]


def test_empty_batches():
    for mod in [p.values[0] for p in BACKENDS]:
        e = np.zeros(0, dtype=complex)
        z = np.zeros((0, 3))
        h, v, o = mod.three_pass(e, e, np.zeros((0, 4)), (1, 1, 1), z, z)
        assert h.shape == (0,) and o.shape == (0, 3)


CASES = [
    ("classical", None, intercept([1, 2, 3], "lattice")),
    ("classical", None, AttackSpec("mitm")),
    ("quantum", "random_qubits", intercept([2], "continuous")),
    ("quantum", None, AttackSpec("mitm")),
    ("quantum", "random_qubits", AttackSpec("mitm")),
    ("auth", None, intercept([1, 3], "fixed:0.3")),
    ("auth", None, AttackSpec("mitm")),
    ("auth", None, AttackSpec("mitm", secret_known=True)),
    ("auth", "random_qubits", AttackSpec()),
]


@pytest.mark.parametrize("variant, source, spec", CASES)
@pytest.mark.parametrize("mod", BACKENDS)
def test_batch_report_equals_session_report(variant, source, spec, mod):
    cfg = make_cfg(variant, k=8, n=600, attack=spec, source=source, complex_qubits=source is not None)
    ch = build_channel(cfg.attack, cfg.variant, PhaseSet(cfg.k), alphabet=cfg.alphabet, secret=cfg.secret)
    ref = run_session(cfg, ch)
    got = run_batch(cfg, kernels=mod)
    assert got.to_dict(timestamps=False) == ref.to_dict(timestamps=False)
    assert got.decoded == ref.decoded
    assert got.eve_guesses == ref.eve_guesses
