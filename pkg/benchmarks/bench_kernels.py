"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 200000] [--repeat 5]

Also times a full batch run (intercept on passes 1,3 with lattice bases)
through each backend and checks that both produce identical reports.
"""

import argparse
import json
import time

import numpy as np

from qtp import kernels
from qtp.adversary import AttackSpec, BasisStrategy
from qtp.batch import run_batch
from qtp.config import Seeds, SessionConfig
from qtp.protocol import Variant


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def random_inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=n) + 1j * rng.normal(size=n)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    norm = np.sqrt(np.abs(h) ** 2 + np.abs(v) ** 2)
    rot = rng.integers(0, 8, size=(n, 4)) * np.pi / 8
    return h / norm, v / norm, rot, rng.uniform(0, np.pi, (n, 3)), rng.uniform(size=(n, 3))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print results as JSON")
    args = ap.parse_args()

    backends = {"python": kernels.python_kernels}
    if kernels.compiled_kernels is not None:
        backends["cython"] = kernels.compiled_kernels
    else:
        print("compiled kernels not built; timing the fallback only")

    h, v, rot, tb, tu = random_inputs(args.n)
    results = {}
    for name, mod in backends.items():
        row = {
            "three_pass_untapped": best_of(lambda: mod.three_pass(h, v, rot, (0, 0, 0), tb, tu), args.repeat),
            "three_pass_tapped": best_of(lambda: mod.three_pass(h, v, rot, (1, 1, 1), tb, tu), args.repeat),
            "measure": best_of(lambda: mod.measure(h, v, tb[:, 0], tu[:, 0]), args.repeat),
            "fidelity": best_of(lambda: mod.fidelity(h, v, h[::-1], v[::-1]), args.repeat),
        }
        cfg = SessionConfig(
            variant=Variant.V2_QUANTUM, k=8, n=args.n, message_source="random_qubits", complex_qubits=True,
            seeds=Seeds.all(1), attack=AttackSpec("intercept_resend", (1, 3), BasisStrategy.parse("lattice"), 1),
        )
        row["run_batch"] = best_of(lambda: run_batch(cfg, kernels=mod), max(1, args.repeat // 2))
        row["report"] = run_batch(cfg, kernels=mod).to_dict(timestamps=False)
        results[name] = row

    same = len({json.dumps(r.pop("report"), sort_keys=True) for r in results.values()}) == 1
    if args.json:
        print(json.dumps({"n": args.n, "identical_reports": same, "seconds": results}, indent=2))
        return
    names = list(results)
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':22s}" + "".join(f"{b:>12s}" for b in names) + ("     speedup" if len(names) > 1 else ""))
    for key in results[names[0]]:
        line = f"{key:22s}" + "".join(f"{results[b][key] * 1e3:10.2f}ms" for b in names)
        if len(names) > 1:
            line += f"{results['python'][key] / results['cython'][key]:11.1f}x"
        print(line)
    print("identical batch reports across backends:", same)


if __name__ == "__main__":
    main()
