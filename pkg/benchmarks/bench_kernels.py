"""Compare the compiled and numpy kernel backends on the two hot loops.

Run with ``python3 benchmarks/bench_kernels.py [--repeat R]``.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from kinemds.kernels import available_backends, get_backend


def _polyfit_inputs(n_links: int, K: int, L: int, rng: np.random.Generator):
    times = np.sort(rng.uniform(-1.0, 1.0, size=(n_links, K)), axis=1)
    tau = rng.normal(size=(n_links, K)) * 1e-8 + 3e-7
    return times, tau, L


def _cases(rng: np.random.Generator):
    for n_links, K in ((45, 10), (45, 100), (190, 500)):
        yield f"polyfit_links links={n_links} K={K}", "polyfit_links", _polyfit_inputs(n_links, K, 3, rng)
    for P, N in ((2, 10), (3, 20), (3, 40)):
        X = rng.normal(size=(P, N))
        yield f"lyapunov_matrix P={P} N={N}", "lyapunov_matrix", (X,)
        yield f"generalized_lyapunov_matrix P={P} N={N}", "generalized_lyapunov_matrix", (X,)


def run(repeat: int = 5) -> list[tuple[str, dict[str, float]]]:
    backends = {name: get_backend(name) for name in available_backends()}
    rows = []
    for label, fn, args in _cases(np.random.default_rng(0)):
        timings = {}
        for name, mod in backends.items():
            f = getattr(mod, fn)
            number = max(1, int(0.2 / max(timeit.timeit(lambda: f(*args), number=1), 1e-7)))
            best = min(timeit.repeat(lambda: f(*args), number=number, repeat=repeat)) / number
            timings[name] = best
        rows.append((label, timings))
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rows = run(args.repeat)
    names = list(rows[0][1])
    print(f"{'case':48s}" + "".join(f"{n + ' [us]':>16s}" for n in names) + ("    speedup" if len(names) > 1 else ""))
    for label, t in rows:
        line = f"{label:48s}" + "".join(f"{t[n] * 1e6:16.1f}" for n in names)
        if "cython" in t:
            line += f"{t['python'] / t['cython']:10.1f}x"
        print(line)


if __name__ == "__main__":
    main()
