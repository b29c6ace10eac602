"""Compiled kernels vs the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--runs 2000] [--repeat 3]
"""

import argparse
import time

from rcmoments import SimConfig, _backend
from rcmoments.simulate import simulate_counts


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    names = _backend.available()
    if "cython" not in names:
        print("compiled kernels not built; only the fallback is available")
    kernels = {name: _backend.get(name) for name in names}

    print(f"{'task':<34}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    tasks = [(f"count non-flat ({n}x{r})", lambda k, n=n, r=r: k.nonflat_count(n, r))
             for n, r in [(2, 6), (3, 4), (4, 3)]]
    tasks += [(f"stream non-flat ({n}x{r})",
               lambda k, n=n, r=r: sum(1 for _ in k.iter_nonflat_labels(n, r)))
              for n, r in [(2, 6), (3, 4)]]
    for kmax in (3, 5):
        cfg = SimConfig(runs=args.runs, seed=42, k_list=tuple(range(2, kmax + 1)))
        tasks.append((f"simulate {args.runs} runs, k<={kmax}",
                      lambda k, cfg=cfg: simulate_counts(cfg, workers=1, backend=k.name).sum()))

    for label, task in tasks:
        timings, results = [], []
        for name in names:
            t, res = best_of(lambda: task(kernels[name]), args.repeat)
            timings.append(t)
            results.append(res)
        if any(r != results[0] for r in results):
            raise SystemExit(f"backends disagree on {label}: {results}")
        speed = f"{timings[-1] / timings[0]:.1f}x" if len(timings) > 1 else "-"
        print(f"{label:<34}" + "".join(f"{t:>11.3f}s" for t in timings) + f"{speed:>10}")


if __name__ == "__main__":
    main()
