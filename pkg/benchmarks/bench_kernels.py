"""Time the compiled trial loop against the pure-Python one.

    python3 benchmarks/bench_kernels.py [--repeat N] [--repetitions R]

Both backends run the same condition from identical inputs; the script
checks that their outputs agree before reporting timings.
"""
import argparse
import math
import time

import numpy as np

from exotension.controller import (DirectionalRegression, GravityAssist, TensionController,
                                   sigmoid_params)
from exotension.plantsim import ArmPlant, TrialProtocol, compiled_available, run_trial_protocol
from exotension.transmission import BowdenModel


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3, help="timing repeats (best is kept)")
    ap.add_argument("--repetitions", type=int, default=10, help="movement repetitions per trial")
    args = ap.parse_args(argv)
    if not compiled_available():
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")

    model = BowdenModel(0.25, math.pi / 2, 0.035)
    ctl = TensionController(DirectionalRegression.from_model(model), sigmoid_params(-1.0, 1.0),
                            GravityAssist(support_fraction=0.5))
    cfg = TrialProtocol(repetitions=args.repetitions)

    print(f"{'speed':>8} {'steps':>8} {'compiled':>10} {'python':>10} {'speedup':>8} {'max diff':>9}")
    for speed in cfg.peak_speeds_deg_s:
        run = {b: (lambda b=b: run_trial_protocol(ctl, model, ArmPlant(), cfg, speed, seed=0,
                                                  backend=b))
               for b in ("compiled", "python")}
        t_c, log_c = best_of(run["compiled"], args.repeat)
        t_p, log_p = best_of(run["python"], args.repeat)
        diff = max(float(np.max(np.abs(getattr(log_c, f) - getattr(log_p, f))))
                   for f in ("theta", "applied_tension", "desired_tension"))
        steps = int(log_c.time.size * cfg.sim_rate / cfg.log_rate)
        print(f"{speed:>6.0f}/s {steps:>8d} {t_c * 1e3:>8.1f}ms {t_p * 1e3:>8.1f}ms "
              f"{t_p / t_c:>7.1f}x {diff:>9.1e}")


if __name__ == "__main__":
    main()
