"""Compare the compiled and pure-python kernel paths.

The kernel path is chosen at import time from the QUADLEV_PURE_PYTHON
environment variable, so each mode runs in a child interpreter.  The
child times only the closed-loop call itself (imports and, for the
compiled path, the first warm-up call are excluded).

Usage: python3 benchmarks/benchmark_paths.py [--reps N] [--duration S]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
from quadlev.config import default_config
from quadlev.control import build_stack
from quadlev.sim import run

duration = float(sys.argv[1])
reps = int(sys.argv[2])
cfg = default_config()
stack = build_stack(cfg.params, cfg.actuators, cfg.constants)
scenario = cfg.scenario("setting1", duration=duration)

run(scenario, stack, cfg.actuators, cfg.constants, cfg.guards)  # warm-up
times = []
for _ in range(reps):
    t0 = time.perf_counter()
    result = run(scenario, stack, cfg.actuators, cfg.constants, cfg.guards)
    times.append(time.perf_counter() - t0)
print(json.dumps({"best_s": min(times), "outcome": result.outcome}))
"""


def time_mode(pure: bool, duration: float, reps: int) -> dict:
    env = dict(os.environ)
    if pure:
        env["QUADLEV_PURE_PYTHON"] = "1"
    else:
        env.pop("QUADLEV_PURE_PYTHON", None)
    out = subprocess.run(
        [sys.executable, "-c", CHILD, str(duration), str(reps)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--reps", type=int, default=3)
    parser.add_argument("--duration", type=float, default=0.5, help="simulated time, s")
    args = parser.parse_args(argv)

    jit = time_mode(False, args.duration, args.reps)
    pure = time_mode(True, args.duration, args.reps)
    steps = round(args.duration / 1e-5)
    print(f"closed loop, {args.duration} s simulated ({steps} integration steps),")
    print(f"best of {args.reps} repetitions after warm-up:")
    print(f"  compiled     {jit['best_s'] * 1e3:9.2f} ms   outcome {jit['outcome']}")
    print(f"  pure python  {pure['best_s'] * 1e3:9.2f} ms   outcome {pure['outcome']}")
    print(f"  speedup      {pure['best_s'] / jit['best_s']:9.1f}x")
    if jit["outcome"] != pure["outcome"]:
        print("warning: paths disagree on outcome", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
