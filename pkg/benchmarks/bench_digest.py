"""Compare the compiled and pure-Python digest kernels.

Two measurements: raw hashing of realistic state encodings, and end-to-end
exploration throughput with each backend (run in a subprocess so the
backend switch takes effect at import).

    python3 benchmarks/bench_digest.py [--quick]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

from ftsafra import digest
from ftsafra.scenario import Scenario, run_scenario
from ftsafra.sim import World

EXPLORE = """
import json
from ftsafra import DIGEST_BACKEND
from ftsafra.explorer import ExploreConfig, explore
r = explore(ExploreConfig("ft", 3, m_cap={m}, max_crashes=1))
print(json.dumps({{"backend": DIGEST_BACKEND, "states": r.states_visited, "seconds": r.seconds,
                   "visited_digest": r.visited_digest}}))
"""


def sample_encodings(count=200):
    out = []
    for seed in range(count):
        sc = Scenario("ft", 5, "fixed", 4, 2, mode="seeded", seed=seed, max_steps=60, max_crashes=2)
        tr = run_scenario(sc)
        out.append(digest.pack(World(sc.model()).encode(tr.final_state)))
    return out


def bench_kernels(blobs, repeat):
    rows = []
    kernels = [("python", digest.fnv1a64_py)]
    if digest.fnv1a64_ext is not None:
        kernels.append(("cython", digest.fnv1a64_ext))
    size = sum(len(b) for b in blobs)
    for name, fn in kernels:
        t = min(timeit.repeat(lambda: [fn(b) for b in blobs], number=1, repeat=repeat))
        rows.append((name, t, size / t / 1e6))
    return rows


def bench_explore(m):
    results = []
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("FTSAFRA_PURE_PYTHON", None)
        if pure:
            env["FTSAFRA_PURE_PYTHON"] = "1"
        p = subprocess.run([sys.executable, "-c", EXPLORE.format(m=m)], env=env,
                           capture_output=True, text=True, check=True)
        results.append(json.loads(p.stdout))
    return results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args()

    blobs = sample_encodings(50 if args.quick else 200)
    print(f"state encodings: {len(blobs)} blobs, mean {sum(map(len, blobs)) / len(blobs):.0f} bytes")
    rows = bench_kernels(blobs, 3 if args.quick else 7)
    for name, t, mbs in rows:
        print(f"  {name:<7} {t * 1e3:8.2f} ms  {mbs:7.2f} MB/s")
    if len(rows) == 2:
        print(f"  speedup {rows[0][1] / rows[1][1]:.1f}x")

    print("exploration, ft n=3 one crash:")
    res = bench_explore(1 if args.quick else 2)
    for r in res:
        print(f"  {r['backend']:<7} {r['states']} states in {r['seconds']:.2f} s "
              f"({r['states'] / r['seconds']:.0f} states/s)")
    assert len({r["visited_digest"] for r in res}) == 1, "backends disagree"


if __name__ == "__main__":
    main()
