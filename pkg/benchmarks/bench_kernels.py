"""Compare the compiled and pure-Python engine kernels (and the per-event reference PDP).

    python benchmarks/bench_kernels.py [--events 100000] [--repeat 3]
"""
import argparse
import time

from ztbench import kernels
from ztbench.policy import BaselineRules, EngineState, PolicyConfig, run_stream, securebank_decide
from ztbench.scenarios import GeneratorConfig, generate_stream
from ztbench.trust import TrustState


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    gen = GeneratorConfig()
    policy, rules = PolicyConfig(), BaselineRules()
    stream = generate_stream(gen, 42, args.events)
    n = len(stream)
    print(f"{n} events, default backend: {kernels.BACKEND}")

    backends = ["python"]
    try:
        kernels.get_backend("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled kernel not built; skipping")
    timings = {}
    for b in backends:
        for engine in ("baseline", "securebank"):
            t = _best(lambda: run_stream(engine, stream, policy, rules, gen.service_weights,
                                         backend=b), args.repeat)
            timings[(b, engine)] = t
            print(f"kernel {b:<7} {engine:<11} {t * 1e3:9.1f} ms  {t / n * 1e6:8.3f} us/event")
    if len(backends) == 2:
        for engine in ("baseline", "securebank"):
            print(f"speedup {engine:<11} {timings[('python', engine)] / timings[('cython', engine)]:6.1f}x")

    events = list(stream)

    def reference():
        trust = TrustState(prior=policy.prior)
        state = EngineState.for_services(gen.service_weights)
        for ev in events:
            securebank_decide(ev, trust, policy, state)

    t = _best(reference, 1)
    print(f"securebank_decide (reference) {t / n * 1e6:8.3f} us/decision")


if __name__ == "__main__":
    main()
