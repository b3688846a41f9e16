"""Compare the compiled kernels with the numpy/pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from birkhoff_nlw import _backend
from birkhoff_nlw.lattice import SpectralState
from birkhoff_nlw.polynomial import NonlinearityF, taylor_expand_nlw
from birkhoff_nlw.resonance import FrequencyModel, min_divisor_scan


def bench_eval(backend, repeat):
    P = taylor_expand_nlw(NonlinearityF({2: 1.0, 3: 1.0}), 12, 4, 1.0)[4]
    rng = np.random.default_rng(0)
    st = SpectralState(1, 12, 1e-2 * (rng.standard_normal(23) + 1j * rng.standard_normal(23)))
    idx, coef = P.compiled(1, 12)
    z = st.doubled()
    fn = _backend.get("poly_eval_grad", backend)
    ref = fn(idx, coef, z, True)
    t = min(timeit.repeat(lambda: fn(idx, coef, z, True), number=20, repeat=repeat)) / 20
    return t, len(P), ref


def bench_scan(backend, repeat):
    model = FrequencyModel(1.0)
    t = min(timeit.repeat(lambda: min_divisor_scan(4, 6, model, "H1", backend=backend), number=1, repeat=repeat))
    return t, min_divisor_scan(4, 6, model, "H1", backend=backend)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _backend.compiled_available():
        print("compiled extension not built; only the python backend is available")
        return
    rows = []
    (tp, n, rp), (tc, _, rc) = bench_eval("python", args.repeat), bench_eval("compiled", args.repeat)
    agree = np.allclose(rp[1], rc[1], rtol=1e-12, atol=0)
    rows.append((f"poly_eval_grad ({n} terms, deg 4)", tp, tc, agree))
    (sp, resp), (sc, resc) = bench_scan("python", args.repeat), bench_scan("compiled", args.repeat)
    rows.append(("scan H1 r=4 N=6", sp, sc, resp.min_abs_divisor == resc.min_abs_divisor and resp.argmin == resc.argmin))
    print(f"{'kernel':36s} {'python [s]':>12s} {'compiled [s]':>13s} {'speedup':>8s}  agree")
    for name, a, b, ok in rows:
        print(f"{name:36s} {a:12.3e} {b:13.3e} {a / b:8.1f}  {ok}")


if __name__ == "__main__":
    main()
