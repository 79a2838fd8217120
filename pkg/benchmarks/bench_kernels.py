"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import sys
import timeit
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from jjdrive import _pykernels  # noqa: E402
from jjdrive.netlist import incidence, stamp  # noqa: E402

from circuits import two_filter  # noqa: E402


def cases():
    net = two_filter()
    cap, cond, inv_l = stamp(net, load_ports=True)
    inc = incidence(net, ["J", "PL", "PR"])
    omegas = 2 * np.pi * np.linspace(1e9, 8e9, 2001)
    rng = np.random.default_rng(0)
    mats = rng.normal(size=(512, 12, 12)) + 1j * rng.normal(size=(512, 12, 12))
    mats /= np.linalg.norm(mats, axis=(1, 2), keepdims=True)
    return {
        "nodal_sweep (2001 points)": ("nodal_sweep", (cond, cap, inv_l, inc, omegas)),
        "ordered_product (512 x 12x12)": ("ordered_product", (mats,)),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    try:
        from jjdrive import _fastcore
    except ImportError:
        sys.exit("compiled core not built; run `pip install --no-build-isolation -e .` first")
    print(f"{'kernel':32s} {'cython ms':>10s} {'python ms':>10s} {'speedup':>8s}")
    for label, (name, call_args) in cases().items():
        fast, slow = getattr(_fastcore, name), getattr(_pykernels, name)
        np.testing.assert_allclose(fast(*call_args), slow(*call_args), rtol=1e-9)
        tf = min(timeit.repeat(lambda: fast(*call_args), number=1, repeat=args.repeat)) * 1e3
        ts = min(timeit.repeat(lambda: slow(*call_args), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:32s} {tf:10.2f} {ts:10.2f} {ts / tf:8.2f}")


if __name__ == "__main__":
    main()
