"""Compare the compiled LSTM kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--json out.json]

Reports the best-of-N wall time per call for the LSTM forward pass, the
forward+backward pair, and one Forecaster training epoch, plus the largest
output difference between the two backends.
"""
import argparse
import json
import timeit

import numpy as np

from evshield.nncore import AdamState, Forecaster, LstmLayerParams, layers, train_epoch
from evshield.nncore.backend import available_backends, get_kernels

SHAPES = {
    "forecaster-lstm (B=32, T=24, 1->50)": (32, 24, 1, 50),
    "autoencoder-enc2 (B=32, T=24, 50->25)": (32, 24, 50, 25),
    "inference (B=512, T=24, 1->50)": (512, 24, 1, 50),
}


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_lstm(kern, shape, repeat):
    B, T, n_in, hidden = shape
    rng = np.random.default_rng(0)
    p = LstmLayerParams.initialize(n_in, hidden, rng)
    x = rng.normal(size=(B, T, n_in))
    fwd = kern.lstm_forward(x, p.W, p.U, p.b)
    up = rng.normal(size=(T, B, hidden))

    def both():
        hs, cs, tc, acts = kern.lstm_forward(x, p.W, p.U, p.b)
        kern.lstm_backward(up, x, p.W, p.U, hs, cs, tc, acts)

    forward = best_of(lambda: kern.lstm_forward(x, p.W, p.U, p.b), repeat, 5)
    return forward, best_of(both, repeat, 5), fwd, kern.lstm_backward(up, x, p.W, p.U, *fwd)


def bench_epoch(name, repeat):
    layers.kernels = get_kernels(name)
    rng = np.random.default_rng(1)
    t = np.arange(1024 + 24)
    series = 0.5 + 0.4 * np.sin(2 * np.pi * t / 24)
    x = np.lib.stride_tricks.sliding_window_view(series[:-1], 24)[:, :, None].copy()
    y = series[24:, None]
    model = Forecaster()
    params = model.init_params(rng)
    state = AdamState.fresh(params, 1e-3)
    return best_of(lambda: train_epoch(model, params, state, x, y, 32, np.random.default_rng(2)),
                   max(2, repeat // 5), 1)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json", help="also write the numbers here")
    args = ap.parse_args(argv)

    names = available_backends()
    if "compiled" not in names:
        print("compiled kernels are not built; only the numpy fallback is available")
    original = layers.kernels
    rows, outputs = [], {}
    for label, shape in SHAPES.items():
        for name in names:
            fwd, both, out_f, out_b = bench_lstm(get_kernels(name), shape, args.repeat)
            outputs[(label, name)] = (out_f, out_b)
            rows.append({"case": label, "backend": name, "forward_ms": fwd * 1e3, "fwd_bwd_ms": both * 1e3})
    for name in names:
        rows.append({"case": "forecaster epoch (1024 windows)", "backend": name,
                     "forward_ms": None, "fwd_bwd_ms": bench_epoch(name, args.repeat) * 1e3})
    layers.kernels = original

    print(f"{'case':42s} {'backend':9s} {'forward ms':>11s} {'fwd+bwd ms':>11s}")
    for r in rows:
        fwd = "" if r["forward_ms"] is None else f"{r['forward_ms']:11.3f}"
        print(f"{r['case']:42s} {r['backend']:9s} {fwd:>11s} {r['fwd_bwd_ms']:11.3f}")

    if len(names) == 2:
        print()
        for label in SHAPES:
            a, b = outputs[(label, "python")], outputs[(label, "compiled")]
            diff = max(float(np.max(np.abs(u - v))) for u, v in zip(a[0] + a[1], b[0] + b[1]))
            slow = next(r for r in rows if r["case"] == label and r["backend"] == "python")["fwd_bwd_ms"]
            fast = next(r for r in rows if r["case"] == label and r["backend"] == "compiled")["fwd_bwd_ms"]
            print(f"{label}: speedup x{slow / fast:.2f}, max |difference| {diff:.1e}")
        epoch = [r["fwd_bwd_ms"] for r in rows if r["case"].startswith("forecaster epoch")]
        print(f"training epoch speedup x{epoch[0] / epoch[1]:.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
