"""Compare the numba and pure-numpy kernel backends.

The backend is chosen once at import time from the ``SMOKESENSE_NUMBA``
environment variable, so this script re-executes itself as a worker
subprocess per backend, then prints a side-by-side table:

* ``im2col`` / ``col2im`` micro-benchmarks at convolution shapes the
  detector actually hits (desk-scale 32 px tiles and full-scale 224 px
  tiles), and
* one full optimizer step (forward + backward + update) of the detector
  on a synthetic batch.

Run from the repository root::

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --full-tiles --repeat 5
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _time_call(fn, *args, repeat: int) -> float:
    """Best-of-``repeat`` wall time in seconds (first call excluded as warmup)."""
    fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _micro_cases(full_tiles: bool):
    # (label, batch, height, width, channels, kernel, stride)
    cases = [
        ("tile32 conv3x3 c3", 12, 34, 34, 3, 3, 1),
        ("tile32 conv3x3 c16", 12, 18, 18, 16, 3, 1),
        ("tile32 conv3x3 c32", 12, 10, 10, 32, 3, 1),
    ]
    if full_tiles:
        cases += [
            ("tile224 conv3x3 c3", 4, 226, 226, 3, 3, 1),
            ("tile224 conv3x3 c16", 4, 114, 114, 16, 3, 1),
        ]
    return cases


def run_worker(args: argparse.Namespace) -> dict:
    import numpy as np

    from smokesense.backend import numba_enabled
    from smokesense.kernels import col2im, im2col

    rng = np.random.default_rng(0)
    out: dict = {"backend": "numba" if numba_enabled() else "numpy", "micro": {}}

    for label, n, h, w, c, k, stride in _micro_cases(args.full_tiles):
        xp = rng.standard_normal((n, h, w, c))
        cols = im2col(xp, k, k, stride)
        out["micro"][label] = {
            "im2col_s": _time_call(im2col, xp, k, k, stride, repeat=args.repeat),
            "col2im_s": _time_call(
                col2im, cols, n, h, w, c, k, k, stride, repeat=args.repeat
            ),
        }

    # One full training step at desk scale: forward, losses, backward, update.
    from smokesense.model.network import ModelConfig, SmokeDetector
    from smokesense.training import AdamW, LossConfig, compute_losses

    config = ModelConfig(
        tile_size=32, grid_rows=2, grid_cols=3, backbone_channels=(16, 32),
        backbone_embed_dim=32, temporal_hidden_dim=32, spatial_token_dim=32,
        n_heads=4, n_transformer_layers=1,
    )
    model = SmokeDetector(config, seed_or_rng=0)
    optimizer = AdamW(model)
    n = args.batch
    tiles = config.grid_rows * config.grid_cols
    prev = rng.standard_normal((n, tiles, 32, 32, 3))
    curr = rng.standard_normal((n, tiles, 32, 32, 3))
    tile_labels = rng.integers(0, 2, (n, tiles)).astype(np.float64)
    image_labels = rng.integers(0, 2, n).astype(np.float64)
    loss_cfg = LossConfig()

    def step():
        optimizer.zero_grad()
        output, cache = model.forward(prev, curr)
        _, grads = compute_losses(
            output, tile_labels, image_labels, loss_cfg, with_grads=True
        )
        model.backward(grads, cache)
        optimizer.step()

    out["train_step_s"] = _time_call(step, repeat=args.repeat)
    out["train_step_batch"] = n
    return out


def run_orchestrator(args: argparse.Namespace) -> int:
    results = {}
    for backend, flag in (("numpy", "0"), ("numba", "1")):
        env = dict(os.environ, SMOKESENSE_NUMBA=flag)
        cmd = [sys.executable, os.path.abspath(__file__), "--worker", *sys.argv[1:]]
        print(f"[{backend}] measuring ...", flush=True)
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            print(proc.stderr, file=sys.stderr)
            return proc.returncode
        payload = json.loads(proc.stdout.splitlines()[-1])
        if payload["backend"] != backend:
            print(
                f"warning: requested {backend} backend but worker ran "
                f"{payload['backend']} (numba unavailable?)",
                file=sys.stderr,
            )
        results[backend] = payload

    width = max(len(k) for k in results["numpy"]["micro"]) + 2
    print()
    print(f"{'im2col':<{width}} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for label in results["numpy"]["micro"]:
        a = results["numpy"]["micro"][label]["im2col_s"]
        b = results["numba"]["micro"][label]["im2col_s"]
        print(f"{label:<{width}} {a * 1e3:>8.2f}ms {b * 1e3:>8.2f}ms {a / b:>7.2f}x")
    print()
    print(f"{'col2im':<{width}} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for label in results["numpy"]["micro"]:
        a = results["numpy"]["micro"][label]["col2im_s"]
        b = results["numba"]["micro"][label]["col2im_s"]
        print(f"{label:<{width}} {a * 1e3:>8.2f}ms {b * 1e3:>8.2f}ms {a / b:>7.2f}x")
    print()
    a = results["numpy"]["train_step_s"]
    b = results["numba"]["train_step_s"]
    n = results["numpy"]["train_step_batch"]
    print(
        f"full optimizer step (batch {n}): numpy {a * 1e3:.1f}ms, "
        f"numba {b * 1e3:.1f}ms, speedup {a / b:.2f}x"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    parser.add_argument("--repeat", type=int, default=3, help="timed repeats per case")
    parser.add_argument("--batch", type=int, default=8, help="training-step batch size")
    parser.add_argument(
        "--full-tiles", action="store_true",
        help="also benchmark full-scale 224 px tile shapes (slower)",
    )
    args = parser.parse_args(argv)
    if args.worker:
        print(json.dumps(run_worker(args)))
        return 0
    return run_orchestrator(args)


if __name__ == "__main__":
    raise SystemExit(main())
