"""File-mediated command-line pipeline.

Every stage reads and writes the documented file formats under a common
root (``--out-dir``, default the current directory), so any external
program that reads measurements and writes an image can stand in for the
surrogate stage.  Each invocation is recorded in ``<root>/manifest.json``;
``tvtv replay`` re-runs the recorded stages and checks the outputs.

Example::

    tvtv phantom --rows 64 --cols 64 --out gt
    tvtv mask --rows 64 --cols 64 --accel 4 --center-lines 8 --seed 7 --out m
    tvtv measure --image gt --mask m --out b
    tvtv degrade --image gt --kind blur --sigma 1.5 --seed 3 --out w
    tvtv reconstruct --b b --w w --mask m --out xhat --trace trace.csv
    tvtv evaluate --ref gt --test w --test xhat --op-files m b --crop auto --out metrics.csv
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, fileio
from .bound import MODEL_KINDS, SurrogateModel, check_bound, ellipse_sampler, prop1_monte_carlo
from .errors import InvalidParameterError, TVTVError
from .image import ComplexImage
from .metrics import CropRegion, consistency, psnr, ssim
from .operators import MaskedFourier, MulticoilFourier, gaussian_coil_maps, make_cartesian_mask
from .phantom import SURROGATE_KINDS, degrade_surrogate, shepp_logan
from .solver import PRESETS, solve_tvtv

MANIFEST = "manifest.json"


class StageError(Exception):
    """A failure to be reported as a one-line diagnostic and nonzero exit."""


def _workers() -> int:
    raw = os.environ.get("TVTV_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise StageError(f"TVTV_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise StageError(f"TVTV_THREADS must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Stage:
    """Resolves paths against the root and collects manifest information."""

    def __init__(self, args: argparse.Namespace, argv: Sequence[str]):
        self.root = Path(args.out_dir)
        self.command = args.command
        self.argv = list(argv)
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []
        self.info: dict = {}
        self.timings: dict[str, float] = {}

    def path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.root / p

    def reads(self, *paths: Path) -> None:
        for p in paths:
            if not p.exists():
                raise StageError(f"missing file: {p}")
        self.inputs.extend(paths)

    def writes(self, *paths: Path) -> None:
        self.outputs.extend(paths)

    def timed(self, label: str):
        stage = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                stage.timings[label] = time.perf_counter() - self.t0

        return _Timer()

    def record(self) -> None:
        def rel(p: Path) -> str:
            try:
                return str(p.relative_to(self.root))
            except ValueError:
                return str(p)

        entry = {
            "command": self.command,
            "argv": self.argv,
            "inputs": {rel(p): _sha256(p) for p in self.inputs},
            "outputs": {rel(p): _sha256(p) for p in self.outputs},
            "info": self.info,
            "timings_s": self.timings,
        }
        path = self.root / MANIFEST
        manifest = {"toolkit": "tvtv", "toolkit_version": __version__, "stages": []}
        if path.exists():
            try:
                manifest = json.loads(path.read_text())
            except json.JSONDecodeError:
                pass
        outs = set(entry["outputs"])
        manifest["stages"] = [s for s in manifest.get("stages", []) if set(s.get("outputs", {})) != outs]
        manifest["stages"].append(entry)
        manifest["toolkit_version"] = __version__
        self.root.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_operator(stage: Stage, mask_name: str, sens_name: Optional[str]):
    stage.reads(*fileio.mask_paths(stage.path(mask_name)))
    mask = fileio.read_mask(stage.path(mask_name))
    if sens_name:
        stage.reads(*fileio.image_paths(stage.path(sens_name)))
        return mask, MulticoilFourier(mask, fileio.read_coil_maps(stage.path(sens_name)))
    return mask, MaskedFourier(mask)


def _read_image(stage: Stage, name: str) -> ComplexImage:
    stage.reads(*fileio.image_paths(stage.path(name)))
    return fileio.read_image(stage.path(name))


# commands


def cmd_phantom(args, stage: Stage) -> int:
    img = shepp_logan(args.rows, args.cols)
    stage.writes(*fileio.write_image(stage.path(args.out), img))
    return 0


def cmd_sens(args, stage: Stage) -> int:
    maps = gaussian_coil_maps(args.rows, args.cols, args.coils)
    stage.writes(*fileio.write_image(stage.path(args.out), maps))
    return 0


def cmd_mask(args, stage: Stage) -> int:
    mask = make_cartesian_mask(args.rows, args.cols, args.accel, args.center_lines, args.seed)
    stage.writes(*fileio.write_mask(stage.path(args.out), mask))
    stage.info.update(m=mask.m, achieved_acceleration=mask.achieved_acceleration, seed=args.seed)
    print(f"mask: m={mask.m} achieved acceleration={mask.achieved_acceleration:.4f}")
    return 0


def cmd_measure(args, stage: Stage) -> int:
    x = _read_image(stage, args.image)
    mask, op = _load_operator(stage, args.mask, args.sens)
    b = op.forward(x)
    coils = op.sens.coil_count if isinstance(op, MulticoilFourier) else None
    stage.writes(*fileio.write_measurements(stage.path(args.out), b, mask, op.kind, coils))
    return 0


def cmd_degrade(args, stage: Stage) -> int:
    x = _read_image(stage, args.image)
    op = None
    if args.kind == "zero-filled":
        if not args.mask:
            raise StageError("--kind zero-filled needs --mask")
        _, op = _load_operator(stage, args.mask, args.sens)
    w = degrade_surrogate(x, op, args.kind, sigma=args.sigma, noise=args.noise, seed=args.seed)
    stage.writes(*fileio.write_image(stage.path(args.out), w))
    stage.info.update(seed=args.seed)
    return 0


def cmd_reconstruct(args, stage: Stage) -> int:
    config = PRESETS[args.preset]
    overrides = {k: v for k, v in (("beta", args.beta), ("max_iters", args.max_iters), ("rho", args.rho)) if v is not None}
    config = config.with_(**overrides)
    mask, op = _load_operator(stage, args.mask, args.sens)
    stage.reads(*fileio.measurement_paths(stage.path(args.b)))
    b, header = fileio.read_measurements(stage.path(args.b), mask)
    if header["operator_kind"] != op.kind:
        raise StageError(f"measurement/mask mismatch: measurements are {header['operator_kind']!r}, operator is {op.kind!r}")
    w = _read_image(stage, args.w)

    with stage.timed("solve"):
        result = solve_tvtv(op, b, w, config)
    stage.writes(*fileio.write_image(stage.path(args.out), result.x_hat))
    if args.trace:
        trace = stage.path(args.trace)
        trace.parent.mkdir(parents=True, exist_ok=True)
        result.write_trace(trace)
        stage.writes(trace)

    final_consistency = consistency(op, result.x_hat, b)
    stage.info.update(
        config={k: getattr(config, k) for k in config.__dataclass_fields__},
        preset=args.preset,
        iterations_run=result.iterations_run,
        converged=result.converged,
        termination_reason=result.termination_reason,
        consistency_w=consistency(op, w, b),
        consistency_x_hat=final_consistency,
        objective=result.objective_trace[-1],
    )
    print(f"iterations: {result.iterations_run} ({result.termination_reason})")
    print(f"consistency ||Ax-b||_2: w={stage.info['consistency_w']:.6e} x_hat={final_consistency:.6e}")
    print(f"objective: {result.objective_trace[-1]:.10g}")
    if not result.converged:
        print(f"warning: ADMM did not converge within {config.max_iters} iterations", file=sys.stderr)
    return 0


def _broadcast(values: list, n: int, flag: str) -> list:
    if len(values) == 1:
        return values * n
    if len(values) != n:
        raise StageError(f"{flag} given {len(values)} times; expected 1 or {n}")
    return values


def summary_cell(values: Sequence[float]) -> str:
    """``average ± std, min/max`` (population std)."""
    v = np.asarray(values, dtype=float)
    if np.all(np.isinf(v)) or v.size == 0:
        return "inf ± 0, inf/inf" if v.size else ""
    return f"{v.mean():.6g} ± {v.std():.6g}, {v.min():.6g}/{v.max():.6g}"


def cmd_evaluate(args, stage: Stage) -> int:
    tests = args.test
    refs = _broadcast(args.ref, len(tests), "--ref")
    ops = _broadcast(args.op_files, len(tests), "--op-files") if args.op_files else [None] * len(tests)

    rows = []
    for i, (ref_name, test_name, op_files) in enumerate(zip(refs, tests, ops)):
        ref = _read_image(stage, ref_name)
        tst = _read_image(stage, test_name)
        if args.crop == "full":
            crop = CropRegion.full(ref.shape)
        elif args.crop == "auto":
            crop = CropRegion.bounding_box(ref, margin=2)
        else:
            crop = CropRegion.parse(args.crop)
        crop.check(ref.shape)
        cons = math.nan
        if op_files:
            mask, op = _load_operator(stage, op_files[0], args.sens)
            stage.reads(*fileio.measurement_paths(stage.path(op_files[1])))
            b, _ = fileio.read_measurements(stage.path(op_files[1]), mask)
            cons = consistency(op, tst, b)
        rows.append({
            "case_id": Path(test_name).name,
            "psnr_db": psnr(ref, tst, crop),
            "ssim": ssim(ref, tst, crop),
            "consistency": cons,
            "crop": str(crop),
        })
        if args.png_dir:
            stage.writes(*_export_png(stage.path(args.png_dir), f"case{i:03d}_{Path(test_name).name}", ref, tst))

    out = stage.path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["case_id", "psnr_db", "ssim", "consistency", "crop"])
        for r in rows:
            writer.writerow([r["case_id"], repr(r["psnr_db"]), repr(r["ssim"]), repr(r["consistency"]), r["crop"]])
        writer.writerow([
            "summary",
            summary_cell([r["psnr_db"] for r in rows]),
            summary_cell([r["ssim"] for r in rows]),
            summary_cell([r["consistency"] for r in rows]),
            "",
        ])
    stage.writes(out)
    for r in rows:
        print(f"{r['case_id']}: PSNR={r['psnr_db']:.4f} dB SSIM={r['ssim']:.4f} consistency={r['consistency']:.3e}")
    return 0


def _export_png(directory: Path, stem: str, ref: ComplexImage, tst: ComplexImage) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory.mkdir(parents=True, exist_ok=True)
    vmax = float(ref.magnitude().max()) or 1.0
    paths = []
    for label, arr, kw in (
        ("ref", ref.magnitude(), {"vmin": 0, "vmax": vmax}),
        ("test", tst.magnitude(), {"vmin": 0, "vmax": vmax}),
        ("diff", np.abs(tst.magnitude() - ref.magnitude()), {"vmin": 0}),
    ):
        p = directory / f"{stem}_{label}.png"
        plt.imsave(p, arr, cmap="gray", **kw)
        paths.append(p)
    return paths


def _parse_grid(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise StageError(f"--delta-grid must be comma-separated numbers, got {text!r}")


def cmd_boundcheck(args, stage: Stage) -> int:
    if args.trials < 100:
        raise StageError(f"--trials must be >= 100, got {args.trials}")
    mask = make_cartesian_mask(args.size, args.size, args.accel, args.center_lines, args.seed)
    op = MaskedFourier(mask)
    grid = _parse_grid(args.delta_grid)
    with stage.timed("monte_carlo"):
        summary = prop1_monte_carlo(
            op, SurrogateModel(args.model), ellipse_sampler(args.size, args.size), 0.0,
            args.trials, args.seed, train_size=args.train_size, fit=args.fit, workers=_workers(),
        )
    deltas = [d * summary.mean for d in grid] if args.relative else grid
    rows = check_bound(summary, deltas)

    out = stage.path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["delta", "empirical_probability", "bound", "margin", "status", "c", "epsilon", "C", "note"])
        for r in rows:
            writer.writerow([
                repr(r.delta), repr(r.empirical), "" if r.bound is None else repr(r.bound), repr(r.margin),
                r.status, repr(summary.c), repr(summary.epsilon), repr(summary.max), r.note,
            ])
    stage.writes(out)
    failures = [r for r in rows if r.status == "fail"]
    stage.info.update(seed=args.seed, c=summary.c, epsilon=summary.epsilon, C=summary.max, passed=not failures)
    for r in rows:
        bound = "n/a" if r.bound is None else f"{r.bound:.6f}"
        print(f"delta={r.delta:.6g}: P(Y>=delta)={r.empirical:.4f} bound={bound} margin={r.margin:.4f} {r.status} {r.note}")
    if all(r.status == "not-applicable" for r in rows) and rows:
        print("bound not applicable (c or epsilon is not positive)")
    print("overall: " + ("FAIL" if failures else "PASS"))
    return 1 if failures else 0


def cmd_replay(args, stage: Stage) -> int:
    """Re-run every stage in a manifest under ``--out-dir`` and compare output hashes."""
    manifest_path = Path(args.manifest)
    if not manifest_path.exists():
        raise StageError(f"missing file: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    root = Path(args.out_dir)
    mismatches = []
    for entry in manifest.get("stages", []):
        argv = list(entry["argv"])
        code = main(["--out-dir", str(root), *argv], record=False)
        if code != 0 and entry["command"] != "boundcheck":
            raise StageError(f"replay of {' '.join(argv)} exited with {code}")
        for rel, digest in entry["outputs"].items():
            if rel.endswith(".png"):
                continue
            p = root / rel
            if not p.exists() or _sha256(p) != digest:
                mismatches.append(rel)
    if mismatches:
        print("replay mismatch: " + ", ".join(mismatches))
        return 1
    print(f"replay: {len(manifest.get('stages', []))} stages reproduced bit-identically")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvtv", description="TV-TV post-processing for linear inverse problems")
    parser.add_argument("--out-dir", default=".", help="root for all relative input/output paths and the manifest")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="write a Shepp-Logan ground truth image")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("sens", help="write synthetic coil sensitivity maps")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--coils", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sens)

    p = sub.add_parser("mask", help="write a Cartesian undersampling mask")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--accel", type=float, required=True)
    p.add_argument("--center-lines", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("measure", help="compute b = A x")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--sens")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("degrade", help="produce a surrogate reconstruction w")
    p.add_argument("--image", required=True)
    p.add_argument("--kind", choices=SURROGATE_KINDS, required=True)
    p.add_argument("--sigma", type=float, default=1.5)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mask")
    p.add_argument("--sens")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("reconstruct", help="solve TV-TV minimization")
    p.add_argument("--b", required=True)
    p.add_argument("--w", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--sens")
    p.add_argument("--preset", choices=sorted(PRESETS), default="modl")
    p.add_argument("--beta", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="PSNR / SSIM / consistency report")
    p.add_argument("--ref", action="append", required=True)
    p.add_argument("--test", action="append", required=True)
    p.add_argument("--op-files", nargs=2, action="append", metavar=("MASK", "MEAS"))
    p.add_argument("--sens")
    p.add_argument("--crop", default="full", help="'full', 'auto' (bounding box + 2 px) or 'r0:r1,c0:c1'")
    p.add_argument("--png-dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("boundcheck", help="Monte-Carlo check of the inconsistency probability bound")
    p.add_argument("--model", choices=MODEL_KINDS, required=True)
    p.add_argument("--fit", action="store_true", help="fit a per-measurement gain on the training draws")
    p.add_argument("--train-size", type=int, default=4)
    p.add_argument("--accel", type=float, default=4.0)
    p.add_argument("--center-lines", type=int, default=2)
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--delta-grid", required=True)
    p.add_argument("--relative", action="store_true", help="grid values are fractions of the estimated c + epsilon")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_boundcheck)

    p = sub.add_parser("replay", help="re-run the stages recorded in a manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[Sequence[str]] = None, record: bool = True) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    # argv without the global root, so a manifest can be replayed elsewhere
    stage_argv = argv[argv.index(args.command):]
    stage = Stage(args, stage_argv)
    try:
        code = args.func(args, stage)
    except (StageError, TVTVError, FileNotFoundError) as exc:
        print(f"tvtv {args.command}: error: {exc}", file=sys.stderr)
        return 1
    if record and args.command != "replay":
        stage.record()
    return code


if __name__ == "__main__":
    sys.exit(main())
