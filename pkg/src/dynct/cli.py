"""Command-line interface.

Subcommands: phantom (generate + save), sinogram (forward + noise),
reconstruct (run a solver on saved data), sweep (parameter grid -> CSV),
table (reproduce the comparison tables), report (metrics vs ground truth).

Exit codes: 0 success, 1 configuration / usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import gridio, harness
from .metrics import psnr_mean, relative_error, resample_volume, ssim_mean
from .phantoms import noise_level
from .radon import DynamicRadon, GeometrySpec, Sinogram, Volume
from .solvers import NumericalFailure


class _Parser(argparse.ArgumentParser):
    # unknown flags and bad values print usage and exit 1 (not argparse's 2)
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _noise_path(sino_path) -> Path:
    p = Path(sino_path)
    return p.with_name(p.stem + ".noise" + (p.suffix or ".breg"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dynct", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="generate a phantom volume")
    p.add_argument("--kind", choices=("intensity", "mass"), required=True)
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--res", type=int, default=None, help="default 41 / 83 per kind")
    p.add_argument("--out", required=True)
    p.add_argument("--images", default=None, help="also write PNG frames to this dir")

    p = sub.add_parser("sinogram", help="project a phantom and add noise")
    p.add_argument("--kind", choices=("intensity", "mass"), default=None)
    p.add_argument("--phantom", default=None, help="existing phantom container")
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--res", type=int, default=None)
    p.add_argument("--angles", type=int, default=7)
    p.add_argument("--offsets", type=int, default=None, help="default 40 / 160 per kind")
    p.add_argument("--mode", choices=("fixed", "rotating"), default="rotating")
    p.add_argument("--noise-std", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("reconstruct", help="run a solver on a saved sinogram")
    p.add_argument("--sino", required=True)
    p.add_argument("--solver", choices=harness.SOLVERS, required=True)
    p.add_argument("--res", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=10.0)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--nonneg", action="store_true")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--s", type=float, default=2.0)
    p.add_argument("--out", required=True)
    p.add_argument("--images", default=None)

    p = sub.add_parser("sweep", help="parameter sweep to CSV")
    p.add_argument("--config", required=True, help="ExperimentConfig JSON")
    p.add_argument("--out", default=None, help="CSV path (default from config)")

    p = sub.add_parser("table", help="reproduce a comparison table")
    p.add_argument("--which", choices=("intensity", "mass"), required=True)
    p.add_argument("--gammas", type=_float_list, default=None)
    p.add_argument("--betas", type=_float_list, default=None)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-inverse-crime", action="store_true")
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("report", help="metrics of a reconstruction vs truth")
    p.add_argument("--reco", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", default=None, help="JSON report path")
    return parser


def _cmd_phantom(args) -> int:
    res = args.res if args.res is not None else (41 if args.kind == "intensity" else 83)
    cfg = harness.default_config(args.kind)
    cfg.n_frames = args.frames
    cfg.generation_resolution = res
    vol = harness.make_phantom(cfg)
    gridio.save_grid(args.out, vol.values, meta={"kind": args.kind, "T": vol.T, "extent": vol.extent})
    if args.images:
        gridio.emit_images(vol, None, args.images)
    print(f"wrote {args.out} shape {vol.values.shape}")
    return 0


def _cmd_sinogram(args) -> int:
    if (args.kind is None) == (args.phantom is None):
        raise ValueError("give exactly one of --kind or --phantom")
    if args.phantom is not None:
        values, meta = gridio.load_grid(args.phantom)
        vol = Volume(values)
        kind = (meta or {}).get("kind", "custom")
    else:
        kind = args.kind
        res = args.res if args.res is not None else (41 if kind == "intensity" else 83)
        cfg = harness.default_config(kind)
        cfg.n_frames = args.frames
        cfg.generation_resolution = res
        vol = harness.make_phantom(cfg)
    offsets = args.offsets if args.offsets is not None else (160 if kind == "mass" else 40)
    geometry = GeometrySpec(
        n_offsets=offsets,
        n_angles_per_step=args.angles,
        n_time_steps=vol.n_time,
        mode=args.mode,
    )
    op = DynamicRadon(geometry, vol.n_pixels)
    clean = op.forward(vol.values)
    from .phantoms import draw_noise

    noise = draw_noise(clean.shape, args.noise_std, args.seed)
    meta = {
        "kind": kind,
        "n_offsets": offsets,
        "n_angles_per_step": args.angles,
        "n_time_steps": vol.n_time,
        "mode": args.mode,
        "noise_std": args.noise_std,
        "seed": args.seed,
        "delta_l2": noise_level(noise, geometry, 2.0, 2.0),
    }
    gridio.save_grid(args.out, clean + noise, meta=meta)
    if args.noise_std > 0:
        gridio.save_grid(_noise_path(args.out), noise)
    print(f"wrote {args.out} shape {clean.shape} delta_l2 {meta['delta_l2']:.6g}")
    return 0


def _load_sinogram(path) -> tuple[Sinogram, np.ndarray | None]:
    values, meta = gridio.load_grid(path)
    if meta is None:
        raise ValueError(f"{path}: missing .meta.json sidecar with the geometry")
    geometry = GeometrySpec(
        n_offsets=int(meta["n_offsets"]),
        n_angles_per_step=int(meta["n_angles_per_step"]),
        n_time_steps=int(meta["n_time_steps"]),
        mode=meta["mode"],
    )
    noise_path = _noise_path(path)
    noise = gridio.load_grid(noise_path)[0] if noise_path.exists() else None
    return Sinogram(values, geometry), noise


def _cmd_reconstruct(args) -> int:
    sino, noise = _load_sinogram(args.sino)
    sino.exponent_s = args.s
    op = DynamicRadon(sino.geometry, args.res, s=args.s)
    cfg = harness.ExperimentConfig(
        solver=args.solver,
        reconstruction_resolution=args.res,
        n_frames=sino.geometry.n_time_steps,
        n_angles_per_step=sino.geometry.n_angles_per_step,
        n_offsets=sino.geometry.n_offsets,
        mode=sino.geometry.mode,
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        tau=args.tau,
        rho=args.rho,
        max_iters=args.max_iters,
        nonneg=args.nonneg,
        p=args.p,
        q=args.q,
        r=args.r,
        s=args.s,
        allow_inverse_crime=True,  # truth is not regenerated here
    )
    problem = harness.Problem(
        cfg=cfg,
        truth=Volume(np.zeros((sino.geometry.n_time_steps, args.res, args.res))),
        sinogram=sino,
        noise=noise if noise is not None else np.zeros_like(sino.values),
        op=op,
    )
    reco, trace = harness.run_solver(problem, cfg)
    meta = {
        "solver": args.solver,
        "iterations": trace.n_iters if hasattr(trace, "n_iters") else 0,
        "stop_reason": harness._stop_reason(trace),
        "discrepancy": problem.data_discrepancy(reco),
    }
    gridio.save_grid(args.out, reco.values, meta=meta)
    if args.images:
        gridio.emit_images(reco, None, args.images)
    print(f"wrote {args.out} ({meta['stop_reason'] or 'direct'}, {meta['iterations']} iters)")
    return 0


def _cmd_sweep(args) -> int:
    cfg = harness.ExperimentConfig.from_json(args.config)
    rows = harness.run_sweep(cfg)
    out = args.out or str(Path(cfg.output_dir) / "sweep.csv")
    harness.write_sweep(rows, out)
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


def _cmd_table(args) -> int:
    cfg = harness.default_config(args.which)
    cfg.max_iters = args.max_iters
    cfg.seed = args.seed
    cfg.allow_inverse_crime = args.allow_inverse_crime
    rows = harness.run_table(cfg, gammas=args.gammas, betas=args.betas)
    harness.write_table(rows, args.out)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def _cmd_report(args) -> int:
    reco_vals, _ = gridio.load_grid(args.reco)
    truth_vals, _ = gridio.load_grid(args.truth)
    reco = Volume(reco_vals)
    truth = resample_volume(Volume(truth_vals), reco.n_pixels)
    report = {
        "rel_l2_error": relative_error(reco, truth, 2.0, 2.0),
        "mean_ssim": ssim_mean(reco, truth),
        "mean_psnr": psnr_mean(reco, truth),
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


_COMMANDS = {
    "phantom": _cmd_phantom,
    "sinogram": _cmd_sinogram,
    "reconstruct": _cmd_reconstruct,
    "sweep": _cmd_sweep,
    "table": _cmd_table,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
