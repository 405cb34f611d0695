"""Command-line surface tying the pipeline together.

Subcommands: geometry, dataset, train, eval, sweep, reconstruct, render.
Each reads a JSON config (--config, merged over shipped defaults), honors
--seed, and writes outputs under --out. Exit codes: 0 success, 2 usage
error, 1 any other failure (one machine-parsable line on stderr).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as hio
from .config import load_config
from .evaluation import evaluate_model, report_to_csv, snr_sweep
from .geometry import build_beams, build_mesh, build_sensitivity, sensitivity_to_csv
from .imaging import export_image, vector_to_image
from .neural.specs import ARCHS
from .neural.training import build_model_input, train
from .phantom import PhantomParams, blobs_to_csv, build_dataset
from .pinv import pseudo_inverse
from .spectroscopy import TransitionLine


def _geometry_stack(cfg):
    mesh = build_mesh(cfg["geometry"])
    beams = build_beams(cfg["geometry"])
    matrix = build_sensitivity(beams, mesh)
    return mesh, beams, matrix


def _lines(cfg):
    return tuple(TransitionLine.from_config(c) for c in cfg["lines"])


def _parse_snr_range(text: str) -> list[float]:
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        n = int(round((hi - lo) / step)) + 1
        return [lo + i * step for i in range(n)]
    return [float(v) for v in text.split(",")]


def _zero_wall(rows, deterministic: bool):
    if deterministic:
        for r in rows:
            r["wall_time_s"] = 0.0
    return rows


def cmd_geometry(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mesh, beams, matrix = _geometry_stack(cfg)
    hio.save_sensitivity(matrix, out / "sensitivity.htc", cfg["geometry"])
    sensitivity_to_csv(matrix, out / "sensitivity.csv")
    print(f"mesh: {mesh.n_roi} RoI cells, {mesh.n_bg} background cells; "
          f"matrix {matrix.values.shape} [{matrix.units}]")
    return 0


def cmd_dataset(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mesh, _, matrix = _geometry_stack(cfg)
    params = PhantomParams.from_config(cfg["phantom"])
    ds_cfg = cfg["dataset"]
    dataset = build_dataset(
        args.seed, params, _lines(cfg), matrix, mesh,
        n_single=int(ds_cfg["n_single"]), n_double=int(ds_cfg["n_double"]),
        n_train=int(ds_cfg["n_train"]), n_test=int(ds_cfg["n_test"]),
        config=cfg)
    hio.save_dataset(dataset, out / "dataset.htc")
    blobs_to_csv(dataset, out / "blobs.csv")
    print(f"dataset: {len(dataset.samples)} samples "
          f"({len(dataset.train_idx)} train / {len(dataset.test_idx)} test)")
    return 0


def cmd_train(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = hio.load_dataset(args.dataset)
    _, _, matrix = _geometry_stack(cfg)
    pinv = pseudo_inverse(matrix.roi, rcond=cfg["pinv_rcond"])
    train_idx = dataset.train_idx
    a1 = np.stack([dataset.samples[i].a_nu1 for i in train_idx])
    a2 = np.stack([dataset.samples[i].a_nu2 for i in train_idx])
    targets = np.stack([dataset.samples[i].t_vec for i in train_idx])
    inputs = build_model_input(args.arch, a1, a2, pinv)
    tcfg = dict(cfg["training"])
    if args.epochs is not None:
        tcfg["epochs"] = args.epochs
    model, history = train(args.arch, inputs, targets, tcfg, seed=args.seed)
    hio.save_model(model, out / f"{args.arch}.htc")
    deterministic = bool(tcfg.get("deterministic", True))
    with open(out / f"{args.arch}_loss.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss_k,wall_time_s\n")
        for h in history:
            wall = 0.0 if deterministic else h["wall_s"]
            fh.write(f"{h['epoch']},{h['loss_k']:.12g},{wall:.6g}\n")
    print(f"trained {args.arch}: final loss {history[-1]['loss_k']:.3f} K")
    return 0


def _load_models(paths):
    models = {}
    for p in paths:
        m = hio.load_model(p)
        models[m.arch] = m
    return models


def cmd_eval(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = hio.load_dataset(args.dataset)
    mesh, _, matrix = _geometry_stack(cfg)
    pinv = pseudo_inverse(matrix.roi, rcond=cfg["pinv_rcond"])
    model = hio.load_model(args.model)
    samples = [dataset.samples[i] for i in dataset.test_idx]
    row = evaluate_model(model, samples, dataset.test_idx, args.snr,
                         dataset.master_seed, pinv, mesh)
    _zero_wall([row], bool(cfg["training"].get("deterministic", True)))
    report_to_csv([row], out / "report.csv")
    print(f"{row['model']} @ {row['snr_db']} dB: E_T={row['E_T']:.4f} "
          f"D_peak={row['D_peak']:.4f} E_peak={row['E_peak']:.4f}")
    return 0


def cmd_sweep(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = hio.load_dataset(args.dataset)
    mesh, _, matrix = _geometry_stack(cfg)
    pinv = pseudo_inverse(matrix.roi, rcond=cfg["pinv_rcond"])
    models = _load_models(args.models)
    snrs = _parse_snr_range(args.snr)
    samples = [dataset.samples[i] for i in dataset.test_idx]
    rows = snr_sweep(models, samples, dataset.test_idx, snrs,
                     dataset.master_seed, pinv, mesh)
    _zero_wall(rows, bool(cfg["training"].get("deterministic", True)))
    report_to_csv(rows, out / "report.csv")
    print(f"sweep: {len(rows)} rows -> {out / 'report.csv'}")
    return 0


def cmd_reconstruct(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mesh, _, matrix = _geometry_stack(cfg)
    pinv = pseudo_inverse(matrix.roi, rcond=cfg["pinv_rcond"])
    model = hio.load_model(args.model)
    rows = np.loadtxt(args.input, delimiter=",", ndmin=2)
    if rows.shape[1] != 64:
        raise ValueError(f"measurement CSV must have 64 values per line, "
                         f"got {rows.shape[1]}")
    a1, a2 = rows[:, :32], rows[:, 32:]
    preds = model.predict(build_model_input(model.arch, a1, a2, pinv))
    for k, vec in enumerate(preds):
        img = vector_to_image(vec, mesh)
        export_image(img, out / f"recon_{k:04d}.pgm", fmt="pgm")
        export_image(img, out / f"recon_{k:04d}.csv", fmt="csv")
    print(f"reconstructed {len(preds)} frame(s) -> {out}")
    return 0


def cmd_render(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = hio.load_dataset(args.dataset)
    mesh, _, _ = _geometry_stack(cfg)
    sample = dataset.samples[args.index]
    img = vector_to_image(sample.t_vec, mesh)
    export_image(img, out / f"truth_{args.index:05d}.pgm", fmt="pgm")
    export_image(img, out / f"truth_{args.index:05d}.csv", fmt="csv")
    print(f"rendered sample {args.index} -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hiertomo",
                                     description="Hierarchical temperature tomography toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".", help="output directory")

    common(sub.add_parser("geometry", help="build mesh and sensitivity matrix"))
    common(sub.add_parser("dataset", help="generate a phantom dataset"))

    p = sub.add_parser("train", help="train a reconstruction network")
    common(p)
    p.add_argument("--arch", choices=ARCHS, required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--epochs", type=int, default=None,
                   help="override the configured epoch count")

    p = sub.add_parser("eval", help="evaluate a model on the test split")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--snr", type=float, default=float("inf"))

    p = sub.add_parser("sweep", help="metric sweep over noise levels")
    common(p)
    p.add_argument("--models", nargs="+", required=True, help="checkpoint paths")
    p.add_argument("--dataset", required=True)
    p.add_argument("--snr", default="20:50:5", help="lo:hi:step or comma list, dB")

    p = sub.add_parser("reconstruct", help="reconstruct images from measurement CSV")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True,
                   help="CSV with 64 values per line (32 per transition)")

    p = sub.add_parser("render", help="render a dataset sample's ground truth")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--index", type=int, required=True)
    return parser


COMMANDS = {
    "geometry": cmd_geometry,
    "dataset": cmd_dataset,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "reconstruct": cmd_reconstruct,
    "render": cmd_render,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except Exception as exc:  # one machine-parsable line, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
