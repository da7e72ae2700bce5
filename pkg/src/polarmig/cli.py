"""Command line driver.

Subcommands mirror the pipeline stages: simulate, preprocess, image, recover,
stochastic, report, glyphs.  Exit codes: 0 success, 2 validation error,
3 numerical failure.  Set POLARMIG_THREADS to override the worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ExperimentConfig, parse_config, placement_report, preset, regime_report
from .dataset import ArrayDataSet, ImageField
from .errors import ConfigError, NumericalError, PolarmigError
from .forward import coherency_synthesize, response_synthesize
from .glyphs import emit_glyphs
from .migrate import kirchhoff_band, phase_correct, plane_grid, recover_alpha_field
from .pipeline import _write_norms_csv, _write_tensor_table, simulate_stage
from .preprocess import preprocess


def _config_from_args(args) -> ExperimentConfig:
    if args.preset:
        cfg = parse_config(_apply_overrides(preset(args.preset), args))
    elif args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {args.config}: {exc}") from exc
        cfg = parse_config(_apply_overrides(raw, args))
    else:
        raise ConfigError("either --config or --preset is required")
    return cfg


def _apply_overrides(raw: dict, args) -> dict:
    pipe = raw.setdefault("pipeline", {})
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    if getattr(args, "gamma", None) is not None:
        pipe["gamma"] = args.gamma
    if getattr(args, "delta_rel", None) is not None:
        pipe["delta_rel"] = args.delta_rel
    if getattr(args, "recover_mode", None) is not None:
        pipe["recover_mode"] = args.recover_mode
    if getattr(args, "second_born", False):
        pipe["second_born"] = True
    return raw


def _add_config_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment configuration JSON")
    p.add_argument("--preset", help="built-in preset name instead of --config")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--gamma", type=int, choices=(1, 3), help="override the cone factor")
    p.add_argument("--delta-rel", dest="delta_rel", type=float,
                   help="override the phase-correction floor")
    p.add_argument("--recover-mode", dest="recover_mode",
                   choices=("exact", "fraunhofer"), help="override the recovery mode")
    p.add_argument("--second-born", dest="second_born", action="store_true",
                   help="include double-scattering terms in synthesis")


def cmd_simulate(args) -> None:
    cfg = _config_from_args(args)
    os.makedirs(args.out, exist_ok=True)
    ds = coherency_synthesize(cfg.scene, cfg.band, cfg.second_born)
    ds.write(os.path.join(args.out, "coherency.pmds"))
    if args.reference:
        response_synthesize(cfg.scene, cfg.band, cfg.second_born).write(
            os.path.join(args.out, "response.pmds")
        )


def cmd_stochastic(args) -> None:
    cfg = _config_from_args(args)
    if cfg.stochastic is None:
        raise ConfigError("configuration has no stochastic section")
    os.makedirs(args.out, exist_ok=True)
    simulate_stage(cfg).write(os.path.join(args.out, "coherency.pmds"))


def cmd_preprocess(args) -> None:
    ds = ArrayDataSet.read(args.dataset)
    os.makedirs(args.out, exist_ok=True)
    pre, report = preprocess(ds)
    pre.write(os.path.join(args.out, "preprocessed.pmds"))
    with open(os.path.join(args.out, "preprocess.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.summary() + "\n")
    print(report.summary())


def cmd_image(args) -> None:
    cfg = _config_from_args(args)
    ds = ArrayDataSet.read(args.dataset)
    if ds.kind == "coherency2x2":
        raise ConfigError("imaging consumes 3x3 data; run preprocess first")
    os.makedirs(args.out, exist_ok=True)
    for si, spec in enumerate(cfg.slices):
        pts, shape, _ = plane_grid(cfg.scene.window, spec.normal_axis, spec.offset, spec.step)
        values = kirchhoff_band(ds, pts)
        field = ImageField(
            points=pts,
            values=values,
            shape=shape,
            meta={
                "normal_axis": spec.normal_axis,
                "offset": spec.offset,
                "step": spec.step,
                "content": "kirchhoff_image",
            },
        )
        field.write(os.path.join(args.out, f"slice{si:02d}_image.pmds"))
        _write_norms_csv(field, os.path.join(args.out, f"slice{si:02d}_image_norms.csv"))


def cmd_recover(args) -> None:
    cfg = _config_from_args(args)
    ds = ArrayDataSet.read(args.dataset)
    if ds.kind == "coherency2x2":
        raise ConfigError("recovery consumes 3x3 data; run preprocess first")
    os.makedirs(args.out, exist_ok=True)
    for si, spec in enumerate(cfg.slices):
        pts, shape, _ = plane_grid(cfg.scene.window, spec.normal_axis, spec.offset, spec.step)
        alpha = phase_correct(
            recover_alpha_field(ds, pts, mode=cfg.recover_mode), cfg.delta_rel
        )
        field = ImageField(
            points=pts,
            values=alpha,
            shape=shape,
            meta={
                "normal_axis": spec.normal_axis,
                "offset": spec.offset,
                "step": spec.step,
                "content": "recovered_alpha_phase_corrected",
            },
        )
        field.write(os.path.join(args.out, f"slice{si:02d}_alpha.pmds"))
        _write_norms_csv(field, os.path.join(args.out, f"slice{si:02d}_norms.csv"))
    if cfg.scene.scatterers:
        pts = cfg.scene.scatterer_positions()
        alpha = phase_correct(
            recover_alpha_field(ds, pts, mode=cfg.recover_mode), cfg.delta_rel
        )
        rows = [
            (f"recovered_{i}", sc.position, rec)
            for i, (sc, rec) in enumerate(zip(cfg.scene.scatterers, alpha))
        ]
        _write_tensor_table(rows, os.path.join(args.out, "tensors.csv"))


def cmd_report(args) -> None:
    cfg = _config_from_args(args)
    text = regime_report(cfg).text() + "\n" + placement_report(cfg) + "\n"
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text, end="")


def cmd_glyphs(args) -> None:
    field = ImageField.read(args.field)
    os.makedirs(args.out, exist_ok=True)
    emit_glyphs(
        field,
        args.threshold,
        os.path.join(args.out, "glyphs.svg"),
        os.path.join(args.out, "glyphs.csv"),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarmig",
        description="Polarization-data Kirchhoff migration toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize deterministic coherency data")
    _add_config_opts(p)
    p.add_argument("--out", required=True)
    p.add_argument("--reference", action="store_true", help="also write the 3x3 response")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("stochastic", help="synthesize random-source coherency data")
    _add_config_opts(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_stochastic)

    p = sub.add_parser("preprocess", help="map coherency data to response estimates")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("image", help="Kirchhoff images on configured slices")
    p.add_argument("dataset")
    _add_config_opts(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_image)

    p = sub.add_parser("recover", help="projected tensor fields and tables")
    p.add_argument("dataset")
    _add_config_opts(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_recover)

    p = sub.add_parser("report", help="regime and source-placement diagnostics")
    _add_config_opts(p)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("glyphs", help="tensor ellipse glyphs from a 2x2 field")
    p.add_argument("field")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(fn=cmd_glyphs)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, PolarmigError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
