#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Command-line entry point.

Each subcommand is one reproducible experiment: dataset generation, training,
fitting and completion, sampling, interpolation, the baseline comparison,
inverse rendering, and the equivariance and alignment checks.
"""

import argparse
import logging
import os
import sys
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from reni.baselines import dimension_plan, sg_eval, sg_fit, sh_eval, sh_fit, sh_fit_values
from reni.checkpoint import Checkpoint, export_loss_log, load_checkpoint, save_checkpoint
from reni.config import (
    FitConfig,
    MaterialConfig,
    RenderFitConfig,
    SGFitConfig,
    build_config,
    load_config_file,
    load_train_config,
    save_config_template,
)
from reni.dataset import augment_rotations, generate_dataset, load_dataset, rotate_map, write_dataset
from reni.equivariant import EquivarianceMode
from reni.fitting import PixelMask, align_rotation, fit, hemisphere_mask, mask_from_image, psnr
from reni.hdrio import EnvironmentMap, normalize_log, read_environment, write_pfm, write_pfm_array
from reni.render import RenderScene, invert_lighting, shade, sh_invert_lighting, write_preview
from reni.sphgeom import area_downsample, equirect_grid, random_rotation, x_rotation_matrix, y_rotation_matrix
from reni.utils.data_processing import export_to_csv, load_report, save_report
from reni.utils.logging_utils import setup_logging
from reni.utils.validation import NonFiniteLossError, ValidationError
from reni.vad import VADTrainer, interpolate_latents, sample_prior

LOGGER = logging.getLogger("reni.cli")

EVAL_COLUMNS = ["representation", "D", "image_id", "psnr"]
INVERT_COLUMNS = ["ks", "method", "psnr"]
ALIGN_COLUMNS = ["image_id", "psi", "error"]
WITNESS_ANGLE = 0.7


def _split_csv(value: str) -> List[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def parse_ks_range(value: str) -> List[float]:
    """Parse "a..b", "a..b:step" or a comma list of K_s values (default step 0.2)."""
    if ".." in value:
        bounds, _, step = value.partition(":")
        start, end = (float(v) for v in bounds.split(".."))
        step = float(step) if step else 0.2
        if step <= 0 or end < start:
            raise ValidationError(f"Invalid K_s range {value!r}")
        count = int(np.floor((end - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    return [float(v) for v in _split_csv(value)]


def _fit_config(path: Optional[str]) -> FitConfig:
    return build_config(FitConfig, load_config_file(path), path) if path else FitConfig()


def _write_env(env: EnvironmentMap, path: str) -> None:
    write_pfm(env, path)
    write_preview(env.to_image(), os.path.splitext(path)[0] + ".png")


# =============================================================================
# Commands

def cmd_gen_dataset(args: argparse.Namespace) -> None:
    dataset = generate_dataset(args.count, args.height, args.seed)
    write_dataset(args.out, dataset.maps, dataset.image_ids, dataset.sky_params)
    print(f"Wrote {len(dataset)} skies (H={args.height}) to {args.out}")


def cmd_train(args: argparse.Namespace) -> None:
    cfg = load_train_config(args.config)
    dataset = load_dataset(args.data)
    maps, ids = dataset.maps, dataset.image_ids
    if args.augment:
        maps, ids = augment_rotations(maps, ids, args.augment)
    checkpoint = VADTrainer(cfg).train(maps, ids)
    save_checkpoint(checkpoint, args.out)
    export_loss_log(checkpoint, args.log_csv or os.path.splitext(args.out)[0] + "_loss.csv")
    final = checkpoint.loss_log[-1]
    print(f"Trained {cfg.mode.value} N={cfg.n_latent}: final recon {final['recon']:.6f}, kld {final['kld']:.4f}")


def _load_mask(args: argparse.Namespace, env: EnvironmentMap) -> Optional[PixelMask]:
    if args.mask:
        return mask_from_image(args.mask, env.grid)
    if args.hemisphere:
        return hemisphere_mask(env.grid, upper=args.hemisphere == "upper")
    return None


def cmd_fit(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.ckpt)
    target = read_environment(args.image)
    result = fit(checkpoint, target, _load_mask(args, target), _fit_config(args.config),
                 image_id=os.path.basename(args.image))
    report = result.report()
    report.update({"image": args.image, "checkpoint": args.ckpt})
    save_report(report, args.report)
    if args.out:
        _write_env(checkpoint.field_model.decode_hdr(result.Z, target.grid), args.out)
    unmasked = "" if result.psnr_unmasked is None else f", unobserved {result.psnr_unmasked:.2f} dB"
    print(f"PSNR {result.psnr:.2f} dB (observed {result.psnr_masked:.2f} dB{unmasked})")


def cmd_sample(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.ckpt)
    rng = np.random.default_rng(args.seed)
    grid = equirect_grid(args.height)
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.count):
        Z = sample_prior(checkpoint.n_latent, rng)
        _write_env(checkpoint.field_model.decode_hdr(Z, grid), os.path.join(args.out, f"sample_{i:03d}.pfm"))
    print(f"Wrote {args.count} samples to {args.out}")


def _resolve_latent(checkpoint: Checkpoint, ref: str) -> np.ndarray:
    """A training image id, or a fit report JSON holding "Z"."""
    if ref.endswith(".json") and os.path.exists(ref):
        return np.asarray(load_report(ref)["Z"], dtype=np.float64)
    return checkpoint.latent_for(ref)


def cmd_interpolate(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.ckpt)
    grid = equirect_grid(args.height)
    codes = interpolate_latents(_resolve_latent(checkpoint, args.source), _resolve_latent(checkpoint, args.target),
                                args.steps)
    os.makedirs(args.out, exist_ok=True)
    for i, Z in enumerate(codes):
        _write_env(checkpoint.field_model.decode_hdr(Z, grid), os.path.join(args.out, f"interp_{i:03d}.pfm"))
    print(f"Wrote {len(codes)} interpolated maps to {args.out}")


def cmd_eval(args: argparse.Namespace) -> None:
    dataset = load_dataset(args.data)
    checkpoints = [load_checkpoint(path) for path in args.ckpt]
    if not checkpoints:
        raise ValidationError("eval needs at least one --ckpt for normalization stats")
    stats = checkpoints[0].stats
    floor = float(checkpoints[0].config.get("floor", 1e-8))
    fit_cfg = _fit_config(args.config)
    sg_cfg = build_config(SGFitConfig, load_config_file(args.sg_config), args.sg_config) if args.sg_config \
        else SGFitConfig()
    baselines = set(_split_csv(args.baselines))
    unknown = baselines - {"sh", "sg"}
    if unknown:
        raise ValidationError(f"Unknown baselines {sorted(unknown)}")

    rows = []
    for env, image_id in zip(dataset.maps, dataset.image_ids):
        truth = normalize_log(env.rgb, stats, floor)

        def score(rgb: np.ndarray) -> float:
            return psnr(normalize_log(np.maximum(rgb, 0.0), stats, floor), truth)

        for checkpoint in checkpoints:
            result = fit(checkpoint, env, cfg=fit_cfg, image_id=image_id)
            rows.append({"representation": f"reni-{checkpoint.field_model.mode.value.lower()}",
                         "D": 3 * checkpoint.n_latent, "image_id": image_id, "psnr": result.psnr})
        for dim in (int(d) for d in _split_csv(args.dims)):
            l_max, k = dimension_plan(dim)
            if "sh" in baselines:
                rows.append({"representation": "sh", "D": dim, "image_id": image_id,
                             "psnr": score(sh_eval(sh_fit(env, l_max), env.grid.directions))})
                # same order fitted directly to the scored normalized log values
                log_coeffs = sh_fit_values(env.grid, truth, l_max)
                rows.append({"representation": "sh-log", "D": dim, "image_id": image_id,
                             "psnr": psnr(sh_eval(log_coeffs, env.grid.directions), truth)})
            if "sg" in baselines:
                for log_domain, name in ((False, "sg"), (True, "sg-log")):
                    lobes = sg_fit(env, k, sg_cfg, log_domain=log_domain, floor=floor)
                    rows.append({"representation": name, "D": 6 * k, "image_id": image_id,
                                 "psnr": score(sg_eval(lobes, env.grid.directions))})
        LOGGER.info(f"Evaluated {image_id}")

    export_to_csv(rows, args.out, EVAL_COLUMNS)
    table = pd.DataFrame(rows, columns=EVAL_COLUMNS).replace(np.inf, np.nan)
    print(table.groupby(["representation", "D"])["psnr"].mean().to_string())


def cmd_invert(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.ckpt)
    cfg = build_config(RenderFitConfig, load_config_file(args.config), args.config) if args.config \
        else RenderFitConfig()
    source = read_environment(args.target)
    env = EnvironmentMap(equirect_grid(cfg.env_height), area_downsample(source.rgb, source.height, cfg.env_height))
    kd = tuple(float(v) for v in _split_csv(args.kd)) if args.kd else MaterialConfig().kd
    os.makedirs(args.out, exist_ok=True)

    rows = []
    for ks in parse_ks_range(args.ks):
        material = build_config(MaterialConfig, {"kd": kd, "ks": ks, "shininess": args.shininess}, "--kd/--ks")
        scene = RenderScene(material, args.size)
        target = shade(scene, env)
        tag = f"ks{ks:.2f}"
        write_pfm_array(target.rgb, os.path.join(args.out, f"{tag}_target.pfm"))
        write_preview(target.rgb, os.path.join(args.out, f"{tag}_target.png"))

        result = invert_lighting(checkpoint, target, scene, cfg)
        _, sh_result = sh_invert_lighting(target, scene, args.l_max, cfg.env_height)
        for method, outcome in (("reni", result), ("sh", sh_result)):
            write_pfm_array(outcome.rendered.rgb, os.path.join(args.out, f"{tag}_{method}_render.pfm"))
            write_preview(outcome.rendered.rgb, os.path.join(args.out, f"{tag}_{method}_render.png"))
            _write_env(outcome.env, os.path.join(args.out, f"{tag}_{method}_env.pfm"))
            rows.append({"ks": ks, "method": method, "psnr": outcome.psnr})
        print(f"K_s={ks:.2f}: RENI {result.psnr:.2f} dB, SH {sh_result.psnr:.2f} dB")

    export_to_csv(rows, os.path.join(args.out, "invert.csv"), INVERT_COLUMNS)


def equivariance_deviation(checkpoint: Checkpoint, trials: int, seed: int) -> Dict[str, float]:
    """
    Max |f(R d, R Z) - f(d, Z)| over random directions, latents and rotations.

    The rotation group matches the checkpoint's mode (y-axis rotations for SO2
    and NONE, all rotations for SO3); the witness uses a fixed x-axis rotation.
    """
    rng = np.random.default_rng(seed)
    field_model = checkpoint.field_model
    dirs = rng.normal(size=(trials, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    worst, witness = 0.0, 0.0
    R_x = x_rotation_matrix(WITNESS_ANGLE)
    for d in dirs:
        Z = rng.normal(size=(3, field_model.n_latent))
        if field_model.mode == EquivarianceMode.SO3:
            R = random_rotation(rng)
        else:
            R = y_rotation_matrix(rng.uniform(0.0, 2.0 * np.pi))
        base = field_model.decode(Z, d[None, :])
        worst = max(worst, float(np.max(np.abs(field_model.decode(R @ Z, (R @ d)[None, :]) - base))))
        witness = max(witness, float(np.max(np.abs(field_model.decode(R_x @ Z, (R_x @ d)[None, :]) - base))))
    return {"max_deviation": worst, "x_rotation_deviation": witness}


def cmd_check_equivariance(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.ckpt)
    result = equivariance_deviation(checkpoint, args.trials, args.seed)
    print(f"mode={checkpoint.field_model.mode.value} trials={args.trials} "
          f"max_deviation={result['max_deviation']:.3e} x_rotation_deviation={result['x_rotation_deviation']:.3e}")


def cmd_align(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.ckpt)
    dataset = load_dataset(args.pairs)
    fit_cfg = _fit_config(args.config)
    rows = []
    for env, image_id in zip(dataset.maps, dataset.image_ids):
        Z1 = fit(checkpoint, env, cfg=fit_cfg, image_id=image_id).Z
        Z2 = fit(checkpoint, rotate_map(env, np.pi), cfg=fit_cfg, image_id=f"{image_id}@pi").Z
        psi, error = align_rotation(Z1, Z2)
        rows.append({"image_id": image_id, "psi": psi, "error": error})
        print(f"{image_id}: psi*={psi:.4f} E={100.0 * error:.2f}%")
    if args.report:
        export_to_csv(rows, args.report, ALIGN_COLUMNS)


def cmd_config_template(args: argparse.Namespace) -> None:
    save_config_template(args.out)
    print(f"Wrote configuration template to {args.out}")


COMMANDS: Dict[str, Callable[[argparse.Namespace], None]] = {
    "gen-dataset": cmd_gen_dataset,
    "train": cmd_train,
    "fit": cmd_fit,
    "sample": cmd_sample,
    "interpolate": cmd_interpolate,
    "eval": cmd_eval,
    "invert": cmd_invert,
    "check-equivariance": cmd_check_equivariance,
    "align": cmd_align,
    "config-template": cmd_config_template,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reni", description="Rotation-equivariant neural illumination fields")
    parser.add_argument("--log-level", help="Override the root log level (e.g. DEBUG)")
    parser.add_argument("--log-config", help="Logging YAML file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="Write procedural HDR skies")
    p.add_argument("--out", required=True, help="Output dataset directory")
    p.add_argument("--count", type=int, default=16, help="Number of skies")
    p.add_argument("--seed", type=int, default=0, help="Random seed")
    p.add_argument("--height", type=int, default=64, help="Map height H (width 2H)")

    p = sub.add_parser("train", help="Train a field on a dataset")
    p.add_argument("--data", required=True, help="Dataset directory")
    p.add_argument("--config", required=True, help="TrainConfig TOML or JSON")
    p.add_argument("--out", required=True, help="Checkpoint path")
    p.add_argument("--log-csv", help="Loss log CSV (default: next to the checkpoint)")
    p.add_argument("--augment", type=float, help="Add rotations at this step in radians (e.g. 0.785)")

    p = sub.add_parser("fit", help="Fit a latent to a (partial) environment map")
    p.add_argument("--ckpt", required=True, help="Checkpoint path")
    p.add_argument("--image", required=True, help="Target PFM or HDR map")
    p.add_argument("--mask", help="Observed-pixel mask (PNG or PFM, > 0.5 observed)")
    p.add_argument("--hemisphere", choices=["upper", "lower"], help="Observe only one hemisphere")
    p.add_argument("--config", help="FitConfig TOML or JSON")
    p.add_argument("--report", required=True, help="JSON report path")
    p.add_argument("--out", help="Write the reconstruction as PFM")

    p = sub.add_parser("sample", help="Decode random latents from the prior")
    p.add_argument("--ckpt", required=True, help="Checkpoint path")
    p.add_argument("--count", type=int, default=8, help="Number of samples")
    p.add_argument("--seed", type=int, default=0, help="Random seed")
    p.add_argument("--height", type=int, default=64, help="Output map height")
    p.add_argument("--out", required=True, help="Output directory")

    p = sub.add_parser("interpolate", help="Decode a linear path between two latents")
    p.add_argument("--ckpt", required=True, help="Checkpoint path")
    p.add_argument("--from", dest="source", required=True, help="Training image id or fit report JSON")
    p.add_argument("--to", dest="target", required=True, help="Training image id or fit report JSON")
    p.add_argument("--steps", type=int, default=8, help="Number of maps including both ends")
    p.add_argument("--height", type=int, default=64, help="Output map height")
    p.add_argument("--out", default="interpolation", help="Output directory")

    p = sub.add_parser("eval", help="Compare fitted fields with SH and SG baselines")
    p.add_argument("--ckpt", action="append", default=[], help="Checkpoint path (repeatable)")
    p.add_argument("--data", required=True, help="Evaluation dataset directory")
    p.add_argument("--dims", default="27,108,147", help="Comma list of dimensionalities D")
    p.add_argument("--baselines", default="sh,sg", help="Comma list from sh,sg")
    p.add_argument("--config", help="FitConfig TOML or JSON")
    p.add_argument("--sg-config", help="SGFitConfig TOML or JSON")
    p.add_argument("--out", required=True, help="CSV output path")

    p = sub.add_parser("invert", help="Recover lighting from renders of a sphere")
    p.add_argument("--ckpt", required=True, help="Checkpoint path")
    p.add_argument("--target", required=True, help="Ground-truth environment map (PFM or HDR)")
    p.add_argument("--ks", default="0.0..1.0", help="K_s range a..b[:step] or comma list")
    p.add_argument("--kd", help="Diffuse albedo r,g,b")
    p.add_argument("--shininess", type=float, default=32.0, help="Blinn-Phong exponent")
    p.add_argument("--size", type=int, default=128, help="Render size S")
    p.add_argument("--l-max", type=int, default=2, help="SH order of the closed-form baseline")
    p.add_argument("--config", help="RenderFitConfig TOML or JSON")
    p.add_argument("--out", required=True, help="Output directory")

    p = sub.add_parser("check-equivariance", help="Measure the equivariance error of a checkpoint")
    p.add_argument("--ckpt", required=True, help="Checkpoint path")
    p.add_argument("--trials", type=int, default=10000, help="Random (d, Z, R) triples")
    p.add_argument("--seed", type=int, default=0, help="Random seed")

    p = sub.add_parser("align", help="Align latents of maps and their 180 degree rotations")
    p.add_argument("--ckpt", required=True, help="Checkpoint path")
    p.add_argument("--pairs", required=True, help="Dataset directory of unseen maps")
    p.add_argument("--config", help="FitConfig TOML or JSON")
    p.add_argument("--report", help="CSV output path")

    p = sub.add_parser("config-template", help="Write a TrainConfig template with every default")
    p.add_argument("--out", required=True, help="Output JSON path")
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments and run one command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_config, args.log_level)
    try:
        COMMANDS[args.command](args)
        return 0
    except (ValidationError, NonFiniteLossError, OSError) as e:
        LOGGER.error(f"{args.command} failed: {e}")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
