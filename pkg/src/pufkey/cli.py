"""Command-line surface: generate and select transforms, fit models, design
quantizers, sweep QoS curves, simulate key agreement, and report rates.

Every flag can also come from the INI-style config file (key = value,
one section per stage); explicit flags win. Report commands write a
matplotlib figure next to each CSV unless --no-figure is given.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np

from . import data_io, fcs, pipeline, transforms
from .data_io import DataFormatError
from .models import (CoefficientModel, DEFAULT_RANGE_MARGIN, OutOfModelError,
                     load_model_catalog, save_model_catalog)
from .pipeline import InfeasiblePlanError
from .quantizer import design_boundaries, joint_bit_error_and_memoryless_check
from .transforms import SearchSpaceError

EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_STATE = 4
EXIT_INFEASIBLE = 5


class ConfigError(ValueError):
    pass


def _read_config(path: str | None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    if path is not None:
        if not Path(path).exists():
            raise ConfigError(f"config file not found: {path}")
        cfg.read(path)
    return cfg


def _opt(flag, cfg, section: str, key: str, default=None, cast=str):
    """Flag value if given, else config value, else default."""
    if flag is not None:
        return flag
    if cfg.has_option(section, key):
        raw = cfg.get(section, key)
        try:
            return cast(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r}: expected {cast.__name__}")
    return default


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def _add_population_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help="measurement text file")
    p.add_argument("--rows", type=int, help="dataset grid rows (default: square)")
    p.add_argument("--cols", type=int, help="dataset grid cols (default: square)")
    p.add_argument("--crop", type=int, help="keep the top-left crop x crop sub-grid")
    p.add_argument("--synthetic", action="store_true",
                   help="generate a synthetic population instead of loading one")
    p.add_argument("--devices", type=int, help="synthetic: number of devices")
    p.add_argument("--side", type=int, help="synthetic: array side length")
    p.add_argument("--correlation-length", type=float, help="synthetic: spatial correlation length")
    p.add_argument("--mean-freq", type=float, help="synthetic: mean frequency")
    p.add_argument("--device-sigma", type=float, help="synthetic: device-to-device std")
    p.add_argument("--noise-sigma", type=float, help="synthetic: measurement noise std")
    p.add_argument("--repeats", type=int, help="synthetic: measurements per device")
    p.add_argument("--synthetic-seed", type=int, help="synthetic: generator seed (required)")


def _load_population(args, cfg) -> data_io.DevicePopulation:
    synthetic = args.synthetic or cfg.getboolean("synthetic", "enabled", fallback=False)
    dataset = _opt(args.dataset, cfg, "data", "dataset")
    if synthetic:
        seed = _opt(args.synthetic_seed, cfg, "synthetic", "seed", cast=int)
        if seed is None:
            raise ConfigError("synthetic generation requires --synthetic-seed")
        pop = data_io.generate_synthetic(
            num_devices=_opt(args.devices, cfg, "synthetic", "devices", 64, int),
            shape=_opt(args.side, cfg, "synthetic", "side", 16, int),
            correlation_length=_opt(args.correlation_length, cfg, "synthetic",
                                    "correlation_length", 8.0, float),
            mean_freq=_opt(args.mean_freq, cfg, "synthetic", "mean_freq", 100.0, float),
            device_sigma=_opt(args.device_sigma, cfg, "synthetic", "device_sigma", 1.0, float),
            noise_sigma=_opt(args.noise_sigma, cfg, "synthetic", "noise_sigma", 0.05, float),
            repeats=_opt(args.repeats, cfg, "synthetic", "repeats", 5, int),
            seed=seed,
        )
    elif dataset is not None:
        if not Path(dataset).exists():
            raise FileNotFoundError(f"dataset not found: {dataset}")
        pop = data_io.load_dataset(
            dataset,
            rows=_opt(args.rows, cfg, "data", "rows", cast=int),
            cols=_opt(args.cols, cfg, "data", "cols", cast=int),
        )
    else:
        raise ConfigError("provide --dataset or --synthetic")
    crop = _opt(args.crop, cfg, "data", "crop", cast=int)
    if crop is not None:
        pop = data_io.crop_upper(pop, crop)
    return pop


def _load_single_transform(path) -> transforms.TransformMatrix:
    if not Path(path).exists():
        raise FileNotFoundError(f"transform file not found: {path} (run gen-transforms / select-transform first)")
    return transforms.load_transform_family(path)[0]


def _require(path, what: str, hint: str):
    if path is None:
        raise ConfigError(f"missing {what} (flag or config)")
    if not Path(path).exists():
        raise FileNotFoundError(f"{what} not found: {path} ({hint})")
    return path


# ---------------------------------------------------------------- commands


def _cmd_gen_transforms(args, cfg) -> int:
    dim = _opt(args.dim, cfg, "transforms", "dim", 4, int)
    pairing = _opt(args.pairing, cfg, "transforms", "pairing", "diagonal")
    out = _opt(args.out, cfg, "transforms", "family", "transforms.txt")
    limit = _opt(args.limit, cfg, "transforms", "limit", cast=int)
    seeds = transforms.enumerate_seed_matrices(dim)
    n = len(seeds)
    print(f"{n} orthogonal {dim}x{dim} seed matrices")
    print(f"constructible pair family ({dim * dim}x{dim * dim}): {n * n} transforms")
    if pairing == "seeds":
        family = seeds
    elif pairing == "diagonal":
        family = [transforms.build_large_transform(s, s) for s in seeds]
    elif pairing == "all":
        family = [transforms.build_large_transform(a, b) for a in seeds for b in seeds]
    else:
        raise ConfigError(f"unknown pairing {pairing!r} (seeds | diagonal | all)")
    if limit is not None:
        family = family[:limit]
    transforms.save_transform_family(out, family)
    print(f"wrote {len(family)} transforms ({pairing}) to {out}")
    return 0


def _cmd_select_transform(args, cfg) -> int:
    family_path = _require(_opt(args.family, cfg, "transforms", "family"),
                           "transform family", "run gen-transforms first")
    out = _opt(args.out, cfg, "transforms", "selected", "selected.txt")
    m = _opt(args.m, cfg, "design", "m", 3, int)
    margin = _opt(args.margin, cfg, "models", "margin", DEFAULT_RANGE_MARGIN, float)
    family = transforms.load_transform_family(family_path)
    population = _load_population(args, cfg)
    scores = transforms.rank_transforms(family, population, m, margin=margin)
    best = int(np.argmin(scores))
    transforms.save_transform_family(out, [family[best]])
    if args.scores:
        lines = ["index,max_bit_error"]
        lines += [f"{i},{s!r}" for i, s in enumerate(scores)]
        Path(args.scores).write_text("\n".join(lines) + "\n")
    print(f"selected transform {best} of {len(family)} "
          f"(max bit-error {scores[best]:.3e}) -> {out}")
    return 0


def _cmd_fit_models(args, cfg) -> int:
    transform = _load_single_transform(
        _require(_opt(args.transform, cfg, "models", "transform"),
                 "transform file", "run select-transform first"))
    margin = _opt(args.margin, cfg, "models", "margin", DEFAULT_RANGE_MARGIN, float)
    out = _opt(args.out, cfg, "models", "catalog", "models.txt")
    population = _load_population(args, cfg)
    models = pipeline.fit_models(population, transform, margin=margin)
    save_model_catalog(out, models)
    print(f"fitted {len(models)} coefficient models -> {out}")
    return 0


def _cmd_design(args, cfg) -> int:
    models = load_model_catalog(
        _require(_opt(args.models, cfg, "models", "catalog"),
                 "model catalog", "run fit-models first"))
    m_candidates = _opt(args.m_candidates, cfg, "design", "m_candidates",
                        "1 2 3 4 5", str)
    plan = pipeline.threshold_design(
        models,
        m_candidates=_int_list(m_candidates),
        beta_min=_opt(args.beta_min, cfg, "design", "beta_min", 0.0, float),
        pc_min=_opt(args.pc_min, cfg, "design", "pc_min", 0.0, float),
        grid_points=_opt(args.grid, cfg, "design", "grid_points",
                         pipeline.DEFAULT_GRID_POINTS, int),
    )
    out = _opt(args.out, cfg, "design", "plan", "plan.csv")
    pipeline.save_plan(out, plan)
    print(f"plan: {len(plan.used)} used coefficients, {plan.total_bits} bits, "
          f"global delta {plan.global_delta!r} -> {out}")
    return 0


def _cmd_qos_curve(args, cfg) -> int:
    models = load_model_catalog(
        _require(_opt(args.models, cfg, "models", "catalog"),
                 "model catalog", "run fit-models first"))
    coeff_text = _opt(args.coefficients, cfg, "report", "coefficients")
    indices = _int_list(coeff_text) if coeff_text else sorted(models)[:2]
    m_text = _opt(args.m, cfg, "report", "m", "3 5 7", str)
    grid = _opt(args.grid, cfg, "design", "grid_points",
                pipeline.DEFAULT_GRID_POINTS, int)
    out = _opt(args.out, cfg, "report", "curve", "qos_curve.csv")
    curves = {}
    for j in indices:
        if j not in models:
            raise ConfigError(f"no model for coefficient {j}")
        for m in _int_list(m_text):
            curves[(j, m)] = pipeline.qos_curve(models[j], m, grid_points=grid)
    pipeline.save_qos_csv(out, curves)
    print(f"wrote {sum(len(c) for c in curves.values())} rows -> {out}")
    if not args.no_figure:
        from . import report
        figure = args.figure or str(Path(out).with_suffix(".png"))
        report.save_qos_figure(figure, curves)
        print(f"figure -> {figure}")
    return 0


def _cmd_simulate(args, cfg) -> int:
    transform = _load_single_transform(
        _require(_opt(args.transform, cfg, "models", "transform"),
                 "transform file", "run select-transform first"))
    models = load_model_catalog(
        _require(_opt(args.models, cfg, "models", "catalog"),
                 "model catalog", "run fit-models first"))
    plan = pipeline.load_plan(
        _require(_opt(args.plan, cfg, "design", "plan"),
                 "plan file", "run design first"))
    code = fcs.make_code(_opt(args.code, cfg, "simulate", "code", "hamming74"))
    seed = _opt(args.seed, cfg, "simulate", "seed", cast=int)
    if seed is None:
        raise ConfigError("simulate requires --seed")
    population = _load_population(args, cfg)
    records, summary = pipeline.simulate_population(
        population, transform, models, plan, code, base_seed=seed)
    out = _opt(args.out, cfg, "simulate", "log", "trials.csv")
    pipeline.save_trial_log(out, records)
    print(f"{summary.num_trials} trials: {summary.rejected} rejected "
          f"(rate {summary.rejection_rate:.4f}), {summary.key_errors} key errors "
          f"(rate {summary.key_error_rate:.4f}), "
          f"{summary.decode_failures} detected decode failures")
    print(f"trial log -> {out}")
    if not args.no_figure:
        from . import report
        figure = args.figure or str(Path(out).with_suffix(".png"))
        report.save_simulation_figure(figure, summary)
        print(f"figure -> {figure}")
    return 0


def _cmd_memoryless_check(args, cfg) -> int:
    if args.models_path:
        models = load_model_catalog(_require(args.models_path, "model catalog",
                                             "run fit-models first"))
        j = args.coefficient if args.coefficient is not None else sorted(models)[0]
        if j not in models:
            raise ConfigError(f"no model for coefficient {j}")
        model = models[j]
        sigma = args.sigma_noise if args.sigma_noise is not None else model.sigma_noise
        spec = design_boundaries(model, 2)
    else:
        b0 = _opt(args.b0, cfg, "quantizer", "b0", -3.0, float)
        bmax = _opt(args.bmax, cfg, "quantizer", "bmax", 3.0, float)
        sigma = _opt(args.sigma_noise, cfg, "quantizer", "sigma_noise", 0.2, float)
        spec = design_boundaries(
            CoefficientModel(index=0, mu_orig=0.0, sigma_orig=1.0,
                             lower_raw=b0, upper_raw=bmax), 2)
    if sigma is None or sigma <= 0:
        raise ConfigError("memoryless-check needs a positive --sigma-noise")
    delta = _opt(args.delta, cfg, "quantizer", "delta", 0.1, float)
    report_ = joint_bit_error_and_memoryless_check(spec, sigma, delta)
    lines = ["interval,p_bit1,p_bit2,p_joint,product,dependence"]
    for iv in report_.intervals:
        lines.append(f"{iv.interval},{iv.p_bit1!r},{iv.p_bit2!r},{iv.p_joint!r},"
                     f"{iv.product!r},{iv.dependence!r}")
        print(f"interval {iv.interval}: P[b1]={iv.p_bit1:.6e} P[b2]={iv.p_bit2:.6e} "
              f"P[joint]={iv.p_joint:.6e} |joint - product|={iv.dependence:.3e}")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
        print(f"report -> {args.out}")
    verdict = "NOT memoryless (bit errors dependent)" if report_.dependent \
        else "no dependence beyond tolerance"
    print(f"max dependence {report_.max_dependence:.3e}: {verdict}")
    return 0


def _cmd_rate_region(args, cfg) -> int:
    p = _opt(args.p, cfg, "report", "crossover", cast=float)
    if p is None:
        raise ConfigError("rate-region requires --p")
    region = fcs.rate_region(p)
    opt = region.optimal_point
    print(f"p = {p}: optimal point R_s = {opt.secret_key_rate!r}, "
          f"R_l = {opt.privacy_leakage_rate!r}")
    if args.out:
        rs = np.linspace(0.0, region.max_secret_key_rate, args.points)
        lines = ["secret_key_rate,min_privacy_leakage_rate"]
        lines += [f"{r!r},{region.boundary_leakage(r)!r}" for r in rs]
        Path(args.out).write_text("\n".join(lines) + "\n")
        print(f"boundary -> {args.out}")
        if not args.no_figure:
            from . import report
            figure = args.figure or str(Path(args.out).with_suffix(".png"))
            report.save_rate_region_figure(figure, region)
            print(f"figure -> {figure}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pufkey",
        description="Transform-coding secret-key agreement for RO PUFs with QoS guarantees",
    )
    parser.add_argument("--config", help="INI config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-transforms", help="enumerate seeds and build the transform family")
    p.add_argument("--dim", type=int, help="seed matrix size (default 4)")
    p.add_argument("--pairing", choices=["seeds", "diagonal", "all"],
                   help="family construction (default diagonal: seed (x) seed)")
    p.add_argument("--limit", type=int, help="emit at most this many transforms")
    p.add_argument("--out", help="family output file")
    p.set_defaults(func=_cmd_gen_transforms)

    p = sub.add_parser("select-transform", help="rank a family by worst-coefficient error")
    p.add_argument("--family", help="candidate family file")
    p.add_argument("--m", type=int, help="bits per coefficient used for scoring")
    p.add_argument("--margin", type=float, help="truncation-range margin factor")
    p.add_argument("--scores", help="optional CSV of per-candidate scores")
    p.add_argument("--out", help="selected transform output file")
    _add_population_args(p)
    p.set_defaults(func=_cmd_select_transform)

    p = sub.add_parser("fit-models", help="fit truncated-Gaussian coefficient models")
    p.add_argument("--transform", help="transform file (first record is used)")
    p.add_argument("--margin", type=float, help="truncation-range margin factor")
    p.add_argument("--out", help="model catalog output file")
    _add_population_args(p)
    p.set_defaults(func=_cmd_fit_models)

    p = sub.add_parser("design", help="threshold-based bit allocation and QoS windows")
    p.add_argument("--models", help="model catalog file")
    p.add_argument("--m-candidates", help="candidate bit counts, e.g. '1 2 3 4 5'")
    p.add_argument("--beta-min", type=float, help="minimum usable percentage")
    p.add_argument("--pc-min", type=float, help="minimum correctness probability")
    p.add_argument("--grid", type=int, help="delta grid resolution")
    p.add_argument("--out", help="plan output CSV")
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("qos-curve", help="sweep delta and emit curve CSV (+ figure)")
    p.add_argument("--models", help="model catalog file")
    p.add_argument("--coefficients", help="coefficient indices, e.g. '2 3'")
    p.add_argument("--m", help="bit counts to sweep, e.g. '3 5 7'")
    p.add_argument("--grid", type=int, help="delta grid resolution")
    p.add_argument("--out", help="curve output CSV")
    p.add_argument("--figure", help="figure path (default: CSV path with .png)")
    p.add_argument("--no-figure", action="store_true", help="skip figure rendering")
    p.set_defaults(func=_cmd_qos_curve)

    p = sub.add_parser("simulate", help="run key-agreement trials over a population")
    p.add_argument("--transform", help="transform file")
    p.add_argument("--models", help="model catalog file")
    p.add_argument("--plan", help="plan CSV from design")
    p.add_argument("--code", help="ECC: repetition:<n> or hamming74")
    p.add_argument("--seed", type=int, help="base trial seed (required)")
    p.add_argument("--out", help="trial log CSV")
    p.add_argument("--figure", help="figure path (default: log path with .png)")
    p.add_argument("--no-figure", action="store_true", help="skip figure rendering")
    _add_population_args(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("memoryless-check", help="two-bit error dependence demonstration")
    p.add_argument("--models", dest="models_path", help="model catalog file (optional)")
    p.add_argument("--coefficient", type=int, help="coefficient index from the catalog")
    p.add_argument("--b0", type=float, help="lower equalized truncation bound")
    p.add_argument("--bmax", type=float, help="upper equalized truncation bound")
    p.add_argument("--sigma-noise", type=float, help="equalized noise std")
    p.add_argument("--delta", type=float, help="QoS parameter")
    p.add_argument("--out", help="per-interval report CSV")
    p.set_defaults(func=_cmd_memoryless_check)

    p = sub.add_parser("rate-region", help="achievable rate pairs for a BSC crossover")
    p.add_argument("--p", type=float, help="crossover probability")
    p.add_argument("--points", type=int, default=101, help="boundary samples for the CSV")
    p.add_argument("--out", help="boundary CSV path")
    p.add_argument("--figure", help="figure path (default: CSV path with .png)")
    p.add_argument("--no-figure", action="store_true", help="skip figure rendering")
    p.set_defaults(func=_cmd_rate_region)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _read_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, OutOfModelError) as exc:
        print(f"error [data]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error [state]: {exc}", file=sys.stderr)
        return EXIT_STATE
    except InfeasiblePlanError as exc:
        print(f"error [infeasible]: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SearchSpaceError, ValueError) as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
