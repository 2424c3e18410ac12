"""Command-line entry point.

Subcommands:

    train        run the optimization loop described by a config file
    evaluate     score a checkpoint against the built-in reference solution
    study        run a stability or loss-vs-error study
    sample-dump  write a collocation batch to CSV for inspection

Heavy numerical imports happen inside the handlers so that thread-count
environment variables set from ``--threads`` take effect before the
numerics libraries initialize their thread pools.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")

SCHEMA_VERSION = 1


class UsageError(Exception):
    """A problem with the invocation or config file (exit code 2)."""


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    if n < 1:
        raise UsageError("--threads must be a positive integer")
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config file {p} must contain a JSON object")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise UsageError(
            f"config file {p}: schema_version must be {SCHEMA_VERSION}")
    allowed = {"schema_version", "run", "study"}
    unknown = set(cfg) - allowed
    if unknown:
        raise UsageError(f"config file {p}: unknown top-level keys "
                         f"{sorted(unknown)}; allowed: {sorted(allowed)}")
    return cfg


def _run_config(cfg: dict, args):
    from .training import RunConfig

    run = dict(cfg.get("run") or {})
    if args.seed is not None:
        run["net_seed"] = args.seed
        run["sample_seed"] = args.seed
    if args.deterministic:
        run["deterministic"] = True
    try:
        return RunConfig.from_dict(run)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid run config: {exc}") from exc


def _write_resolved(out: Path, config, cfg: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    resolved = {"schema_version": SCHEMA_VERSION, "run": config.to_dict()}
    if "study" in cfg:
        resolved["study"] = cfg["study"]
    (out / "config.resolved.json").write_text(
        json.dumps(resolved, indent=2) + "\n")


def _cmd_train(args) -> int:
    cfg = _load_config(args.config)
    config = _run_config(cfg, args)
    out = Path(args.out)
    _write_resolved(out, config, cfg)

    from .training import train
    result = train(config, out_dir=out)
    print(f"trained {config.iters} steps; best loss {result.best_loss:.6e}; "
          f"metrics in {out / 'metrics.csv'}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    config = _run_config(cfg, args)
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise UsageError(f"checkpoint file not found: {ckpt}")

    from .network import load_checkpoint
    params, _ = load_checkpoint(ckpt)
    if list(params.layer_sizes) != list(config.layer_sizes):
        raise UsageError(
            f"checkpoint layer sizes {list(params.layer_sizes)} do not match "
            f"config layer sizes {list(config.layer_sizes)}")

    from .verification.mms import mms_default
    from .verification.norms import energy_check, error_norms
    phys = config.physics()
    rep = error_norms(params, mms_default(phys), phys,
                      resolution=config.error_resolution,
                      time_slices=config.error_time_slices)
    en = energy_check(params, phys, resolution=config.error_resolution,
                      time_slices=config.error_time_slices)
    report = {"rel_sup_u": rep.rel_sup_u, "rel_sup_B": rep.rel_sup_B,
              "sup_u": rep.sup_u, "sup_B": rep.sup_B,
              "l4_u": rep.l4_u, "l4_B": rep.l4_B,
              "sup_u2": en.sup_u2, "sup_B2": en.sup_B2,
              "int_grad_u2": en.int_grad_u2, "int_grad_B2": en.int_grad_B2}
    text = json.dumps(report, indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "evaluation.json").write_text(text + "\n")
    print(text)
    return 0


def _cmd_study(args) -> int:
    cfg = _load_config(args.config)
    study_cfg = cfg.get("study")
    if not isinstance(study_cfg, dict):
        raise UsageError("config file must contain a 'study' object")
    kind = study_cfg.get("kind")
    config = _run_config(cfg, args)
    out = Path(args.out)
    _write_resolved(out, config, cfg)

    if kind == "stability":
        allowed = {"kind", "deltas", "perturb", "resolution", "time_slices"}
        unknown = set(study_cfg) - allowed
        if unknown:
            raise UsageError(f"unknown study keys {sorted(unknown)}")
        from .verification.studies import dump_stability_csv, stability_study
        study = stability_study(
            config,
            deltas=study_cfg.get("deltas", [0.1, 0.2, 0.4]),
            perturb=study_cfg.get("perturb", "f"),
            resolution=study_cfg.get("resolution", 48),
            time_slices=study_cfg.get("time_slices", 17),
            out_dir=out)
        dump_stability_csv(out / "stability.csv", study)
        print(f"stability study ({study.perturb}): "
              f"monotone={study.monotone}; results in {out / 'stability.csv'}")
        return 0

    if kind == "loss-error":
        allowed = {"kind", "checkpoints", "resolution", "time_slices",
                   "irrotational"}
        unknown = set(study_cfg) - allowed
        if unknown:
            raise UsageError(f"unknown study keys {sorted(unknown)}")
        ckpts = study_cfg.get("checkpoints")
        if not ckpts:
            raise UsageError("loss-error study needs a 'checkpoints' list")
        for c in ckpts:
            if not Path(c).is_file():
                raise UsageError(f"checkpoint file not found: {c}")
        from .sampling import sample_batch
        from .training import problem_data_for
        from .verification.mms import mms_default
        from .verification.studies import loss_error_study
        phys = config.physics()
        batch = sample_batch(config.domain, config.T, config.m, config.n,
                             config.k, seed=config.sample_seed,
                             strategy=config.strategy)
        study = loss_error_study(
            ckpts, mms_default(phys), phys, batch, config.weights(),
            problem_data_for(config),
            resolution=study_cfg.get("resolution", 48),
            time_slices=study_cfg.get("time_slices", 17),
            irrotational=bool(study_cfg.get("irrotational", False)))
        rows = [{"model": r.label, "loss": r.loss, "err_u": r.err_u,
                 "err_B": r.err_B,
                 "irrotational_fraction": r.irrotational_fraction}
                for r in study.rows]
        report = {"rows": rows, "spearman_u": study.spearman_u,
                  "spearman_B": study.spearman_B}
        (out / "loss_error.json").write_text(json.dumps(report, indent=2) + "\n")
        print(f"loss-error study: spearman_u={study.spearman_u:.3f} "
              f"spearman_B={study.spearman_B:.3f}; "
              f"results in {out / 'loss_error.json'}")
        return 0

    if kind == "hodge":
        allowed = {"kind", "resolution", "t", "field", "checkpoint"}
        unknown = set(study_cfg) - allowed
        if unknown:
            raise UsageError(f"unknown study keys {sorted(unknown)}")
        field = study_cfg.get("field", "u")
        if field not in ("u", "B"):
            raise UsageError(f"hodge study field must be 'u' or 'B', "
                             f"got {field!r}")
        from .verification.hodge import (decomposition_report, dump_csv,
                                         hodge_decompose, sample_grid_field)
        from .verification.mms import mms_default
        phys = config.physics()
        t = float(study_cfg.get("t", 0.0))
        resolution = int(study_cfg.get("resolution", 128))
        ckpt = study_cfg.get("checkpoint")
        if ckpt is not None:
            from .network import forward_values, load_checkpoint
            params, _ = load_checkpoint(ckpt)
            cols = (0, 1) if field == "u" else (2, 3)

            def evaluator(x, y, tt):
                vals = forward_values(params, x, y, tt)
                return vals[:, cols[0]], vals[:, cols[1]]
        else:
            mms = mms_default(phys)
            evaluator = (mms.u_values if field == "u" else mms.B_values)
        grid = sample_grid_field(evaluator, resolution, t=t,
                                 domain=config.domain)
        report = decomposition_report(grid)
        w1, w2 = hodge_decompose(grid)
        dump_csv(out / "hodge.csv", grid, w1, w2)
        (out / "hodge.json").write_text(json.dumps(report, indent=2) + "\n")
        print(f"hodge study ({field}, t={t}, N={resolution}): "
              f"frac_w1={report['frac_w1']:.3e} "
              f"frac_w2={report['frac_w2']:.3e} "
              f"orthogonality={report['orthogonality']:.3e}; "
              f"results in {out / 'hodge.json'}")
        return 0

    raise UsageError(f"unknown study kind {kind!r}; "
                     "expected 'stability', 'loss-error' or 'hodge'")


def _cmd_sample_dump(args) -> int:
    cfg = _load_config(args.config)
    config = _run_config(cfg, args)
    from .sampling import dump_csv, sample_batch
    batch = sample_batch(config.domain, config.T, config.m, config.n,
                         config.k, seed=config.sample_seed,
                         strategy=config.strategy)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dump_csv(batch, out)
    print(f"wrote {config.m + config.n + config.k} points to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mhdpinn",
        description="Train and verify neural solvers for 2D incompressible "
                    "magnetohydrodynamics.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", required=True,
                       help="path to a JSON config file")
        if needs_out:
            p.add_argument("--out", required=True,
                           help="output directory (or file for sample-dump)")
        p.add_argument("--seed", type=int, default=None,
                       help="override network and sampling seeds")
        p.add_argument("--deterministic", action="store_true",
                       help="force deterministic single-threaded mode")
        p.add_argument("--threads", type=int, default=None,
                       help="thread count for numerics libraries")

    common(sub.add_parser("train", help="run a training loop"))
    p_eval = sub.add_parser("evaluate",
                            help="score a checkpoint against the reference")
    p_eval.add_argument("--checkpoint", required=True,
                        help="path to a checkpoint file")
    common(p_eval, needs_out=False)
    p_eval.add_argument("--out", default=None,
                        help="optional directory for evaluation.json")
    common(sub.add_parser("study", help="run a configured study"))
    common(sub.add_parser("sample-dump",
                          help="write a collocation batch to CSV"))
    return parser


_HANDLERS = {"train": _cmd_train, "evaluate": _cmd_evaluate,
             "study": _cmd_study, "sample-dump": _cmd_sample_dump}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _set_threads(args.threads)
        if args.deterministic and args.threads is None:
            _set_threads(1)
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures map to exit code 1
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
