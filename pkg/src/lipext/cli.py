"""Command-line front end.

Five subcommands cover the user workflows:

* ``constants`` -- coherence/normalization constants of the indexed rows.
* ``extend``    -- fit on all indexed rows, predict all unindexed rows.
* ``cv``        -- repeated train/test evaluation of one method.
* ``optimize``  -- particle swarm search for modulus coefficients.
* ``rank``      -- extend, then order the unindexed rows by prediction.

Every command reads one dataset CSV plus an optional JSON config; flags
override config values.  Outputs are CSV/JSON files written atomically.
On failure the process exits nonzero after printing a single line of the
form ``error:<category>: <message>`` to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .constants import constants_report, katetov_shift
from .dataio import (
    CsvParseError,
    dataset_hash,
    read_dataset,
    write_csv,
    write_json,
)
from .extension import (
    ExtensionModel,
    FitError,
    fit_extension,
    mcshane_batch,
    optimal_alpha,
    predict,
    standard_index_fit,
    whitney_batch,
)
from .metrics import BASE_METRICS, CompositionMetric
from .phi import ATOM_NAMES, LINEAR_BASIS, PhiCombination, identity_phi
from .pipeline import (
    PIPELINE_METHODS,
    Dataset,
    apply_scaling,
    cross_validate,
    cv_repeat_rows,
    linear_fit,
    linear_predict,
    minmax_scale,
    objective_test_rmse,
    rank,
    split,
)
from .swarm import PsoConfig, pso_minimize, objective_kq

DEFAULT_ATOMS = LINEAR_BASIS


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


@dataclass
class RunConfig:
    """Run settings; every field has a default and a JSON config key."""

    metric: str = "euclidean"
    phi: object = None  # None -> identity, "optimize", or {"atoms":..,"coefficients":..}
    atoms: tuple[str, ...] = DEFAULT_ATOMS  # basis for phi optimization
    method: str = "blend"
    alpha: float | None = None
    train_fraction: float = 0.7
    repeats: int = 20
    seed: int = 0
    objective: str = "kq_bound"
    scale_on: str = "all"
    honest_alpha: bool = False
    split: str = "random"
    out: str | None = None
    pso: dict = field(default_factory=dict)


def load_config(path: str | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError("io", f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise CliError("config", f"invalid JSON in {path}: {exc}")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise CliError("config", f"unknown config keys {sorted(unknown)}")
    if "atoms" in raw:
        raw["atoms"] = tuple(raw["atoms"])
    return replace(cfg, **raw)


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    updates = {}
    for flag, key in (
        ("method", "method"),
        ("metric", "metric"),
        ("seed", "seed"),
        ("repeats", "repeats"),
        ("train_fraction", "train_fraction"),
        ("out", "out"),
        ("phi", "phi"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            updates[key] = val
    if getattr(args, "objective", None) is not None:
        updates["objective"] = args.objective.replace("-", "_")
    cfg = replace(cfg, **updates)
    _check_config(cfg)
    return cfg


def _check_config(cfg: RunConfig) -> None:
    if cfg.metric not in BASE_METRICS:
        raise CliError("config", f"metric must be one of {BASE_METRICS}")
    if cfg.method not in PIPELINE_METHODS:
        raise CliError("config", f"method must be one of {PIPELINE_METHODS}")
    if cfg.objective not in ("kq_bound", "test_rmse"):
        raise CliError("config", "objective must be kq-bound or test-rmse")
    if not 0.0 < cfg.train_fraction < 1.0:
        raise CliError("config", "train-fraction must lie strictly between 0 and 1")
    if cfg.repeats < 1:
        raise CliError("config", "repeats must be >= 1")
    if cfg.scale_on not in ("all", "indexed"):
        raise CliError("config", "scale_on must be 'all' or 'indexed'")
    if cfg.split not in ("random", "ordered"):
        raise CliError("config", "split must be 'random' or 'ordered'")
    bad = [a for a in cfg.atoms if a not in ATOM_NAMES]
    if bad:
        raise CliError("config", f"unknown atoms {bad}; choose from {ATOM_NAMES}")


def _pso_config(cfg: RunConfig) -> PsoConfig:
    opts = dict(cfg.pso)
    opts.setdefault("seed", cfg.seed)
    opts.setdefault("objective", cfg.objective)
    try:
        return PsoConfig(**opts)
    except (TypeError, ValueError) as exc:
        raise CliError("config", f"bad pso settings: {exc}")


def _parse_phi_value(value: object) -> PhiCombination:
    if value is None:
        return identity_phi()
    if isinstance(value, dict):
        try:
            return PhiCombination.from_json_dict(value)
        except (KeyError, ValueError) as exc:
            raise CliError("config", f"bad phi specification: {exc}")
    if isinstance(value, str):
        text = value.strip()
        if text.startswith("{"):
            try:
                return PhiCombination.from_json(text)
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise CliError("config", f"bad phi JSON: {exc}")
        try:
            return PhiCombination.from_json(Path(text).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise CliError("io", f"phi file not found: {text}")
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise CliError("config", f"bad phi file {text}: {exc}")
    raise CliError("config", f"cannot interpret phi value {value!r}")


def _resolve_phi(cfg: RunConfig, scaled: Dataset) -> PhiCombination:
    """Turn the configured phi into a concrete combination.

    ``"optimize"`` runs the swarm search on the indexed rows first and uses
    the winning coefficients.
    """
    if cfg.phi == "optimize":
        result = _run_optimize(cfg, scaled)
        return PhiCombination(cfg.atoms, tuple(result["best_phi"]["coefficients"]))
    return _parse_phi_value(cfg.phi)


def _scaled_dataset(cfg: RunConfig, data_path: str) -> Dataset:
    return minmax_scale(read_dataset(data_path), fit_on=cfg.scale_on)


def _identity_lambda(dim: int) -> np.ndarray:
    lam = np.zeros(dim)
    lam[0] = 1.0
    return lam


def _run_optimize(cfg: RunConfig, scaled: Dataset) -> dict:
    indexed = scaled.indexed_rows()
    if indexed.n_rows < 2:
        raise CliError("data", "optimize needs at least two indexed rows")
    atoms = cfg.atoms
    if cfg.objective == "kq_bound":
        sample = katetov_shift(indexed.as_sample())
        objective = objective_kq(sample, cfg.metric, atoms)
    else:
        objective = objective_test_rmse(
            indexed, cfg.metric, atoms, cfg.train_fraction, cfg.seed
        )
    pso_cfg = _pso_config(cfg)
    result = pso_minimize(objective, len(atoms), pso_cfg)
    identity_objective = objective(_identity_lambda(len(atoms)))

    lam = np.asarray(result.best_lambda, dtype=float)
    if cfg.objective == "kq_bound":
        # The product is constant along rays; report unit-sum coefficients.
        lam = lam / np.sum(lam)
    best_phi = PhiCombination(atoms, tuple(float(v) for v in lam))
    return {
        "objective": cfg.objective,
        "identity_objective": identity_objective,
        "best_objective": result.best_objective,
        "best_phi": best_phi.to_json_dict(),
        "swarm": result.to_json_dict(),
    }


# ---------------------------------------------------------------------------
# model file round trip


def model_to_json_dict(
    model: ExtensionModel, raw_hash: str, scaled: Dataset, ids: list[str]
) -> dict:
    scaling = {"min": [], "max": []}
    if scaled.scaling is not None:
        scaling = {
            "min": [float(v) for v in scaled.scaling[0]],
            "max": [float(v) for v in scaled.scaling[1]],
        }
    anchor_id = ids[model.anchor] if model.anchor is not None else None
    return {
        "method": model.method,
        "alpha": model.alpha,
        "anchor_id": anchor_id,
        "K": model.K,
        "offset": model.offset,
        "phi": model.cm.phi.to_json_dict(),
        "metric": model.cm.base,
        "training_hash": raw_hash,
        "feature_names": list(scaled.feature_names),
        "scaling": scaling,
    }


def rebuild_model(model_dict: dict, ds_raw: Dataset) -> tuple[ExtensionModel, Dataset]:
    """Reconstruct a fitted model against the same dataset it was fit on.

    The stored hash guards against silently predicting from different data.
    Nothing is refit: K, alpha and the anchor come from the file, so
    predictions are bit-identical to the original run.
    """
    if dataset_hash(ds_raw) != model_dict["training_hash"]:
        raise CliError("data", "dataset does not match the model's training hash")
    scaling = (
        np.array(model_dict["scaling"]["min"], dtype=float),
        np.array(model_dict["scaling"]["max"], dtype=float),
    )
    scaled = Dataset(
        list(ds_raw.ids),
        apply_scaling(ds_raw.features, scaling),
        ds_raw.index.copy(),
        list(ds_raw.feature_names),
        scaling=scaling,
    )
    indexed = scaled.indexed_rows()
    cm = CompositionMetric(
        model_dict["metric"], PhiCombination.from_json_dict(model_dict["phi"])
    )
    anchor = None
    if model_dict["anchor_id"] is not None:
        anchor = indexed.ids.index(model_dict["anchor_id"])
    model = ExtensionModel(
        training=indexed.as_sample(),
        cm=cm,
        K=float(model_dict["K"]),
        method=model_dict["method"],
        alpha=model_dict["alpha"],
        anchor=anchor,
        offset=float(model_dict["offset"]),
    )
    return model, scaled


# ---------------------------------------------------------------------------
# commands


def _fit_for_extend(cfg: RunConfig, indexed: Dataset, cm: CompositionMetric) -> ExtensionModel:
    sample = indexed.as_sample()
    if cfg.method == "standard":
        return standard_index_fit(sample, cm)
    if cfg.method != "blend":
        return fit_extension(sample, cm, cfg.method)
    alpha = cfg.alpha
    if alpha is None:
        # Estimate the blend weight on an internal holdout, then refit on
        # every indexed row with that weight frozen.
        try:
            tr, ho = split(indexed, cfg.train_fraction, cfg.seed, cfg.split)
            probe = fit_extension(tr.as_sample(), cm, "blend")
            alpha = optimal_alpha(
                ho.index, whitney_batch(probe, ho.features), mcshane_batch(probe, ho.features)
            )
        except ValueError:
            warnings.warn("too few indexed rows to estimate alpha; using 0.5", stacklevel=2)
            alpha = 0.5
    return fit_extension(sample, cm, "blend", alpha=alpha)


def _extend(cfg: RunConfig, data_path: str) -> tuple[Dataset, np.ndarray, dict]:
    ds_raw = read_dataset(data_path)
    raw_hash = dataset_hash(ds_raw)
    scaled = minmax_scale(ds_raw, fit_on=cfg.scale_on)
    phi = _resolve_phi(cfg, scaled)
    cm = CompositionMetric(cfg.metric, phi)
    indexed = scaled.indexed_rows()
    targets = scaled.unindexed_rows()
    if indexed.n_rows < 2:
        raise CliError("data", "extension needs at least two indexed rows")

    if cfg.method == "linear":
        coeffs = linear_fit(indexed.as_sample())
        preds = (
            linear_predict(coeffs, targets.features)
            if targets.n_rows
            else np.empty(0)
        )
        model_dict = {
            "method": "linear",
            "coefficients": [float(c) for c in coeffs],
            "training_hash": raw_hash,
            "feature_names": list(scaled.feature_names),
            "scaling": {
                "min": [float(v) for v in scaled.scaling[0]],
                "max": [float(v) for v in scaled.scaling[1]],
            },
        }
        return scaled, preds, model_dict

    model = _fit_for_extend(cfg, indexed, cm)
    preds = predict(model, targets.features) if targets.n_rows else np.empty(0)
    model_dict = model_to_json_dict(model, raw_hash, scaled, indexed.ids)
    if targets.n_rows == 0:
        warnings.warn("no unindexed rows: nothing to predict", stacklevel=2)
    return scaled, preds, model_dict


def cmd_constants(cfg: RunConfig, args) -> int:
    scaled = _scaled_dataset(cfg, args.data)
    indexed = scaled.indexed_rows()
    if indexed.n_rows < 2:
        raise CliError("data", "constants need at least two indexed rows")
    cm = CompositionMetric(cfg.metric, _resolve_phi(cfg, scaled))
    report = constants_report(indexed.as_sample(), cm)
    payload = report.to_json_dict()
    print(json.dumps(payload, indent=2, sort_keys=True))
    if cfg.out:
        write_json(Path(cfg.out) / "constants.json", payload)
    return 0


def cmd_extend(cfg: RunConfig, args) -> int:
    scaled, preds, model_dict = _extend(cfg, args.data)
    ids = scaled.unindexed_rows().ids
    out = Path(cfg.out or ".")
    write_csv(out / "predictions.csv", ["id", "predicted_index"],
              list(zip(ids, [float(p) for p in preds])))
    write_json(out / "model.json", model_dict)
    for cid, p in zip(ids, preds):
        print(f"{cid},{float(p)!r}")
    return 0


def cmd_cv(cfg: RunConfig, args) -> int:
    scaled = _scaled_dataset(cfg, args.data)
    cm = CompositionMetric(cfg.metric, _resolve_phi(cfg, scaled))
    report = cross_validate(
        scaled,
        cfg.method,
        cm,
        repeats=cfg.repeats,
        seed=cfg.seed,
        train_fraction=cfg.train_fraction,
        alpha=cfg.alpha,
        honest_alpha=cfg.honest_alpha,
        split_method=cfg.split,
    )
    payload = report.to_json_dict()
    print(json.dumps(payload, indent=2, sort_keys=True))
    if cfg.out:
        write_json(Path(cfg.out) / "cv_report.json", payload)
        write_csv(Path(cfg.out) / "cv_repeats.csv", ["repeat", "rmse"],
                  cv_repeat_rows(report))
    return 0


def cmd_optimize(cfg: RunConfig, args) -> int:
    scaled = _scaled_dataset(cfg, args.data)
    result = _run_optimize(cfg, scaled)
    enc = lambda v: "inf" if isinstance(v, float) and math.isinf(v) else v
    payload = dict(result, identity_objective=enc(result["identity_objective"]),
                   best_objective=enc(result["best_objective"]))
    print(json.dumps(payload, indent=2, sort_keys=True))
    if cfg.out:
        write_json(Path(cfg.out) / "best_phi.json", result["best_phi"])
        write_json(Path(cfg.out) / "swarm_result.json", payload)
    return 0


def cmd_rank(cfg: RunConfig, args) -> int:
    scaled, preds, _ = _extend(cfg, args.data)
    if scaled.unindexed_rows().n_rows == 0:
        raise CliError("data", "ranking needs at least one unindexed row")
    rows = [(r, cid, val, cfg.method) for r, cid, val in rank(scaled, preds)]
    out = Path(cfg.out or ".")
    write_csv(out / "ranking.csv", ["rank", "id", "predicted_index", "method"], rows)
    for row in rows:
        print(f"{row[0]},{row[1]},{row[2]!r},{row[3]}")
    return 0


COMMANDS = {
    "constants": cmd_constants,
    "extend": cmd_extend,
    "cv": cmd_cv,
    "optimize": cmd_optimize,
    "rank": cmd_rank,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lipext",
        description="Extend a partially known index over a dataset by "
        "Lipschitz regression under a composed metric.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("constants", "report coherence/normalization constants and the error bound"),
        ("extend", "predict the index for all unindexed rows"),
        ("cv", "repeated train/test evaluation of one method"),
        ("optimize", "search modulus coefficients by particle swarm"),
        ("rank", "extend and rank the unindexed rows"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--data", required=True, help="dataset CSV path")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--method", choices=PIPELINE_METHODS, default=None)
        p.add_argument("--phi", default=None,
                       help="'optimize', inline JSON, or a JSON file path")
        p.add_argument("--metric", choices=BASE_METRICS, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--repeats", type=int, default=None)
        p.add_argument("--train-fraction", type=float, default=None,
                       dest="train_fraction")
        p.add_argument("--objective", choices=["kq-bound", "test-rmse"], default=None)
        p.add_argument("--out", default=None, help="output directory")
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _apply_overrides(load_config(args.config), args)
    return COMMANDS[args.command](cfg, args)


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except CliError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 2
    except CsvParseError as exc:
        print(f"error:parse: {exc}", file=sys.stderr)
        return 2
    except FitError as exc:
        print(f"error:unfittable: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error:data: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
