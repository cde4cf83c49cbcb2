"""``forecast`` command-line front end.

Exit codes: 0 success, 1 user error (bad config, data or arguments),
2 internal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .checkpoint import atomic_write_text
from .errors import ForecastError
from .evaluation import (ClusterPartition, cluster_stability, cross_channel_grid, matrix_svg,
                         normalize_matrix, partition_from_mapping, best_inputs, write_matrix_csv)
from .training import (STRATEGIES, ExperimentConfig, RunRecord, load_dataset, records_to_json,
                       rmp_label, run, run_matrix)

log = logging.getLogger("chanclust")

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class UsageError(ForecastError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _attach_log(out_dir: Path) -> logging.Handler:
    handler = logging.FileHandler(out_dir / "log.txt", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    return handler


def _prepare_out(out_dir: Path, force: bool, marker: str) -> None:
    if (out_dir / marker).exists() and not force:
        raise UsageError(f"{out_dir} already holds {marker}; pass --force to overwrite")
    out_dir.mkdir(parents=True, exist_ok=True)


# ---------------------------------------------------------------------------
# train


def cmd_train(config_path, out_dir, seed: int | None = None, force: bool = False) -> int:
    config = ExperimentConfig.from_json(config_path)
    if seed is not None:
        config = config.replace(seed=seed)
    out = Path(out_dir)
    _prepare_out(out, force, "run.json")
    handler = _attach_log(out)
    try:
        record = run(config, out)
    finally:
        log.removeHandler(handler)
        handler.close()
    atomic_write_text(out / "config.json", _dump(config.resolved()))
    atomic_write_text(out / "mapping_history.json", _dump(record.mapping_history))
    atomic_write_text(out / "run.json", record.dumps())
    with (out / "log.txt").open("a", encoding="utf-8") as fh:
        fh.write("epoch_seconds " + json.dumps(record.epoch_seconds) + "\n")
    print(f"{record.strategy}: test MSE {record.test_mse:.3f} MAE {record.test_mae:.3f} "
          f"RMP {rmp_label(record.n_live_layers, record.dataset['n_channels'])} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# grid


def _load_config_list(path) -> list[ExperimentConfig]:
    path = Path(path)
    try:
        items = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(items, list):
        raise UsageError(f"{path}: expected a JSON list of configs")
    configs = []
    for item in items:
        if isinstance(item, str):
            configs.append(ExperimentConfig.from_json(path.parent / item))
        else:
            configs.append(ExperimentConfig.from_dict(item))
    return configs


def dataset_label(config: dict) -> str:
    if config.get("name"):
        return config["name"]
    if config.get("dataset"):
        return Path(config["dataset"]).stem
    return "synthetic"


def comparison_rows(records) -> tuple[list[str], list[list[str]]]:
    """Rows keyed by (dataset, horizon); MSE/MAE/RMP column triple per strategy."""
    cells: dict[tuple[str, int], dict[str, object]] = {}
    present = set()
    for r in records:
        cfg = r.config
        key = (dataset_label(cfg), int(cfg["horizon"]))
        cells.setdefault(key, {})[cfg["strategy"]] = r
        present.add(cfg["strategy"])
    strategies = [s for s in STRATEGIES if s in present]
    header = ["dataset", "horizon"]
    for s in strategies:
        header += [f"{s} MSE", f"{s} MAE", f"{s} RMP"]
    header += ["best MSE", "best MAE"]
    rows = []
    for key in sorted(cells):
        row = [key[0], str(key[1])]
        best = {"mse": (None, float("inf")), "mae": (None, float("inf"))}
        for s in strategies:
            r = cells[key].get(s)
            if r is None:
                row += ["", "", ""]
            elif isinstance(r, RunRecord):
                row += [f"{r.test_mse:.3f}", f"{r.test_mae:.3f}",
                        rmp_label(r.n_live_layers, r.dataset["n_channels"])]
                for m, v in (("mse", r.test_mse), ("mae", r.test_mae)):
                    if v < best[m][1]:
                        best[m] = (s, v)
            else:
                row += ["error", "error", ""]
        row += [best["mse"][0] or "", best["mae"][0] or ""]
        rows.append(row)
    return header, rows


def _write_table(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_grid(configs_path, out_dir, force: bool = False) -> int:
    configs = _load_config_list(configs_path)
    if not configs:
        raise UsageError("config list is empty")
    out = Path(out_dir)
    _prepare_out(out, force, "table.csv")
    records = run_matrix(configs)
    header, rows = comparison_rows(records)
    _write_table(out / "table.csv", header, rows)
    atomic_write_text(out / "runs.json", _dump(records_to_json(records)))
    ok = sum(isinstance(r, RunRecord) for r in records)
    print(f"{ok}/{len(records)} runs succeeded -> {out / 'table.csv'}")
    return EXIT_OK if ok else EXIT_USER


# ---------------------------------------------------------------------------
# xchannel


def parse_channels(spec: str | None, d: int) -> list[int]:
    """``"1-21"`` / ``"1,3,5-7"`` -> sorted 0-based indices; ``None`` means all."""
    if spec is None:
        return list(range(d))
    picked: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                picked.extend(range(lo, hi + 1))
            else:
                picked.append(int(part))
        except ValueError:
            raise UsageError(f"cannot parse channel selection {spec!r}") from None
    if not picked:
        raise UsageError("channel selection is empty")
    bad = [c for c in picked if c < 1 or c > d]
    if bad:
        raise UsageError(f"channels {bad} outside 1..{d}")
    return sorted(set(c - 1 for c in picked))


def cmd_xchannel(config_path, channels: str | None, out_dir, force: bool = False) -> int:
    config = ExperimentConfig.from_json(config_path)
    ds, _ = load_dataset(config)
    idx = parse_channels(channels, ds.n_channels)
    ds = ds.subset(idx)
    out = Path(out_dir)
    _prepare_out(out, force, "best_inputs.json")
    grids = cross_channel_grid(ds, config.lookback, config.horizon, epochs=config.total_epochs,
                               batch_size=config.batch_size, lr=config.learning_rate,
                               seed=config.seed, standardize_data=config.standardize,
                               revin_eps=config.revin_eps)
    summary = {"channels": [i + 1 for i in idx], "names": list(ds.channel_names)}
    for name, matrix in grids.items():
        write_matrix_csv(matrix, out / f"{name}_matrix.csv")
        norm = normalize_matrix(matrix)
        (out / f"{name}_matrix.svg").write_text(
            matrix_svg(norm, f"normalized {name} loss (row = input, column = target)"), encoding="utf-8")
        summary[name] = [
            {"target": j + 1, "target_name": ds.channel_names[j],
             "best_input": b + 1, "best_input_name": ds.channel_names[b],
             "self_is_best": b == j}
            for j, b in enumerate(best_inputs(matrix))
        ]
    atomic_write_text(out / "best_inputs.json", _dump(summary))
    not_self = sum(not e["self_is_best"] for e in summary["test"])
    print(f"{len(idx)}x{len(idx)} grid; {not_self} target(s) best forecast from another channel -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# clusters


def read_final_partition(run_dir: Path) -> ClusterPartition:
    hist_path = run_dir / "mapping_history.json"
    if not hist_path.exists():
        raise UsageError(f"{run_dir}: no mapping_history.json")
    history = json.loads(hist_path.read_text())
    if not history:
        raise UsageError(f"{run_dir}: mapping history is empty")
    seed = None
    run_path = run_dir / "run.json"
    if run_path.exists():
        seed = json.loads(run_path.read_text())["config"].get("seed")
    return partition_from_mapping(history[-1]["assignment"], seed)


def cmd_clusters(run_dirs: Sequence, out_dir, force: bool = False) -> int:
    if len(run_dirs) < 2:
        raise UsageError("cluster stability needs at least two run directories")
    dirs = [Path(p) for p in run_dirs]
    parts = [read_final_partition(p) for p in dirs]
    sizes = {len(p.assignment) for p in parts}
    if len(sizes) != 1:
        raise UsageError(f"runs cover different channel counts: {sorted(sizes)}")
    out = Path(out_dir)
    _prepare_out(out, force, "stability.json")
    report = cluster_stability(parts)
    result = report.to_json()
    result["runs"] = [str(p) for p in dirs]
    atomic_write_text(out / "stability.json", _dump(result))
    atomic_write_text(out / "partitions.json", _dump([p.to_json() for p in parts]))
    header = ["channel"] + [f"run{k + 1}" for k in range(len(parts))]
    rows = [[str(j + 1)] + [str(p.assignment[j]) for p in parts] for j in range(sizes.pop())]
    _write_table(out / "assignments.csv", header, rows)
    print(f"mean Rand {report.mean_rand:.3f}, mean adjusted Rand {report.mean_ari:.3f} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def cmd_report(run_dirs: Sequence, out_path=None) -> int:
    if not run_dirs:
        raise UsageError("no run directories given")
    records = []
    for p in run_dirs:
        path = Path(p) / "run.json"
        if not path.exists():
            raise UsageError(f"{p}: no run.json")
        records.append(RunRecord.from_json(json.loads(path.read_text())))
    header, rows = comparison_rows(records)
    widths = [max(len(h), *(len(r[k]) for r in rows)) for k, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    if out_path:
        _write_table(Path(out_path), header, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="forecast", description="Channel-strategy forecasting experiments")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one configuration")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--force", action="store_true")

    g = sub.add_parser("grid", help="run a list of configurations and tabulate them")
    g.add_argument("--configs", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--force", action="store_true")

    x = sub.add_parser("xchannel", help="input-channel x target-channel loss matrices")
    x.add_argument("--config", required=True)
    x.add_argument("--channels")
    x.add_argument("--out", required=True)
    x.add_argument("--force", action="store_true")

    c = sub.add_parser("clusters", help="cluster stability across runs")
    c.add_argument("--runs", nargs="+", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--force", action="store_true")

    r = sub.add_parser("report", help="print a comparison table from run directories")
    r.add_argument("--runs", nargs="+", required=True)
    r.add_argument("--out")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    console = logging.StreamHandler()
    console.setLevel(logging.WARNING - 10 * min(args.verbose, 2))
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(console)
    log.setLevel(logging.INFO)
    log.propagate = False
    try:
        if args.command == "train":
            return cmd_train(args.config, args.out, args.seed, args.force)
        if args.command == "grid":
            return cmd_grid(args.configs, args.out, args.force)
        if args.command == "xchannel":
            return cmd_xchannel(args.config, args.channels, args.out, args.force)
        if args.command == "clusters":
            return cmd_clusters(args.runs, args.out, args.force)
        if args.command == "report":
            return cmd_report(args.runs, args.out)
    except (ForecastError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    finally:
        log.removeHandler(console)
    return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
