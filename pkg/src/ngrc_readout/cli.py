"""``ngrc`` command line: simulate, train, eval, count, repro.

Exit codes: 0 success, 1 failed acceptance criteria, 2 configuration
error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import secrets
import sys
from pathlib import Path

from .errors import ConfigError, DataError, NGRCError, NumericalError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3, 4
MANIFEST = "manifest.json"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def update_manifest(out: Path, files, command: str, seed=None) -> Path:
    """Record sha256 hashes of ``files`` in ``out/manifest.json`` (merging earlier entries)."""
    path = out / MANIFEST
    data = {"artifacts": {}, "commands": {}}
    if path.exists():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError:
            pass
    data.setdefault("artifacts", {})
    data.setdefault("commands", {})
    for f in files:
        f = Path(f)
        data["artifacts"][f.name] = _sha256(f)
    data["commands"][command] = {"seed": seed, "artifacts": sorted(Path(f).name for f in files)}
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = secrets.randbits(63)
    print(f"seed: {seed} (drawn from entropy; pass --seed {seed} to repeat)")
    return seed


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_data(path):
    from .io import load_shotset
    try:
        return load_shotset(path)
    except FileNotFoundError:
        raise DataError(f"no such data file: {path}") from None


# -- commands -------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .config import load_config, sim_config
    from .io import save_shotset
    from .sim import generate_dataset

    cfg = sim_config(load_config(args.config))
    seed = _seed(args)
    out = _out_dir(args)
    data = generate_dataset(cfg, seed)
    stem = args.name or cfg.name or "shots"
    path = out / (stem + (".csv" if args.format == "csv" else ".ngrq"))
    save_shotset(data, path)
    update_manifest(out, [path], "simulate", seed)
    print(f"wrote {path}: M={data.n_shots} shots, {data.n_qubits} qubit(s), {data.n_classes} classes, "
          f"N={data.n_samples} samples, layout={data.layout.name.lower()}, seed={seed}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .config import feature_spec, load_config, split_config, train_options
    from .pipeline import train_models

    feats, train_kv = split_config(load_config(args.spec))
    if args.alpha_grid is not None:
        train_kv["alpha_grid"] = args.alpha_grid
    if args.split is not None:
        train_kv["split"] = repr(args.split)
    if args.select_terms:
        train_kv["select_terms"] = "true"
    if args.max_terms is not None:
        train_kv["max_terms"] = str(args.max_terms)
    opts = train_options(train_kv)
    spec, _ = feature_spec(feats)
    data = _load_data(args.data)
    seed = _seed(args)
    out = _out_dir(args)
    try:
        result = train_models(data, spec, opts, seed)
    except NGRCError as exc:
        raise type(exc)(f"training {args.spec} on {args.data}: {exc}") from None

    files = []
    for m in result.models:
        name = "model.disc" if m.target_qubit is None else f"model_q{m.target_qubit}.disc"
        m.save(out / name)
        files.append(out / name)
    grid_path = out / "grid.csv"
    with open(grid_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["target", "alpha", "threshold", "fidelity"])
        for t, a, thr, fid in result.sweep.grid:
            w.writerow(["" if t is None else t, f"{a:.6g}", f"{thr:.6g}", f"{fid:.6g}"])
    files.append(grid_path)
    summary = {
        "data": str(args.data),
        "seed": seed,
        "split": opts.split,
        "spec": result.spec.to_mapping(),
        "alphas": [m.alpha for m in result.models],
        "selection_fidelity": result.sweep.selection_fidelity,
        "test_fidelity": result.sweep.test_fidelity,
        "failed_alphas": result.sweep.failed_alphas,
    }
    summary_path = out / "train_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    files.append(summary_path)
    update_manifest(out, files, "train", seed)
    for m, f in zip(result.models, result.sweep.test_fidelity):
        who = "model" if m.target_qubit is None else f"qubit {m.target_qubit}"
        print(f"{who}: alpha={m.alpha:.3g} test fidelity={f:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .data import split_train_test
    from .metrics import write_report
    from .pipeline import baseline_predictions, fit_baselines, model_predictions, run_result
    from .trainer import Discriminator

    data = _load_data(args.data)
    models = []
    for p in args.model:
        try:
            models.append(Discriminator.load(p))
        except FileNotFoundError:
            raise DataError(f"no such model file: {p}") from None
    models.sort(key=lambda m: -1 if m.target_qubit is None else m.target_qubit)
    n_targets = data.n_qubits if data.n_qubits > 1 else 1
    if len(models) != n_targets:
        raise DataError(f"data has {n_targets} target(s) but {len(models)} model file(s) were given")

    if args.part == "all":
        fit_set, eval_set, seed = data, data, None
    else:
        seed = _seed(args)
        train, test = split_train_test(data, args.split, seed)
        fit_set, eval_set = train, (test if args.part == "test" else train)

    out = _out_dir(args)
    runs = []
    notes = []
    if args.baseline != "none":
        if data.n_classes != 2:
            notes.append(f"{args.baseline} baseline skipped: it needs two classes")
        else:
            filters = fit_baselines(fit_set, args.baseline, models[0].spec)
            preds = baseline_predictions(filters, eval_set, models[0].spec)
            runs.append(run_result(args.baseline, preds, eval_set, baseline=True))
    preds = model_predictions(models, eval_set)
    runs.append(run_result(args.name, preds, eval_set, models))

    json_path = out / f"{args.report}.json"
    csv_path = out / f"{args.report}.csv"
    report = write_report(runs, json_path, csv_path, dataset=str(args.data))
    if notes:
        report["notes"] = report.get("notes", []) + notes
        json_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    dat_path = out / f"{args.report}.dat"
    with open(dat_path, "w") as fh:
        fh.write("# model qubit fidelity\n")
        for r in runs:
            for j, f in enumerate(r.qubit_fidelities):
                fh.write(f"{r.model} {j} {f:.6g}\n")
    update_manifest(out, [json_path, csv_path, dat_path], "eval", seed)
    for r in runs:
        fids = " ".join(f"{f:.4f}" for f in r.qubit_fidelities)
        print(f"{r.model}: fidelity {fids}")
    for entry in report["models"]:
        if "cross_fidelity_mean" in entry:
            print(f"{entry['model']}: mean |F_CF| {entry['cross_fidelity_mean']:.4g}")
    for note in report.get("notes", []):
        print(f"note: {note}")
    return EXIT_OK


def cmd_count(args) -> int:
    from .config import TABLE_PRESETS, feature_spec, load_config, split_config
    from .features import count_complexity

    sources = args.spec or list(TABLE_PRESETS)
    rows = []
    for src in sources:
        feats, _ = split_config(load_config(src))
        spec, n_models = feature_spec(feats)
        n = args.n_models or n_models or (spec.n_channels if not spec.is_shared() else 1)
        c = count_complexity(spec, n)
        rows.append({"spec": src, "models": n, "parameters": c.parameters,
                     "multiplications": c.multiplications, "demod": c.demod_multiplications,
                     "products": c.product_multiplications, "weights": c.weight_multiplications})
    width = max(len(r["spec"]) for r in rows)
    print(f"{'spec':<{width}}  models  parameters  multiplications")
    for r in rows:
        print(f"{r['spec']:<{width}}  {r['models']:>6}  {r['parameters']:>10}  {r['multiplications']:>15}"
              f"  ({r['parameters']:.3g} / {r['multiplications']:.3g})")
    if args.out:
        out = _out_dir(args)
        path = out / "complexity.csv"
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        update_manifest(out, [path], "count")
    return EXIT_OK


def cmd_repro(args) -> int:
    from .acceptance import CRITERIA, run_suite

    if args.suite == "list":
        for c in CRITERIA:
            print(f"{c.id}\t{c.title}")
        return EXIT_OK
    try:
        results = run_suite(args.only, args.trials, stream=sys.stdout)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    failed = [c.id for c, o in results if not o.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_OK if not failed else EXIT_FAIL


# -- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ngrc", description="NG-RC qubit readout: simulate, train, evaluate, count.")
    p.add_argument("--threads", type=int, default=None,
                   help="cap on BLAS worker threads (default: $NGRC_THREADS, else library default)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic shot set from a config or preset")
    s.add_argument("config", help="config file or simulator preset name")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", default=".")
    s.add_argument("--format", choices=("binary", "csv"), default="binary")
    s.add_argument("--name", help="output file stem (default: preset name or 'shots')")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train", help="sweep alpha and thresholds, save the best model per target")
    t.add_argument("--data", required=True)
    t.add_argument("--spec", required=True, help="feature config file or preset name")
    t.add_argument("--alpha-grid", help="'single', 'multi' or a comma list")
    t.add_argument("--split", type=float, help="training fraction (default 0.5)")
    t.add_argument("--seed", type=int)
    t.add_argument("--out", default=".")
    t.add_argument("--select-terms", action="store_true", help="prune monomials before training")
    t.add_argument("--max-terms", type=int)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score saved models (and a filter baseline) on a shot set")
    e.add_argument("--data", required=True)
    e.add_argument("--model", nargs="+", required=True)
    e.add_argument("--baseline", choices=("mf", "boxcar", "none"), default="mf")
    e.add_argument("--report", default="report", help="report file stem")
    e.add_argument("--part", choices=("test", "train", "all"), default="test",
                   help="which part of the seeded split to score (use the training seed)")
    e.add_argument("--split", type=float, default=0.5)
    e.add_argument("--seed", type=int)
    e.add_argument("--name", default="ngrc", help="model name in the report")
    e.add_argument("--out", default=".")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("count", help="parameter and multiplication counts of feature specs")
    c.add_argument("--spec", action="append", help="config file or preset (repeatable; default: the table presets)")
    c.add_argument("--n-models", type=int)
    c.add_argument("--out", help="also write complexity.csv here")
    c.set_defaults(func=cmd_count)

    r = sub.add_parser("repro", help="run the acceptance suite")
    r.add_argument("--suite", choices=("desk", "list"), default="desk")
    r.add_argument("--only", nargs="+", metavar="ID", help="run only these criteria")
    r.add_argument("--trials", type=int, default=10, help="seeded trials per simulator criterion")
    r.set_defaults(func=cmd_repro)
    return p


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("NGRC_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"NGRC_THREADS must be an integer, got {env!r}") from None
    return None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        threads = _threads(args)
        if threads is not None and threads < 1:
            raise ConfigError("--threads must be >= 1")
        if threads is not None:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=threads):
                return args.func(args)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # remaining validation failures come from argument values
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
