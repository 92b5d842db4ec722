"""Command-line interface: ``lgmix fit | batch | synth | eval``.

Exit codes: 0 success, 2 parse error, 3 degenerate input, 4 convergence or
degenerate density, 5 manifest error.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .distributions import LgmParams, sample_lgm
from .em import EmConfig
from .errors import LgmError, ParseError
from .ingestion import (
    ManifestEntry,
    TrialRecord,
    load_manifest,
    load_trial,
    read_matrix,
    select_max_energy_channel,
    write_matrix,
)
from .report import (
    MODELS,
    build_heatmap,
    curves_table,
    evaluate,
    fit_and_evaluate,
    marginal_average,
    write_table,
)

log = logging.getLogger("lgmix")

EXIT_OK = 0


def _bins(value):
    if value == "auto":
        return value
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("bins must be 'auto' or a positive integer") from None
    if n < 1:
        raise argparse.ArgumentTypeError("bins must be positive")
    return n


def _add_fit_flags(p):
    p.add_argument("--bins", type=_bins, default="auto", help="histogram bins or 'auto' (default)")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--header", action="store_true", help="skip one header line in input files")


def _config(args) -> EmConfig:
    try:
        return EmConfig(tol=args.tol, max_iter=args.max_iter, n_restarts=args.restarts)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def _load_samples(path, header):
    data = read_matrix(path, header=header)
    if data.shape[1] == 1:
        return 0, data[:, 0].copy()
    entry = ManifestEntry(Path(path), "", "", "", 1.0, data.shape[1])
    return select_max_energy_channel(TrialRecord(entry, data.T.copy()))


def _write_text(path, text):
    Path(path).write_text(text)


def cmd_fit(args):
    channel, y = _load_samples(args.input, args.header)
    meta = {"source": Path(args.input).name, "channel": channel}
    report = fit_and_evaluate(y, _config(args), args.seed, bins=args.bins, meta=meta)
    curves = curves_table(y, report, args.bins) if args.curves else None

    line = report.to_json() + "\n"
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = Path(args.input).stem
        _write_text(out / f"{stem}.report.jsonl", line)
        if curves is not None:
            write_table(out / f"{stem}.curves.csv", *curves)
    else:
        if curves is not None:
            write_table(Path(f"{Path(args.input).stem}.curves.csv"), *curves)
    sys.stdout.write(line)
    return EXIT_OK


def _load_params(path) -> LgmParams:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read params file {path}: {exc}") from None
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        obj = json.loads(lines[0] if len(lines) == 1 else text)
    except (json.JSONDecodeError, IndexError) as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from None
    if isinstance(obj, dict) and "params" in obj:
        obj = obj["params"]
    if isinstance(obj, dict) and "lgm" in obj:
        obj = obj["lgm"]
    try:
        return LgmParams.from_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: invalid LGM parameters ({exc})") from None


def cmd_eval(args):
    params = _load_params(args.params)
    channel, y = _load_samples(args.input, args.header)
    meta = {"source": Path(args.input).name, "channel": channel}
    report = evaluate(y, params, bins=args.bins, meta=meta)
    line = report.to_json() + "\n"
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_text(out / f"{Path(args.input).stem}.eval.jsonl", line)
    sys.stdout.write(line)
    return EXIT_OK


def cmd_synth(args):
    if args.n < 1:
        raise ParseError(f"--n must be >= 1, got {args.n}")
    try:
        params = LgmParams.from_values(args.lambda1, args.mu1, args.sigma1, args.mu2, args.sigma2_sq)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    y = sample_lgm(args.n, params, args.seed)
    write_matrix(args.out, y.reshape(-1, 1))
    info = {"params": params.to_dict(), "n": args.n, "seed": args.seed, "out": str(args.out)}
    sys.stdout.write(json.dumps(info, sort_keys=True) + "\n")
    return EXIT_OK


# ----------------------------------------------------------------------------
# batch
# ----------------------------------------------------------------------------

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")


def _safe(label):
    return _UNSAFE.sub("_", str(label)) or "_"


def _run_trial(job):
    entry, cfg, seed, bins, header = job
    try:
        rec = load_trial(entry, header=header)
        channel, y = select_max_energy_channel(rec)
        meta = {
            "subject": entry.subject,
            "activity": entry.activity,
            "trial": entry.trial,
            "channel": channel,
            "sample_rate": entry.sample_rate,
            "path": str(entry.path),
        }
        report = fit_and_evaluate(y, cfg, seed, bins=bins, meta=meta)
        return entry, report.to_dict(), None
    except (LgmError, ValueError, ArithmeticError) as exc:
        return entry, None, f"{type(exc).__name__}: {exc}"


def cmd_batch(args):
    manifest = load_manifest(args.manifest)
    cfg = _config(args)
    out = Path(args.out_dir or ".")
    reports_dir = out / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)

    jobs = [(e, cfg, args.seed, args.bins, args.header) for e in manifest]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_trial, jobs))
    else:
        results = [_run_trial(j) for j in jobs]

    records = []
    failures = []
    for entry, record, err in results:
        if err is not None:
            log.warning("skipping %s/%s/%s: %s", entry.subject, entry.activity, entry.trial, err)
            failures.append([entry.subject, entry.activity, entry.trial, str(entry.path), err])
            continue
        records.append(record)
        name = "__".join(_safe(v) for v in (entry.subject, entry.activity, entry.trial))
        _write_text(reports_dir / f"{name}.jsonl", json.dumps(record, sort_keys=True) + "\n")

    _write_text(out / "reports.jsonl", "".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
    write_table(out / "failures.csv", ["subject", "activity", "trial", "path", "error"], failures)

    if records:
        heatmaps = {m: build_heatmap(records, f"kld_{m}") for m in MODELS}
        for m, hm in heatmaps.items():
            write_table(out / f"heatmap_kld_{m}.csv", *hm.rows())
        write_table(out / "heatmap_lambda1.csv", *build_heatmap(records, "lambda1").rows())
        write_table(out / "heatmap_counts.csv", *_counts_rows(heatmaps["lgm"]))
        write_table(out / "avg_kld_by_subject.csv", *marginal_average(heatmaps, axis=1))
        write_table(out / "avg_kld_by_activity.csv", *marginal_average(heatmaps, axis=0))

    summary = {"trials": len(manifest), "succeeded": len(records), "failed": len(failures), "out_dir": str(out)}
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK


def _counts_rows(hm):
    header = ["subject"] + list(hm.col_labels)
    return header, [[s] + [int(c) for c in hm.counts[i]] for i, s in enumerate(hm.row_labels)]


# ----------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="lgmix", description="Laplacian-Gaussian mixture fitting and evaluation for signal amplitudes."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit all three models to one trial file and report")
    p.add_argument("input")
    _add_fit_flags(p)
    p.add_argument("--curves", action="store_true", help="also write the density-curve table")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("batch", help="fit and evaluate every trial in a manifest")
    p.add_argument("manifest")
    _add_fit_flags(p)
    p.add_argument("--out-dir")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("synth", help="write samples drawn from an LGM")
    p.add_argument("--lambda1", type=float, required=True)
    p.add_argument("--mu1", type=float, default=0.0)
    p.add_argument("--sigma1", type=float, required=True)
    p.add_argument("--mu2", type=float, default=0.0)
    p.add_argument("--sigma2-sq", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="evaluate given LGM parameters without refitting")
    p.add_argument("input")
    p.add_argument("params", help="JSON parameters, or a report written by 'fit'")
    p.add_argument("--bins", type=_bins, default="auto")
    p.add_argument("--header", action="store_true")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except LgmError as exc:
        print(f"lgmix {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
