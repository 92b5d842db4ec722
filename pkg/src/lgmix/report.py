"""Per-trial evaluation reports and their aggregation into heatmap tables.

Reports are written as one JSON object per line with sorted keys, so equal
inputs give byte-identical files. Tables are comma-separated text.
"""

from __future__ import annotations

import csv
import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .distributions import GaussianParams, LaplacianParams, LgmParams
from .em import EmConfig, FitResult, fit_gaussian, fit_laplacian, fit_lgm, sample_hash
from .evaluation import (
    empirical_pdf,
    goodness_of_fit,
    kld_empirical_vs_model,
    likelihood_ratio_test,
)

MODELS = ("lgm", "laplacian", "gaussian")


@dataclass
class EvalReport:
    meta: dict
    data_hash: str
    n_samples: int
    bins: int
    lgm: LgmParams
    laplacian: LaplacianParams
    gaussian: GaussianParams
    kld: dict
    gof: dict
    lrt: dict
    em: dict = field(default_factory=dict)

    def to_dict(self):
        return _clean(
            {
                "meta": self.meta,
                "data_hash": self.data_hash,
                "n_samples": self.n_samples,
                "bins": self.bins,
                "params": {
                    "lgm": self.lgm.to_dict(),
                    "laplacian": self.laplacian.to_dict(),
                    "gaussian": self.gaussian.to_dict(),
                },
                "kld": {k: v.d_kl for k, v in self.kld.items()},
                "kld_bins_used": self.kld["lgm"].bins_used,
                "gof": {k: v.summary() for k, v in self.gof.items()},
                "lrt": {k: v.to_dict() for k, v in self.lrt.items()},
                "em": self.em,
            }
        )

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _clean(obj):
    # JSON has no NaN; undefined intervals become null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def evaluate(y, lgm: LgmParams, *, bins="auto", meta=None, fit: FitResult | None = None) -> EvalReport:
    """Run the full evaluation battery for given LGM parameters.

    The Laplacian and Gaussian baselines are always fitted here, on the same
    array, so the likelihood-ratio tests have their null fits.
    """
    y = np.asarray(y, dtype=float)
    h = sample_hash(y)
    lap = fit_laplacian(y)
    gau = fit_gaussian(y)
    models = {"lgm": lgm, "laplacian": lap, "gaussian": gau}

    mpdf = empirical_pdf(y, bins)
    kld = {name: kld_empirical_vs_model(mpdf, m, name) for name, m in models.items()}
    gof = {name: goodness_of_fit(y, m) for name, m in models.items()}
    hashes = (fit.data_hash,) if fit is not None else ()
    lrt = {
        name: likelihood_ratio_test(y, lgm, models[name], name, data_hashes=hashes)
        for name in ("laplacian", "gaussian")
    }
    em = {}
    if fit is not None:
        em = {
            "iterations": fit.trace.iterations,
            "converged": fit.trace.converged,
            "final_loglik": fit.final_loglik,
            "restart": fit.restart,
            "n1": fit.n1,
            "n2": fit.n2,
        }
    return EvalReport(
        meta=dict(meta or {}),
        data_hash=h,
        n_samples=int(y.size),
        bins=int(mpdf.mass.size),
        lgm=lgm,
        laplacian=lap,
        gaussian=gau,
        kld=kld,
        gof=gof,
        lrt=lrt,
        em=em,
    )


def fit_and_evaluate(y, cfg: EmConfig, seed=0, *, bins="auto", meta=None) -> EvalReport:
    fit = fit_lgm(y, cfg, seed)
    return evaluate(y, fit.params, bins=bins, meta=meta, fit=fit)


def curves_table(y, report: EvalReport, bins="auto"):
    """Rows of (bin center, empirical density, three model densities)."""
    mpdf = empirical_pdf(y, bins)
    x = mpdf.centers
    cols = [x, mpdf.density, report.lgm.pdf(x), report.laplacian.pdf(x), report.gaussian.pdf(x)]
    header = ["y", "mpdf", "lgm", "laplacian", "gaussian"]
    return header, np.column_stack(cols)


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else _fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# ----------------------------------------------------------------------------
# Aggregation over a batch
# ----------------------------------------------------------------------------

@dataclass
class HeatmapMatrix:
    row_labels: list
    col_labels: list
    values: np.ndarray  # NaN where a cell has no trials
    counts: np.ndarray
    metric_name: str

    def rows(self):
        header = ["subject"] + list(self.col_labels)
        body = []
        for i, label in enumerate(self.row_labels):
            cells = [None if self.counts[i, j] == 0 else float(self.values[i, j]) for j in range(len(self.col_labels))]
            body.append([label] + cells)
        return header, body


def _ordered_labels(records, key):
    return list(OrderedDict.fromkeys(r["meta"][key] for r in records))


def report_metric(record, metric):
    if metric.startswith("kld_"):
        return record["kld"][metric[4:]]
    if metric == "lambda1":
        return record["params"]["lgm"]["lambda1"]
    if metric.startswith("r2_"):
        return record["gof"][metric[3:]]["r_squared"]
    raise KeyError(metric)


def build_heatmap(records, metric) -> HeatmapMatrix:
    """Subject x activity mean of ``metric`` over each cell's available trials."""
    subjects = _ordered_labels(records, "subject")
    activities = _ordered_labels(records, "activity")
    si = {s: i for i, s in enumerate(subjects)}
    ai = {a: j for j, a in enumerate(activities)}
    sums = np.zeros((len(subjects), len(activities)))
    counts = np.zeros((len(subjects), len(activities)), dtype=int)
    for r in records:
        i, j = si[r["meta"]["subject"]], ai[r["meta"]["activity"]]
        sums[i, j] += report_metric(r, metric)
        counts[i, j] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return HeatmapMatrix(subjects, activities, values, counts, metric)


def marginal_average(heatmaps, axis):
    """Average each model's heatmap over activities (``axis=1``) or subjects (``axis=0``).

    Empty cells are dropped; the number of cells averaged is reported.
    """
    first = heatmaps[MODELS[0]]
    labels = first.row_labels if axis == 1 else first.col_labels
    header = ["subject" if axis == 1 else "activity"] + [f"kld_{m}" for m in MODELS] + ["n_cells"]
    present = first.counts > 0
    n_cells = present.sum(axis=axis)
    rows = []
    for k, label in enumerate(labels):
        row = [label]
        for m in MODELS:
            vals = heatmaps[m].values
            line = vals[k, :] if axis == 1 else vals[:, k]
            mask = present[k, :] if axis == 1 else present[:, k]
            row.append(float(line[mask].mean()) if mask.any() else None)
        row.append(int(n_cells[k]))
        rows.append(row)
    return header, rows
