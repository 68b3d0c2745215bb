"""Tidy tables behind each figure panel, written to ``<out>/figures/``.

One CSV per panel; any plotting tool can rebuild the panels from them.
"""

import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import io
from . import pipeline as P
from .errors import MissingInputError

S_BINS = np.linspace(0.0, 1.0, 201)
ROBUSTNESS_BINS = np.linspace(-0.1, 0.5, 61)


def _efficiency(out, dest):
    rows = io.read_csv(out / P.HISTOGRAM)
    io.write_csv(dest / "efficiency_histogram.csv", ["bin_lo", "bin_hi", "count"],
                 ((float(r["bin_lo"]), float(r["bin_hi"]), int(r["count"])) for r in rows))


def _similarity(out, dest):
    s = np.array([float(r["s"]) for r in io.read_csv(out / P.SIMILARITIES)])
    hits = P.load_hits(out)
    n = hits[0][0].n if hits else 0
    counts, _ = np.histogram(s, S_BINS)
    total = max(1, s.size)
    io.write_csv(dest / "s_distribution.csv", ["n_sites", "bin_lo", "bin_hi", "count", "fraction"],
                 ((n, lo, hi, k, k / total) for lo, hi, k in zip(S_BINS[:-1], S_BINS[1:], counts)))
    info = json.loads((out / P.NETWORK).read_text())
    io.write_csv(dest / "s_summary.csv",
                 ["n_sites", "pairs", "mean_s", "cutoff", "fraction_above_0.15"],
                 [(n, s.size, float(s.mean()) if s.size else float("nan"), info["cutoff"],
                   float(np.mean(s > 0.15)) if s.size else float("nan"))])


def _populations(out, dest):
    by_p = defaultdict(list)
    for r in io.read_csv(out / P.SCAN):
        by_p[float(r["p"])].append(int(r["cluster"]))
    rows = []
    for p in sorted(by_p):
        pops = np.bincount(by_p[p])
        order = np.argsort(-pops, kind="stable")
        for rank, c in enumerate(order):
            rows.append((p, rank, int(c), int(pops[c]), pops[c] / pops.sum()))
    io.write_csv(dest / "cluster_populations.csv",
                 ["p", "rank", "cluster", "population", "fraction"], rows)


def _consistency(out, dest):
    c = P.load_curve(out)
    io.write_csv(dest / "consistency.csv", ["p", "c_raw", "c_normalized", "n_clusters"],
                 zip(c.p_values, c.c_raw, c.c_values, c.n_clusters))


def _ipr(out, dest):
    rows = io.read_csv(out / P.IPR_HIST)
    io.write_csv(dest / "ipr_distribution.csv", ["cluster", "bin_lo", "bin_hi", "count"],
                 ((int(r["cluster"]), float(r["bin_lo"]), float(r["bin_hi"]), int(r["count"]))
                  for r in rows))


def _ablation(out, dest):
    eps = {s.id: e for s, e in P.load_hits(out)}
    rows = io.read_csv(out / P.ABLATION)
    io.write_csv(dest / "ablation_vs_eps.csv",
                 ["id", "cluster", "eps", "group", "loss", "joint_loss"],
                 ((int(r["id"]), int(r["cluster"]), eps[int(r["id"])], r["group"],
                   float(r["loss"]), float(r["joint_loss"])) for r in rows))
    per = defaultdict(list)
    for r in rows:
        per[(int(r["id"]), int(r["cluster"]))].append(r)
    coll = [(i, c, sum(float(r["loss"]) for r in rs), float(rs[0]["joint_loss"]), len(rs))
            for (i, c), rs in sorted(per.items()) if len(rs) >= 2]
    io.write_csv(dest / "collectiveness.csv",
                 ["id", "cluster", "sum_individual", "joint_loss", "groups"], coll)


def _spectra(out, dest):
    labels, _ = P.load_labels(out)
    bare, shift = defaultdict(dict), defaultdict(dict)
    for r in io.read_csv(out / P.SPECTRA):
        i, k = int(r["id"]), int(r["index"])
        if r["kind"] == "backbone":
            bare[i][k] = float(r["lambda"])
        elif r["kind"] == "shift":
            shift[i][k] = float(r["lambda"])
    rows = []
    for i in sorted(shift):
        for k in sorted(shift[i]):
            rows.append((i, labels.get(i, -1), k, bare[i][k] + shift[i][k], bare[i][k], shift[i][k]))
    io.write_csv(dest / "eigenvalue_shift.csv",
                 ["id", "cluster", "index", "lambda_full", "lambda_backbone", "shift"], rows)


def _robustness(out, dest):
    per = defaultdict(list)
    for r in io.read_csv(out / P.ROBUSTNESS):
        per[int(r["cluster"])].append(float(r["delta_eps"]))
    rows, summary = [], []
    for c in sorted(per):
        counts, _ = np.histogram(per[c], ROBUSTNESS_BINS)
        rows.extend((c, lo, hi, k) for lo, hi, k in
                    zip(ROBUSTNESS_BINS[:-1], ROBUSTNESS_BINS[1:], counts))
        summary.append((c, len(per[c]), float(np.mean(per[c])), float(np.median(per[c]))))
    io.write_csv(dest / "robustness_distribution.csv", ["cluster", "bin_lo", "bin_hi", "count"], rows)
    io.write_csv(dest / "robustness_summary.csv",
                 ["cluster", "count", "mean_delta_eps", "median_delta_eps"], summary)


KINDS = {
    "efficiency": ((P.HISTOGRAM,), _efficiency),
    "similarity": ((P.SIMILARITIES, P.NETWORK, P.HITS), _similarity),
    "populations": ((P.SCAN,), _populations),
    "consistency": ((P.CONSISTENCY,), _consistency),
    "ipr": ((P.IPR_HIST,), _ipr),
    "ablation": ((P.ABLATION, P.HITS), _ablation),
    "spectra": ((P.SPECTRA, P.CLUSTERS), _spectra),
    "robustness": ((P.ROBUSTNESS,), _robustness),
}


def emit_figure_data(out, kinds=None):
    """Write the requested panel tables; by default every panel whose inputs exist.

    Explicitly requested kinds with missing inputs raise MissingInputError.
    """
    out = Path(out)
    io.load_manifest(out)
    dest = out / "figures"
    dest.mkdir(exist_ok=True)
    explicit = kinds is not None
    kinds = list(KINDS) if kinds is None else list(kinds)
    written = []
    for kind in kinds:
        if kind not in KINDS:
            raise ValueError(f"unknown figure kind {kind!r}; choose from {sorted(KINDS)}")
        needs, func = KINDS[kind]
        missing = [n for n in needs if not (out / n).exists()]
        if missing:
            if explicit:
                raise MissingInputError(f"figure {kind!r} needs {', '.join(missing)} in {out}")
            continue
        func(out, dest)
        written.append(kind)
    return written
