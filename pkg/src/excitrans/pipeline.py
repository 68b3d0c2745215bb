"""Campaign stages and the files they exchange.

Every stage reads its inputs from, and writes its outputs to, one output
directory.  Outputs are written atomically and depend only on their inputs
and parameters, so a stage can be re-run at any time.  ``manifest.json``
records the configuration, library versions, the random generator and the
SHA-256 of every artifact.
"""

import json
import logging
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis, geometry, io, network
from .campaign import parallel_map, screen, write_summary
from .dynamics import WINDOW, Structure, max_ipr, trajectory
from .errors import MissingInputError, SpectrumClassificationError
from .seeding import GENERATOR_NAME, SplitMix64

log = logging.getLogger(__name__)

STAGES = ("screen", "network", "consistency", "cluster", "superpose", "ipr",
          "robustness", "ablate", "spectra", "figures")

HITS = "hits.jsonl"
HISTOGRAM = "efficiency_histogram.csv"
SUMMARY = "summary.json"
SIMILARITIES = "similarities.csv"
EDGES = "edges.csv"
NETWORK = "network.json"
CONSISTENCY = "consistency.csv"
SCAN = "scan_assignments.csv"
CLUSTERS = "clusters.csv"
REPORT = "cluster_report.csv"
SUPERPOSED = "superposed.jsonl"
IPR = "ipr.csv"
IPR_HIST = "ipr_histogram.csv"
ROBUSTNESS = "robustness.csv"
MODULES = "modules.csv"
ABLATION = "ablation.csv"
SPECTRA = "spectra.csv"
COMMENSURABILITY = "commensurability.csv"

# stream tags keep the per-stage random sources apart
_SUPERPOSE_TAG = 0x5350


def _versions():
    import numba
    import scipy
    return {"excitrans": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__}


def _record(out, stage, params, outputs):
    out = Path(out)
    manifest = io.load_manifest(out) or {
        "schema_version": io.SCHEMA_VERSION,
        "generator": {"name": GENERATOR_NAME,
                      "structure_stream": "derive(seed, structure_id)",
                      "trial_stream": "derive(seed, structure_id, trial)"},
        "stages": {},
    }
    manifest["versions"] = _versions()
    manifest["stages"][stage] = {
        "params": params,
        "outputs": {name: io.file_hash(out / name) for name in outputs},
    }
    io.save_manifest(out, manifest)


def _check_dir(out):
    out = Path(out)
    io.load_manifest(out)
    return out


def _window(out):
    m = io.load_manifest(out)
    if m and "screen" in m["stages"]:
        return float(m["stages"]["screen"]["params"]["window"])
    return WINDOW


def load_hits(out):
    return [(s, rec["eps"]) for s, rec in io.read_structures(Path(out) / HITS)]


def load_labels(out):
    rows = io.read_csv(Path(out) / CLUSTERS)
    return {int(r["id"]): int(r["cluster"]) for r in rows}, float(rows[0]["p"]) if rows else None


# -- stages -----------------------------------------------------------------

def run_screen(cfg):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _check_dir(out)
    summary, hits = screen(cfg)
    io.write_structures(out / HITS, hits)
    edges = np.linspace(0.0, 1.0, 101)
    io.write_csv(out / HISTOGRAM, ["bin_lo", "bin_hi", "count"],
                 zip(edges[:-1], edges[1:], summary.efficiency_histogram))
    write_summary(out / SUMMARY, summary)
    _record(out, "screen", cfg.artifact_config(), [HITS, HISTOGRAM, SUMMARY])
    return summary


def run_network(out, coverage=0.999):
    out = _check_dir(out)
    structures = [s for s, _ in load_hits(out)]
    if len(structures) < 2:
        raise MissingInputError(f"{out / HITS}: need at least two efficient structures")
    cand = network.pairwise_similarities(structures)
    cutoff = network.select_cutoff(cand, coverage)
    net = network.build_network(cand, cutoff)
    io.write_csv(out / SIMILARITIES, ["id_a", "id_b", "s"], cand.rows())
    io.write_csv(out / EDGES, ["id_a", "id_b", "s"],
                 zip(net.node_ids[net.a].tolist(), net.node_ids[net.b].tolist(), net.s.tolist()))
    info = {"cutoff": cutoff, "coverage": coverage, "n_nodes": int(net.n_nodes),
            "n_edges": int(net.n_edges), "node_ids": net.node_ids.tolist()}
    (out / NETWORK).write_text(json.dumps(info) + "\n")
    _record(out, "network", {"coverage": coverage}, [SIMILARITIES, EDGES, NETWORK])
    return net


def load_network(out):
    """Network from ``edges.csv``; nodes from ``network.json`` or the hits if present."""
    out = Path(out)
    rows = io.read_csv(out / EDGES)
    ids = set()
    cutoff = None
    if (out / NETWORK).exists():
        info = json.loads((out / NETWORK).read_text())
        ids.update(info["node_ids"])
        cutoff = info["cutoff"]
    elif (out / HITS).exists():
        ids.update(s.id for s, _ in load_hits(out))
    for r in rows:
        ids.update((int(r["id_a"]), int(r["id_b"])))
    node_ids = np.array(sorted(ids), dtype=np.int64)
    pos = {int(i): k for k, i in enumerate(node_ids)}
    a = np.array([pos[int(r["id_a"])] for r in rows], dtype=np.int64)
    b = np.array([pos[int(r["id_b"])] for r in rows], dtype=np.int64)
    s = np.array([float(r["s"]) for r in rows])
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    if cutoff is None:
        cutoff = float(s.max()) if s.size else 1.0
    deg = np.bincount(np.concatenate([lo, hi]), minlength=node_ids.shape[0])
    return network.EfficiencyNetwork(node_ids, lo, hi, s, cutoff,
                                     dict(zip(node_ids.tolist(), deg.tolist())))


def run_consistency(out, p_grid=network.DEFAULT_P_GRID, self_loops=True):
    out = _check_dir(out)
    net = load_network(out)
    curve, assignments = network.consistency_scan(net, p_grid, self_loops)
    io.write_csv(out / CONSISTENCY, ["p", "c_raw", "c_normalized", "n_clusters"],
                 zip(curve.p_values, curve.c_raw, curve.c_values, curve.n_clusters))
    rows = []
    for p in curve.p_values:
        a = assignments[p]
        rows.extend((i, c, p) for i, c in zip(a.node_ids.tolist(), a.labels.tolist()))
    io.write_csv(out / SCAN, ["id", "cluster", "p"], rows)
    _record(out, "consistency", {"p_grid": list(curve.p_values), "self_loops": self_loops},
            [CONSISTENCY, SCAN])
    return curve


def load_curve(out):
    rows = io.read_csv(Path(out) / CONSISTENCY)
    return network.ConsistencyCurve(
        tuple(float(r["p"]) for r in rows), tuple(float(r["c_raw"]) for r in rows),
        tuple(float(r["c_normalized"]) for r in rows), tuple(int(r["n_clusters"]) for r in rows))


def run_cluster(out, p=None, p_grid=network.DEFAULT_P_GRID, self_loops=True):
    """Cluster at ``p``; by default the granularity chosen from the consistency curve."""
    out = _check_dir(out)
    net = load_network(out)
    if p is None:
        if (out / CONSISTENCY).exists():
            curve = load_curve(out)
        else:
            curve = network.consistency_scan(net, p_grid, self_loops)[0]
        p = network.choose_granularity(curve)
    a = network.mcl(net, p, self_loops)
    io.write_csv(out / CLUSTERS, ["id", "cluster", "p"],
                 ((i, c, a.p) for i, c in zip(a.node_ids.tolist(), a.labels.tolist())))
    io.write_csv(out / REPORT, ["rank", "cluster", "population", "fraction"],
                 network.cluster_report(a))
    _record(out, "cluster", {"p": a.p, "self_loops": self_loops}, [CLUSTERS, REPORT])
    return a


def _labelled_hits(out):
    labels, p = load_labels(out)
    hits = load_hits(out)
    return [(s, e, labels[s.id]) for s, e in hits if s.id in labels], p


def run_superpose(out, seed=0):
    out = _check_dir(out)
    net = load_network(out)
    hits, _ = _labelled_hits(out)
    records = []
    for c in sorted({c for _, _, c in hits}):
        members = [s for s, _, lab in hits if lab == c]
        stream = SplitMix64.from_keys(seed, _SUPERPOSE_TAG, c)
        for s in geometry.superpose_cluster(members, net.degrees, stream):
            records.append((s, None, {"cluster": c}))
    io.write_structures(out / SUPERPOSED, records)
    _record(out, "superpose", {"seed": seed}, [SUPERPOSED])
    return records


def run_ipr(out, n_samples=2048, bins=40):
    out = _check_dir(out)
    window = _window(out)
    hits, _ = _labelled_hits(out)
    rows = []
    for s, e, c in hits:
        rows.append((s.id, c, e, max_ipr(trajectory(s, n_samples, window))))
    io.write_csv(out / IPR, ["id", "cluster", "eps", "max_ipr"], rows)
    n = hits[0][0].n if hits else 2
    edges = np.linspace(1.0, n, bins + 1)
    hist_rows = []
    for c in sorted({r[1] for r in rows}):
        vals = [r[3] for r in rows if r[1] == c]
        counts, _ = np.histogram(vals, edges)
        hist_rows.extend((c, lo, hi, k) for lo, hi, k in zip(edges[:-1], edges[1:], counts))
    io.write_csv(out / IPR_HIST, ["cluster", "bin_lo", "bin_hi", "count"], hist_rows)
    _record(out, "ipr", {"n_samples": n_samples, "bins": bins}, [IPR, IPR_HIST])
    return rows


def _robustness_job(args):
    coords, sid, seed, trials, side, move_terminals, window = args
    return analysis.robustness(Structure(sid, coords), seed, trials, side, move_terminals, window)


def run_robustness(out, trials=1000, side=0.05, seed=0, workers=1, move_terminals=True):
    out = _check_dir(out)
    window = _window(out)
    hits, _ = _labelled_hits(out)
    jobs = [(s.coords, s.id, seed, trials, side, move_terminals, window) for s, _, _ in hits]
    results = parallel_map(_robustness_job, jobs, workers)
    rows = [(s.id, r.eps, r.delta_eps, r.std, r.trials, r.side, c)
            for (s, _, c), r in zip(hits, results)]
    io.write_csv(out / ROBUSTNESS,
                 ["id", "eps", "delta_eps", "std", "trials", "side", "cluster"], rows)
    _record(out, "robustness", {"trials": trials, "side": side, "seed": seed,
                                "move_terminals": move_terminals}, [ROBUSTNESS])
    return rows


def _group_label(g):
    return "-".join(str(i) for i in g)


def run_ablate(out, link_cut=analysis.LINK_CUT, occ_cut=analysis.OCC_CUT):
    out = _check_dir(out)
    window = _window(out)
    hits, _ = _labelled_hits(out)
    mod_rows, abl_rows = [], []
    for s, e, c in hits:
        part = analysis.detect_modules(s, link_cut=link_cut, occ_cut=occ_cut, window=window)
        mod_rows.append((s.id, c, _group_label(part.backbone),
                         ";".join(_group_label(g) for g in part.inactive_groups),
                         link_cut, occ_cut))
        if not part.inactive_groups:
            continue
        r = analysis.ablate(s, part.inactive_groups, window)
        for g, loss in zip(r.groups, r.per_group_loss):
            abl_rows.append((s.id, _group_label(g), loss, r.joint_loss, c))
    io.write_csv(out / MODULES, ["id", "cluster", "backbone", "inactive_groups", "link_cut",
                                 "occ_cut"], mod_rows)
    io.write_csv(out / ABLATION, ["id", "group", "loss", "joint_loss", "cluster"], abl_rows)
    _record(out, "ablate", {"link_cut": link_cut, "occ_cut": occ_cut}, [MODULES, ABLATION])
    return abl_rows


def load_partitions(out):
    parts = {}
    for r in io.read_csv(Path(out) / MODULES):
        groups = tuple(tuple(int(i) for i in g.split("-")) for g in r["inactive_groups"].split(";") if g)
        parts[int(r["id"])] = analysis.ModulePartition(
            tuple(int(i) for i in r["backbone"].split("-")), groups,
            float(r["link_cut"]), float(r["occ_cut"]))
    return parts


def run_spectra(out):
    out = _check_dir(out)
    window = _window(out)
    hits, _ = _labelled_hits(out)
    parts = load_partitions(out)
    rows, comm = [], []
    for s, e, c in hits:
        part = parts.get(s.id)
        if part is None or not part.inactive_groups:
            continue
        try:
            sh = analysis.spectrum_shift(s, part)
        except SpectrumClassificationError as err:
            log.info("%s", err)
            for k, w in enumerate(err.weights):
                rows.append((s.id, "ambiguous", k, float("nan"), w))
            continue
        for k, (lam, w) in enumerate(zip(sh.full_eigenvalues, sh.localization_weights)):
            rows.append((s.id, "full", k, lam, w))
        for k, lam in enumerate(sh.backbone_eigenvalues):
            rows.append((s.id, "backbone", k, lam, 1.0))
        for k, d in enumerate(sh.matched_shifts):
            rows.append((s.id, "shift", k, d, sh.localization_weights[sh.backbone_localized[k]]))
        if sh.backbone_localized.size >= 2:
            score, w0 = analysis.commensurability(sh, window)
            bare, _ = analysis.commensurability(sh.backbone_eigenvalues, window)
            comm.append((s.id, c, e, score, w0, bare))
    io.write_csv(out / SPECTRA, ["id", "kind", "index", "lambda", "weight"], rows)
    io.write_csv(out / COMMENSURABILITY,
                 ["id", "cluster", "eps", "score", "omega0", "score_backbone_only"], comm)
    _record(out, "spectra", {}, [SPECTRA, COMMENSURABILITY])
    return rows


def run_all(cfg, coverage=0.999, p_grid=network.DEFAULT_P_GRID, p=None, trials=1000,
            side=0.05, link_cut=analysis.LINK_CUT, occ_cut=analysis.OCC_CUT, self_loops=True,
            move_terminals=True):
    from .figures import emit_figure_data
    out = cfg.output_dir
    run_screen(cfg)
    run_network(out, coverage)
    run_consistency(out, p_grid, self_loops)
    run_cluster(out, p, p_grid, self_loops)
    run_superpose(out, cfg.master_seed)
    run_ipr(out)
    run_robustness(out, trials, side, cfg.master_seed, cfg.workers, move_terminals)
    run_ablate(out, link_cut, occ_cut)
    run_spectra(out)
    emit_figure_data(out)
