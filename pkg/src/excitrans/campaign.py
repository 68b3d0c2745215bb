"""Monte-Carlo screening campaigns.

Structure ``k`` of a campaign is drawn from the stream ``derive(seed, k)``
and keeps ``k`` as its id.  Work is split into fixed index chunks whose
results are merged in chunk order, so outputs do not depend on the number
of worker processes.
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .dynamics import N_GRID, WINDOW, Structure
from .errors import CoincidentSitesError, NonConvergenceError
from .seeding import derive

log = logging.getLogger(__name__)

CHUNK = 50_000
N_BINS = 100


@dataclass(frozen=True)
class CampaignConfig:
    n_sites: int
    samples: int = 1_000_000
    eps_threshold: float = 0.9
    master_seed: int = 0
    workers: int = 1
    output_dir: str = "."
    window: float = WINDOW

    def __post_init__(self):
        if not 2 <= self.n_sites <= 16:
            raise ValueError("n_sites must lie in [2, 16]")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not 0.0 <= self.eps_threshold < 1.0:
            raise ValueError("eps_threshold must lie in [0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.window <= 0:
            raise ValueError("window must be positive")

    def artifact_config(self):
        """Config fields that determine artifact contents."""
        d = asdict(self)
        del d["workers"], d["output_dir"]
        return d


@dataclass
class CampaignSummary:
    samples_run: int
    hits: int
    hit_rate: float
    efficiency_histogram: list
    wall_time: float = 0.0
    max_eps: float = 0.0
    hit_ids: list = field(default_factory=list, repr=False)


def _screen_range(args):
    n, seed, start, count, threshold, window = args
    coords = np.empty((count, n, 3))
    eps = np.empty(count)
    ts = np.empty(count)
    status, k = K.screen_chunk(n, np.uint64(derive(seed)), start, count, window, N_GRID,
                               coords, eps, ts)
    if status == K.ERR_NOCONVERGE:
        raise NonConvergenceError(f"structure {start + k}: eigensolver did not converge")
    if status != K.OK:
        raise CoincidentSitesError(f"structure {start + k}: coincident sites")
    bins = np.minimum((eps * N_BINS).astype(np.int64), N_BINS - 1)
    hist = np.bincount(bins, minlength=N_BINS)
    hit = np.nonzero(eps > threshold)[0]
    return hist, start + hit, coords[hit], eps[hit], float(eps.max())


def parallel_map(func, items, workers):
    """``map`` preserving order, optionally across processes."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def screen(cfg):
    """Evaluate the campaign; returns ``(summary, hits)`` without writing files.

    ``hits`` is a list of ``(Structure, eps)`` ordered by id.
    """
    t0 = time.perf_counter()
    jobs = [(cfg.n_sites, cfg.master_seed, start, min(CHUNK, cfg.samples - start),
             cfg.eps_threshold, cfg.window) for start in range(0, cfg.samples, CHUNK)]
    hist = np.zeros(N_BINS, dtype=np.int64)
    hits = []
    max_eps = 0.0
    for h, ids, coords, eps, mx in parallel_map(_screen_range, jobs, cfg.workers):
        hist += h
        max_eps = max(max_eps, mx)
        hits.extend((Structure(int(i), c), float(e)) for i, c, e in zip(ids, coords, eps))
    wall = time.perf_counter() - t0
    summary = CampaignSummary(cfg.samples, len(hits), len(hits) / cfg.samples,
                              hist.tolist(), wall, max_eps, [s.id for s, _ in hits])
    log.info("screened %d structures (n=%d) in %.1fs: %d hits", cfg.samples,
             cfg.n_sites, wall, len(hits))
    return summary, hits


def regenerate(cfg, index):
    """The structure with id ``index`` of the campaign described by ``cfg``."""
    buf = np.empty((cfg.n_sites, 3))
    # numba returns the state as a Python int; re-wrap so it is not typed int64
    state = np.uint64(K.stream_state(np.uint64(derive(cfg.master_seed)), np.uint64(index)))
    K.draw_structure(state, cfg.n_sites, buf)
    return Structure(int(index), buf)


def summary_record(summary):
    """Deterministic part of the summary (no timing)."""
    return {"samples_run": summary.samples_run, "hits": summary.hits,
            "hit_rate": summary.hit_rate, "max_eps": summary.max_eps,
            "efficiency_histogram": summary.efficiency_histogram}


def write_summary(path, summary):
    Path(path).write_text(json.dumps(summary_record(summary), indent=2) + "\n")
