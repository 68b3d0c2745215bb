"""Robustness, active/inactive modules and their spectral signature."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels as K
from .dynamics import (N_GRID, WINDOW, build_hamiltonian, efficiency,
                       eigendecompose, trajectory)
from .errors import CoincidentSitesError, NonConvergenceError, SpectrumClassificationError
from .network import UnionFind
from .seeding import derive

LINK_CUT = 0.35
OCC_CUT = 0.1
LOCALIZATION_CUT = 0.5
AMBIGUOUS = (0.4, 0.6)


@dataclass(frozen=True)
class RobustnessResult:
    eps: float
    delta_eps: float
    std: float
    trials: int
    side: float


@dataclass(frozen=True)
class ModulePartition:
    backbone: tuple
    inactive_groups: tuple
    link_cut: float = LINK_CUT
    occ_cut: float = OCC_CUT


@dataclass(frozen=True)
class AblationResult:
    eps: float
    groups: tuple
    per_group_loss: tuple
    joint_loss: float

    @property
    def sum_of_individual(self):
        return float(sum(self.per_group_loss))


@dataclass(frozen=True, eq=False)
class SpectrumShift:
    full_eigenvalues: np.ndarray
    backbone_eigenvalues: np.ndarray
    localization_weights: np.ndarray
    backbone_localized: np.ndarray  # indices into full_eigenvalues
    matched_shifts: np.ndarray


def trial_efficiencies(s, seed, trials=1000, side=0.05, move_terminals=True,
                       window=WINDOW, n_grid=N_GRID):
    """Efficiencies of ``trials`` displaced copies; trial k uses stream (seed, id, k)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    out = np.empty(trials)
    base = np.uint64(derive(seed, s.id))
    status = K.robustness_trials(s.coords, base, int(trials), float(side),
                                 bool(move_terminals), float(window), int(n_grid), out)
    if status == K.ERR_NOCONVERGE:
        raise NonConvergenceError(f"structure {s.id}: eigensolver did not converge")
    if status != K.OK:
        raise CoincidentSitesError(f"structure {s.id}: coincident sites")
    return out


def robustness(s, seed, trials=1000, side=0.05, move_terminals=True, window=WINDOW):
    """Mean efficiency loss under independent uniform site displacements."""
    eps = efficiency(s, window).efficiency
    if side == 0:
        return RobustnessResult(eps, 0.0, 0.0, trials, 0.0)
    e = trial_efficiencies(s, seed, trials, side, move_terminals, window)
    std = float(e.std(ddof=1)) if trials > 1 else 0.0
    return RobustnessResult(eps, eps - float(e.mean()), std, trials, float(side))


def detect_modules(s, traj=None, link_cut=LINK_CUT, occ_cut=OCC_CUT, window=WINDOW):
    """Split sites into backbone and tightly packed, never-populated groups.

    Intermediate sites are grouped by single linkage at ``link_cut``.  A
    group of two or three is inactive when none of its members ever exceeds
    ``occ_cut`` occupation within the window.
    """
    if traj is None:
        traj = trajectory(s, window=window)
    occ = traj.max_occupation()
    inner = list(range(1, s.n - 1))
    uf = UnionFind(s.n)
    for x in inner:
        for y in inner:
            if x < y and np.linalg.norm(s.coords[x] - s.coords[y]) <= link_cut:
                uf.union(x, y)
    groups = {}
    for x in inner:
        groups.setdefault(uf.find(x), []).append(x)
    inactive = []
    for g in groups.values():
        if 2 <= len(g) <= 3 and all(occ[i] < occ_cut for i in g):
            inactive.append(tuple(sorted(g)))
    inactive.sort()
    flagged = {i for g in inactive for i in g}
    backbone = tuple(i for i in range(s.n) if i not in flagged)
    return ModulePartition(backbone, tuple(inactive), float(link_cut), float(occ_cut))


def ablate(s, groups, window=WINDOW):
    """Efficiency loss on removing each group, and all of them together.

    The window is kept at its full-structure value.
    """
    groups = tuple(tuple(int(i) for i in g) for g in groups)
    flat = [i for g in groups for i in g]
    if len(flat) != len(set(flat)):
        raise ValueError("groups must be disjoint")
    eps = efficiency(s, window).efficiency
    losses = tuple(eps - efficiency(s.without(g), window).efficiency for g in groups)
    joint = eps - efficiency(s.without(flat), window).efficiency
    return AblationResult(eps, groups, losses, joint)


def spectrum_shift(s, part, cut=LOCALIZATION_CUT, ambiguous=AMBIGUOUS):
    """Compare backbone-localised eigenvalues with those of the bare backbone."""
    if not part.inactive_groups:
        raise ValueError("partition has no inactive group")
    full = eigendecompose(build_hamiltonian(s))
    bb = list(part.backbone)
    bare = eigendecompose(build_hamiltonian(s.with_coords(s.coords[bb])))
    weights = np.sum(full.eigenvectors[bb] ** 2, axis=0)
    localized = np.nonzero(weights >= cut)[0]
    lo, hi = ambiguous
    if localized.size != len(bb) or np.any((weights > lo) & (weights < hi)):
        raise SpectrumClassificationError(
            f"structure {s.id}: {localized.size} backbone-localised states for a "
            f"{len(bb)}-site backbone; weights {np.round(weights, 3).tolist()}",
            weights=weights)
    shifts = full.eigenvalues[localized] - bare.eigenvalues
    return SpectrumShift(full.eigenvalues, bare.eigenvalues, weights, localized, shifts)


def _ladder_residual(diffs, w0):
    """RMS distance of ``diffs`` from multiples of ``w0``, in units of ``w0``; vectorised over ``w0``."""
    w = np.asarray(w0, dtype=float)[..., None]
    r = np.sqrt(np.mean((diffs - w * np.rint(diffs / w)) ** 2, axis=-1)) / w[..., 0]
    return float(r) if r.ndim == 0 else r


def commensurability(eigenvalues, window=WINDOW, span=(0.5, 8.0), n_scan=4000):
    """How far eigenvalue gaps are from integer multiples of one frequency.

    ``eigenvalues`` may be a :class:`SpectrumShift` (its backbone-localised
    eigenvalues are used) or a plain array.  The fundamental is searched in
    ``(2 pi / window) * span``.  Returns ``(score, omega0)``; the score is the
    RMS deviation of gaps from the nearest multiples in units of the
    fundamental, 0 for an exact ladder.
    """
    if isinstance(eigenvalues, SpectrumShift):
        eigenvalues = eigenvalues.full_eigenvalues[eigenvalues.backbone_localized]
    lam = np.sort(np.asarray(eigenvalues, dtype=float))
    if lam.size < 2:
        raise ValueError("need at least two eigenvalues")
    diffs = lam[1:] - lam[0]
    base = 2.0 * np.pi / window
    lo, hi = base * span[0], base * span[1]
    grid = np.geomspace(lo, hi, n_scan)
    # exact divisors of each gap are candidate fundamentals too
    m = np.arange(1, int(np.ceil(diffs.max() / lo)) + 2)
    exact = (diffs[:, None] / m[None, :]).ravel()
    cand = np.concatenate([grid, exact[(exact >= lo) & (exact <= hi)]])
    scores = _ladder_residual(diffs, cand)
    best = int(np.argmin(scores))
    w_best, s_best = cand[best], scores[best]
    step = grid[1] / grid[0]
    res = minimize_scalar(lambda w: _ladder_residual(diffs, w),
                          bounds=(max(lo, w_best / step), min(hi, w_best * step)),
                          method="bounded", options={"xatol": 1e-12})
    if res.fun < s_best:
        w_best, s_best = float(res.x), float(res.fun)
    return float(s_best), float(w_best)
