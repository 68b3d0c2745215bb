"""Random structures, symmetry-reduced similarity and cluster superposition."""

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .dynamics import Structure
from .errors import DimensionMismatchError

_Z = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class AlignmentTransform:
    """Relabel intermediates, optionally mirror, then rotate about the axis.

    ``permutation[i]`` is the site of B matched to site ``i`` of A (full
    site indices, terminals fixed).  The mirror negates the second planar
    coordinate in the canonical frame and is applied before the rotation.
    """

    permutation: tuple
    angle: float
    mirror: bool

    def __post_init__(self):
        p = self.permutation
        n = len(p)
        if sorted(p) != list(range(n)) or (n and (p[0] != 0 or p[-1] != n - 1)):
            raise ValueError("permutation must be a bijection fixing input and output")

    @classmethod
    def identity(cls, n):
        return cls(tuple(range(n)), 0.0, False)


@dataclass(frozen=True)
class SimilarityResult:
    s: float
    transform: AlignmentTransform


def _uniform_array(stream, count):
    return np.array(stream.uniforms(count))


def generate_structure(stream, n, id=0):
    """Input/output on opposite cube corners, ``n - 2`` uniform intermediates.

    Mirrors :func:`excitrans._kernels.draw_structure` draw for draw, so a
    campaign structure can be regenerated from its stream alone.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    coords = np.zeros((n, 3))
    coords[-1] = 1.0
    while True:
        if n > 2:
            coords[1:-1] = _uniform_array(stream, 3 * (n - 2)).reshape(n - 2, 3)
        if n == 2 or K.min_pair_distance(coords) > K.MIN_DISTANCE:
            return Structure(id, coords)


def displace(s, stream, side, move_terminals=True):
    """Shift every site by an independent uniform offset in ``[-side/2, side/2]^3``."""
    if side < 0:
        raise ValueError("side must be non-negative")
    lo, hi = (0, s.n) if move_terminals else (1, s.n - 1)
    while True:
        out = s.coords.copy()
        if hi > lo:
            u = _uniform_array(stream, 3 * (hi - lo)).reshape(hi - lo, 3)
            out[lo:hi] += side * (u - 0.5)
        if K.min_pair_distance(out) > K.MIN_DISTANCE:
            return s.with_coords(out)


def _axis_rotation(u):
    """Proper rotation taking unit vector ``u`` onto the third axis."""
    c = float(u @ _Z)
    v = np.cross(u, _Z)
    if c < -1.0 + 1e-15:
        return np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def frame_rotation(s):
    d = s.coords[-1] - s.coords[0]
    return _axis_rotation(d / np.linalg.norm(d))


def canonical_frame(s):
    """Rigid copy with the input at the origin and the output on the +z axis."""
    r = frame_rotation(s)
    return s.with_coords((s.coords - s.coords[0]) @ r.T)


def optimal_rotation(points_a, points_b):
    """Angle minimising ``sum |R(angle) b_i - a_i|^2`` for planar points.

    ``R`` is the counter-clockwise rotation about the in/out axis.  Returns
    0 when the problem is rotationally degenerate.
    """
    a = np.asarray(points_a, dtype=float)[:, :2]
    b = np.asarray(points_b, dtype=float)[:, :2]
    dot = float(np.sum(a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]))
    cross = float(np.sum(a[:, 1] * b[:, 0] - a[:, 0] * b[:, 1]))
    if dot == 0.0 and cross == 0.0:
        return 0.0
    return float(np.arctan2(cross, dot) % (2.0 * np.pi))


def planar_rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@lru_cache(maxsize=None)
def intermediate_permutations(m):
    """All permutations of ``range(m)`` as an int array, identity first."""
    if m == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.permutations(range(m))), dtype=np.int64)


def canonical_intermediates(s):
    """Intermediate sites of ``s`` in its canonical frame, contiguous."""
    return np.ascontiguousarray(canonical_frame(s).coords[1:-1])


def apply_transform(s, transform):
    """``s`` expressed in the canonical frame and mapped by ``transform``."""
    c = canonical_frame(s).coords[list(transform.permutation)]
    if transform.mirror:
        c = c * np.array([1.0, -1.0, 1.0])
    return s.with_coords(c @ planar_rotation(transform.angle).T)


def similarity(a, b):
    """Minimal RMS site mismatch over relabelings, axis rotations and mirror.

    The divisor is the total site count; input and output coincide in the
    canonical frame and contribute zero mismatch.
    """
    if a.n != b.n:
        raise DimensionMismatchError(f"site counts differ: {a.n} vs {b.n}")
    m = a.n - 2
    perms = intermediate_permutations(m)
    cost, r, mirror, angle = K.best_alignment(
        canonical_intermediates(a), canonical_intermediates(b), perms)
    perm = (0,) + tuple(int(p) + 1 for p in perms[r]) + (a.n - 1,)
    return SimilarityResult(float(np.sqrt(max(cost, 0.0) / a.n)),
                            AlignmentTransform(perm, float(angle), bool(mirror)))


def superpose_cluster(members, degrees, stream):
    """Align a cluster onto its best-connected member and denoise.

    Every member is mapped onto the reference (highest degree, lowest id on
    ties) by its optimal transform and returned in the reference's cube
    frame.  For clusters of three or more, each aligned copy is averaged
    site by site with two other aligned members drawn at random.
    """
    if not members:
        raise ValueError("empty cluster")
    ref = min(members, key=lambda s: (-degrees[s.id], s.id))
    back = frame_rotation(ref)
    origin = ref.coords[0]
    aligned = []
    for s in members:
        t = similarity(ref, s).transform
        c = apply_transform(s, t).coords @ back + origin
        aligned.append(s.with_coords(c))
    if len(aligned) < 3:
        return aligned
    out = []
    k = len(aligned)
    for i, s in enumerate(aligned):
        j = stream.integers(k - 1)
        j += j >= i
        rest = [x for x in range(k) if x != i and x != j]
        l = rest[stream.integers(k - 2)]
        avg = (s.coords + aligned[j].coords + aligned[l].coords) / 3.0
        out.append(s.with_coords(avg))
    return out


def jitter(s, stream, scale):
    """Intermediates shifted by uniform noise of half-width ``scale``."""
    out = s.coords.copy()
    if s.n > 2:
        u = _uniform_array(stream, 3 * (s.n - 2)).reshape(s.n - 2, 3)
        out[1:-1] += scale * (2.0 * u - 1.0)
    return s.with_coords(out)

