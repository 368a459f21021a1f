"""Meridian-plane meshes (s, z), s = |x'| >= 0, for axisymmetric domains.

The base mesh comes from a constrained quality Delaunay triangulation
graded toward the singular point; finer levels are uniform red refinements,
so the finite-element spaces are nested and the boundary polygon is fixed.
Curved boundaries are replaced by polygons lying inside the true domain:
vertices on convex outer arcs sit on the arc, vertices on arcs bounding an
excluded disc are pushed outward so that every chord clears the disc.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import triangle

from ..speclog import DomainError

__all__ = [
    "KINDS",
    "MeridianDomain",
    "MeridianMesh",
    "Piece",
    "build_meridian_mesh",
    "refine_uniform",
    "mesh_levels",
    "min_angle_deg",
    "dump_mesh",
    "load_mesh",
]

KINDS = ("annulus-offcenter", "cap-sector", "half-ball", "ball-minus-ball", "custom-polygon")
TAGS = {"dirichlet": 1, "axis": 2}


@dataclass(frozen=True)
class Piece:
    """Boundary curve: a segment or a circular arc (center, radius, angles).

    ``role`` is 'outer' for arcs with the domain on the concave side and
    'hole' for arcs bounding an excluded disc.
    """

    tag: str
    start: tuple
    end: tuple
    center: tuple | None = None
    radius: float = 0.0
    angles: tuple | None = None
    role: str = "outer"

    def point(self, t):
        t = np.asarray(t, dtype=float)
        if self.center is None:
            a, b = np.asarray(self.start), np.asarray(self.end)
            return a[None, :] + t[:, None] * (b - a)[None, :]
        a0, a1 = self.angles
        ang = a0 + t * (a1 - a0)
        c = np.asarray(self.center)
        return c[None, :] + self.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)

    @property
    def length(self):
        if self.center is None:
            return float(np.hypot(*(np.subtract(self.end, self.start))))
        return abs(self.angles[1] - self.angles[0]) * self.radius


@dataclass(frozen=True)
class MeridianDomain:
    kind: str
    params: dict = field(default_factory=dict)
    singularity: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown domain kind {self.kind!r}")

    @staticmethod
    def half_ball(R: float = 1.0) -> "MeridianDomain":
        if not R > 0:
            raise DomainError("R must be positive")
        return MeridianDomain("half-ball", {"R": R}, (0.0, 0.0))

    @staticmethod
    def annulus(tau: float, rho: float = 1.0) -> "MeridianDomain":
        """rho < |x| < rho (1 + tau), singular point rho e_n."""
        if not (tau > 0 and rho > 0):
            raise DomainError(f"annulus needs tau > 0 and rho > 0, got tau={tau}, rho={rho}")
        return MeridianDomain("annulus-offcenter", {"tau": tau, "rho": rho}, (0.0, rho))

    @staticmethod
    def cap_sector(theta: float, rho: float) -> "MeridianDomain":
        """{|x| < 1, x_n < cot(theta)|x'|, |x - rho e_n| > rho}, singular point 0."""
        if not 0 < theta < math.pi / 2:
            raise DomainError(f"theta must lie in (0, pi/2), got {theta}")
        if not 0 < rho < 0.5:
            raise DomainError(f"rho must lie in (0, 1/2), got {rho}")
        return MeridianDomain("cap-sector", {"theta": theta, "rho": rho}, (0.0, 0.0))

    @staticmethod
    def ball_minus_ball(r: float, rho: float) -> "MeridianDomain":
        """B_r minus the closed ball B(-2 rho e_n, 2 rho), singular point 0."""
        if not (r > 0 and rho > 0):
            raise DomainError("r and rho must be positive")
        if r >= 4 * rho:
            raise DomainError("r must be below the diameter 4 rho of the excluded ball")
        return MeridianDomain("ball-minus-ball", {"r": r, "rho": rho}, (0.0, 0.0))

    @staticmethod
    def polygon(vertices, tags, singularity=(0.0, 0.0)) -> "MeridianDomain":
        """Closed polygon; tags[i] labels the edge vertices[i] -> vertices[i+1]."""
        if len(vertices) < 3 or len(tags) != len(vertices):
            raise DomainError("polygon needs >= 3 vertices and one tag per edge")
        return MeridianDomain("custom-polygon", {"vertices": [tuple(map(float, v)) for v in vertices],
                                                  "tags": list(tags)}, tuple(singularity))

    @property
    def scales(self):
        """(near, far): feature size at the singular point and domain size."""
        p = self.params
        if self.kind == "half-ball":
            return p["R"], p["R"]
        if self.kind == "annulus-offcenter":
            width = p["rho"] * p["tau"]
            return min(p["rho"], width), min(p["rho"] * (2 + p["tau"]), width)
        if self.kind == "cap-sector":
            return min(1.0, 2 * p["rho"] * math.cos(p["theta"])), 1.0
        if self.kind == "ball-minus-ball":
            return p["r"], p["r"]
        v = np.asarray(p["vertices"])
        ext = float(np.max(np.ptp(v, axis=0)))
        return ext, ext

    def pieces(self) -> list[Piece]:
        p = self.params
        if self.kind == "half-ball":
            R = p["R"]
            return [
                Piece("dirichlet", (0.0, 0.0), (R, 0.0)),
                Piece("dirichlet", (R, 0.0), (0.0, R), (0.0, 0.0), R, (0.0, math.pi / 2)),
                Piece("axis", (0.0, R), (0.0, 0.0)),
            ]
        if self.kind == "annulus-offcenter":
            a, b = p["rho"], p["rho"] * (1 + p["tau"])
            return [
                Piece("dirichlet", (0.0, a), (0.0, -a), (0.0, 0.0), a, (math.pi / 2, -math.pi / 2), "hole"),
                Piece("axis", (0.0, -a), (0.0, -b)),
                Piece("dirichlet", (0.0, -b), (0.0, b), (0.0, 0.0), b, (-math.pi / 2, math.pi / 2)),
                Piece("axis", (0.0, b), (0.0, a)),
            ]
        if self.kind == "cap-sector":
            th, rho = p["theta"], p["rho"]
            rc = 2 * rho * math.cos(th)
            corner = (rc * math.sin(th), rc * math.cos(th))
            # small circle center (0, rho): the origin is at angle -pi/2
            phi_c = math.atan2(corner[1] - rho, corner[0])
            return [
                Piece("dirichlet", (0.0, 0.0), corner, (0.0, rho), rho, (-math.pi / 2, phi_c), "hole"),
                Piece("dirichlet", corner, (math.sin(th), math.cos(th))),
                Piece("dirichlet", (math.sin(th), math.cos(th)), (0.0, -1.0), (0.0, 0.0), 1.0,
                      (math.pi / 2 - th, -math.pi / 2)),
                Piece("axis", (0.0, -1.0), (0.0, 0.0)),
            ]
        if self.kind == "ball-minus-ball":
            r, rho = p["r"], p["rho"]
            # |x|=r meets |x + 2 rho e_n| = 2 rho at z = -r^2/(4 rho)
            zc = -r * r / (4 * rho)
            sc = math.sqrt(r * r - zc * zc)
            big_c = (0.0, -2 * rho)
            return [
                Piece("dirichlet", (0.0, 0.0), (sc, zc), big_c, 2 * rho,
                      (math.pi / 2, math.atan2(zc + 2 * rho, sc)), "hole"),
                Piece("dirichlet", (sc, zc), (0.0, r), (0.0, 0.0), r, (math.atan2(zc, sc), math.pi / 2)),
                Piece("axis", (0.0, r), (0.0, 0.0)),
            ]
        verts = p["vertices"]
        return [Piece(t, verts[i], verts[(i + 1) % len(verts)]) for i, t in enumerate(p["tags"])]


@dataclass
class MeridianMesh:
    vertices: np.ndarray  # (N, 2): columns s, z
    triangles: np.ndarray  # (T, 3), counter-clockwise
    edges: np.ndarray  # (E, 2) boundary edges
    edge_tags: np.ndarray  # (E,) codes from TAGS
    singularity: tuple
    h: float
    level: int = 0
    grading: float = 1.7

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        e = self.edges[self.edge_tags == TAGS["dirichlet"]]
        return np.unique(e)

    @property
    def free_nodes(self) -> np.ndarray:
        mask = np.ones(len(self.vertices), dtype=bool)
        mask[self.dirichlet_nodes] = False
        return np.nonzero(mask)[0]

    @property
    def max_edge(self) -> float:
        v = self.vertices[self.triangles]
        return float(np.max(np.linalg.norm(v - np.roll(v, 1, axis=1), axis=2)))

    def areas(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _size_field(domain: MeridianDomain, h: float, grading: float, levels: int):
    near, far = domain.scales
    x0 = np.asarray(domain.singularity)
    floor = near * grading ** (-levels)

    def size(pts):
        d = np.linalg.norm(np.atleast_2d(pts) - x0, axis=1)
        return h * np.clip(d, floor, far)

    return size


def _sample_piece(piece: Piece, size, dense: int = 4000):
    t = np.linspace(0.0, 1.0, dense + 1)
    pts = piece.point(t)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    # arc length measured in local mesh-size units
    loc = size(0.5 * (pts[1:] + pts[:-1]))
    units = np.concatenate([[0.0], np.cumsum(seg / loc)])
    k = max(1, int(math.ceil(units[-1])))
    if piece.center is not None:
        k = max(k, int(math.ceil(abs(piece.angles[1] - piece.angles[0]) / (math.pi / 12))))
    ts = np.interp(np.linspace(0.0, units[-1], k + 1), units, t)
    out = piece.point(ts)
    out[0], out[-1] = piece.start, piece.end
    if piece.role == "hole" and k > 1:
        out[1:-1] = _push_out(piece, ts, out)
    return out


def _push_out(piece, ts, pts):
    """Radial factors keeping each chord in a half-plane disjoint from the disc.

    Chords between interior vertices use the bisector half-plane (factor
    1/cos(gap/2)); chords ending at an arc endpoint use the tangent half-plane
    at that endpoint (factor 1/cos(gap)).
    """
    gaps = np.abs(np.diff(ts)) * abs(piece.angles[1] - piece.angles[0])
    k = len(gaps)
    need = np.ones(k + 1)
    for i in range(k):
        lo, hi = i, i + 1
        for a, b in ((lo, hi), (hi, lo)):
            if a in (0, k):
                continue
            f = 1.0 / math.cos(gaps[i]) if b in (0, k) else 1.0 / math.cos(0.5 * gaps[i])
            need[a] = max(need[a], f)
    c = np.asarray(piece.center)
    return c + (pts[1:-1] - c) * need[1:-1, None]


def _planar_graph(domain: MeridianDomain, size):
    verts, segs, marks = [], [], []
    for piece in domain.pieces():
        pts = _sample_piece(piece, size)
        base = len(verts)
        for i, q in enumerate(pts[:-1]):
            verts.append(tuple(q))
            nxt = base + i + 1
            segs.append((base + i, nxt))
            marks.append(TAGS[piece.tag])
    n = len(verts)
    segs = [(a % n, b % n) for a, b in segs]
    v = np.array(verts)
    v[np.abs(v[:, 0]) < 1e-15, 0] = 0.0
    return v, np.array(segs), np.array(marks)


def _tri_to_mesh(tri, domain, h, grading, size_levels):
    verts = np.asarray(tri["vertices"], dtype=float)
    tris = np.asarray(tri["triangles"], dtype=np.int64)
    segs = np.asarray(tri["segments"], dtype=np.int64)
    marks = np.asarray(tri["segment_markers"]).ravel()
    mesh = MeridianMesh(verts, tris, segs, marks, tuple(domain.singularity), h, 0, grading)
    a = mesh.areas()
    flip = a < 0
    mesh.triangles[flip] = mesh.triangles[flip][:, [0, 2, 1]]
    return mesh


def build_meridian_mesh(domain: MeridianDomain, h: float, grading: float = 1.7, levels: int = 6,
                        min_angle: float = 30.0, max_passes: int = 40) -> MeridianMesh:
    """Graded quality triangulation; local size h * clip(|x - x0|, near * grading^-levels, far)."""
    if not h > 0:
        raise DomainError("h must be positive")
    if grading < 1:
        raise DomainError("grading must be >= 1")
    size = _size_field(domain, h, grading, levels)
    v, segs, marks = _planar_graph(domain, size)
    x0 = np.asarray(domain.singularity)
    if not np.any(np.linalg.norm(v - x0, axis=1) < 1e-14):
        raise DomainError("singular point must be a boundary vertex of the domain")
    opts = f"pq{min_angle:g}Y"
    tri = triangle.triangulate({"vertices": v, "segments": segs, "segment_markers": marks}, opts)
    for _ in range(max_passes):
        pts = np.asarray(tri["vertices"])[np.asarray(tri["triangles"])]
        cent = pts.mean(axis=1)
        d1 = pts[:, 1] - pts[:, 0]
        d2 = pts[:, 2] - pts[:, 0]
        area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        target = math.sqrt(3) / 4 * size(cent) ** 2
        big = area > 1.5 * target
        if not big.any():
            break
        tri = triangle.triangulate({
            "vertices": tri["vertices"],
            "triangles": tri["triangles"],
            "segments": tri["segments"],
            "segment_markers": tri["segment_markers"],
            "triangle_max_area": np.where(big, target, -1.0),
        }, "r" + opts + "a")
    return _tri_to_mesh(tri, domain, h, grading, levels)


def refine_uniform(mesh: MeridianMesh) -> MeridianMesh:
    """Red refinement: every triangle split into four through edge midpoints."""
    tris = mesh.triangles
    nv = len(mesh.vertices)
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    key = np.sort(e, axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    verts = np.vstack([mesh.vertices, mids])
    T = len(tris)
    m01, m12, m20 = (nv + inv[:T], nv + inv[T:2 * T], nv + inv[2 * T:])
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    new = np.concatenate([
        np.stack([a, m01, m20], axis=1),
        np.stack([m01, b, m12], axis=1),
        np.stack([m20, m12, c], axis=1),
        np.stack([m01, m12, m20], axis=1),
    ])
    lookup = {tuple(k): i for i, k in enumerate(uniq.tolist())}
    edges, tags = [], []
    for (p, q), t in zip(mesh.edges.tolist(), mesh.edge_tags.tolist()):
        mid = nv + lookup[(min(p, q), max(p, q))]
        edges += [(p, mid), (mid, q)]
        tags += [t, t]
    return MeridianMesh(verts, new, np.array(edges), np.array(tags), mesh.singularity,
                        mesh.h / 2, mesh.level + 1, mesh.grading)


def mesh_levels(mesh: MeridianMesh, count: int) -> list[MeridianMesh]:
    out = [mesh]
    for _ in range(count - 1):
        out.append(refine_uniform(out[-1]))
    return out


def min_angle_deg(mesh: MeridianMesh) -> float:
    v = mesh.vertices[mesh.triangles]
    worst = 180.0
    for i in range(3):
        a = v[:, (i + 1) % 3] - v[:, i]
        b = v[:, (i + 2) % 3] - v[:, i]
        cosang = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        worst = min(worst, float(np.degrees(np.arccos(np.clip(cosang, -1, 1))).min()))
    return worst


_TAG_NAMES = {v: k for k, v in TAGS.items()}


def dump_mesh(mesh: MeridianMesh, path) -> None:
    """Plain text: 'v s z', 't i j k tag' and 'b i j tag' lines."""
    with open(path, "w") as fh:
        for s, z in mesh.vertices:
            fh.write(f"v {float(s)!r} {float(z)!r}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"t {i} {j} {k} interior\n")
        for (i, j), t in zip(mesh.edges, mesh.edge_tags):
            fh.write(f"b {i} {j} {_TAG_NAMES[int(t)]}\n")


def load_mesh(path, singularity=(0.0, 0.0), h: float = float("nan")) -> MeridianMesh:
    verts, tris, edges, tags = [], [], [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append((float(parts[1]), float(parts[2])))
            elif parts[0] == "t":
                tris.append(tuple(int(x) for x in parts[1:4]))
            elif parts[0] == "b":
                edges.append((int(parts[1]), int(parts[2])))
                tags.append(TAGS[parts[3]])
            else:
                raise ValueError(f"unrecognized mesh line: {line.strip()!r}")
    return MeridianMesh(np.array(verts), np.array(tris, dtype=np.int64),
                        np.array(edges, dtype=np.int64).reshape(-1, 2), np.array(tags, dtype=np.int64),
                        tuple(singularity), h)
