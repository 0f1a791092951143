"""Finite metric trees (R-trees with finitely many edges).

A point is a :class:`Locus` ``(edge, offset)`` where ``offset`` is measured
from the edge's first vertex.  A vertex has several representations; the
canonical one is the smallest ``(edge, offset)`` pair among them.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, ValidationError
from .base import DEFAULT_TOL, GeodesicRay, Locus, Point, Space


VERTEX_SNAP = 4.0 * 2.220446049250313e-16


@dataclass(frozen=True)
class TreeAutomorphism:
    """Vertex permutation preserving adjacency and edge lengths."""

    vertex_map: tuple  # index -> index
    edge_map: tuple  # edge -> (edge', flipped)


class MetricTree(Space):
    kind = "tree"
    has_tangent = False

    def __init__(self, vertices, edges, tol: float = DEFAULT_TOL):
        super().__init__(tol)
        vertices = [str(v) for v in vertices]
        if len(set(vertices)) != len(vertices):
            raise ValidationError("duplicate vertex names")
        if not vertices:
            raise ValidationError("tree has no vertices")
        self.vertices = vertices
        self.vindex = {v: i for i, v in enumerate(vertices)}
        parsed = []
        for e in edges:
            if isinstance(e, dict):
                u, v, length = e["u"], e["v"], e["length"]
            else:
                u, v, length = e
            u, v = str(u), str(v)
            if u not in self.vindex or v not in self.vindex:
                raise ValidationError(f"edge ({u}, {v}) references an unknown vertex")
            if u == v:
                raise ValidationError(f"self-loop at {u}")
            length = float(length)
            if not (length > 0.0) or not math.isfinite(length):
                raise ValidationError(f"edge ({u}, {v}) must have positive finite length")
            parsed.append((self.vindex[u], self.vindex[v], length))
        if not parsed:
            raise ValidationError("tree needs at least one edge")
        nv = len(vertices)
        if len(parsed) != nv - 1:
            raise ValidationError("a tree on n vertices has exactly n - 1 edges")
        self.edges = parsed
        self.adj = [[] for _ in range(nv)]
        self.edge_of = {}
        for k, (u, v, _) in enumerate(parsed):
            if (u, v) in self.edge_of:
                raise ValidationError("parallel edges are not allowed")
            self.adj[u].append((v, k))
            self.adj[v].append((u, k))
            self.edge_of[(u, v)] = k
            self.edge_of[(v, u)] = k
        self.D = np.full((nv, nv), math.inf)
        self.parent = np.full((nv, nv), -1, dtype=int)
        for root in range(nv):
            self.D[root, root] = 0.0
            stack = [root]
            while stack:
                x = stack.pop()
                for y, k in self.adj[x]:
                    if math.isinf(self.D[root, y]):
                        self.D[root, y] = self.D[root, x] + parsed[k][2]
                        self.parent[root, y] = x
                        stack.append(y)
        if np.isinf(self.D).any():
            raise ValidationError("tree is not connected")
        self.dimension = 1
        canon = json.dumps(self.descriptor(), sort_keys=True, separators=(",", ":"))
        self._id = "tree:" + hashlib.sha1(canon.encode()).hexdigest()[:12]
        self._vertex_locus = [self._min_rep(i) for i in range(nv)]

    # -- identity and descriptors ----------------------------------------
    @property
    def id(self) -> str:
        return self._id

    def descriptor(self) -> dict:
        return {
            "kind": "tree",
            "vertices": list(self.vertices),
            "edges": [{"u": self.vertices[u], "v": self.vertices[v], "length": L}
                      for u, v, L in self.edges],
        }

    @classmethod
    def from_json(cls, obj, tol: float = DEFAULT_TOL) -> "MetricTree":
        unknown = set(obj) - {"kind", "vertices", "edges"}
        if unknown:
            raise ValidationError(f"unknown tree fields: {sorted(unknown)}")
        return cls(obj["vertices"], obj["edges"], tol=tol)

    @classmethod
    def star(cls, arms, center="c") -> "MetricTree":
        """Star with one edge of the given length per arm."""
        leaves = [f"l{i}" for i in range(len(arms))]
        return cls([center] + leaves, [(center, l, L) for l, L in zip(leaves, arms)])

    # -- points ----------------------------------------------------------
    def _min_rep(self, v: int) -> Locus:
        reps = []
        for _, k in self.adj[v]:
            u, w, L = self.edges[k]
            reps.append(Locus(k, 0.0 if u == v else L))
        return min(reps)

    def canonical(self, edge: int, offset: float) -> Locus:
        u, w, L = self.edges[edge]
        snap = VERTEX_SNAP * L  # rounding residue next to a vertex is the vertex
        if offset <= snap:
            return self._vertex_locus[u]
        if offset >= L - snap:
            return self._vertex_locus[w]
        return Locus(edge, float(offset))

    def validate_payload(self, payload):
        if isinstance(payload, dict):
            return self._payload_from_dict(payload)
        try:
            edge, offset = payload
        except (TypeError, ValueError):
            raise ValidationError("tree point must be (edge, offset)") from None
        if isinstance(edge, bool) or int(edge) != edge:
            raise ValidationError("edge identifier must be an integer")
        edge = int(edge)
        if not 0 <= edge < len(self.edges):
            raise ValidationError(f"edge {edge} does not exist")
        offset = float(offset)
        L = self.edges[edge][2]
        if not (0.0 <= offset <= L):
            raise ValidationError(f"offset {offset} outside [0, {L}] on edge {edge}")
        return self.canonical(edge, offset)

    def _payload_from_dict(self, obj):
        if "vertex" in obj:
            name = str(obj["vertex"])
            if name not in self.vindex:
                raise ValidationError(f"unknown vertex {name!r}")
            return self._vertex_locus[self.vindex[name]]
        if set(obj) != {"edge", "offset"}:
            raise ValidationError("tree point must have fields edge and offset, or vertex")
        return self.validate_payload((obj["edge"], obj["offset"]))

    def vertex(self, name) -> Point:
        return self.point({"vertex": name})

    def vertex_of(self, p: Point) -> int | None:
        """Vertex index if ``p`` is a vertex."""
        e, o = p.payload
        u, w, L = self.edges[e]
        if o == 0.0:
            return u
        if o == L:
            return w
        return None

    def payload_to_json(self, p):
        v = self.vertex_of(p)
        if v is not None:
            return {"vertex": self.vertices[v]}
        return {"edge": int(p.payload.edge), "offset": float(p.payload.offset)}

    def payload_from_json(self, obj):
        return self.point(obj)

    def random_point(self, rng, center=None, scale=1.0):
        lengths = np.array([L for _, _, L in self.edges])
        k = int(rng.choice(len(self.edges), p=lengths / lengths.sum()))
        q = self._wrap(self.canonical(k, float(rng.random() * lengths[k])))
        if center is None:
            return q
        return self.point_at_distance(center, q, scale * rng.random())

    def _wrap(self, payload):
        return Point(self.id, self.canonical(payload.edge, payload.offset))

    # -- metric ----------------------------------------------------------
    def dist_to_vertex(self, p: Point, v: int) -> float:
        e, o = p.payload
        u, w, L = self.edges[e]
        return min(o + self.D[u, v], (L - o) + self.D[w, v])

    def _route_ends(self, p: Point, q: Point):
        """Exit vertex of p's edge, entry vertex of q's edge, and the legs' lengths."""
        ep, op = p.payload
        eq, oq = q.payload
        up, wp, Lp = self.edges[ep]
        uq, wq, Lq = self.edges[eq]
        best = None
        for xv, lx in ((up, op), (wp, Lp - op)):
            for yv, ly in ((uq, oq), (wq, Lq - oq)):
                total = lx + self.D[xv, yv] + ly
                if best is None or total < best[0]:
                    best = (total, xv, yv, lx, ly)
        return best

    def _distance(self, p, q):
        ep, op = p.payload
        eq, oq = q.payload
        if ep == eq:
            return abs(op - oq)
        return float(self._route_ends(p, q)[0])

    def vertex_path(self, a: int, b: int):
        """Edges (edge, from_vertex, to_vertex) along the path from vertex a to b."""
        out = []
        y = b
        while y != a:
            x = int(self.parent[a, y])
            out.append((self.edge_of[(x, y)], x, y))
            y = x
        out.reverse()
        return out

    def legs(self, p: Point, q: Point):
        """The geodesic [p, q] as a list of (edge, start_offset, end_offset)."""
        ep, op = p.payload
        eq, oq = q.payload
        if ep == eq:
            return [(ep, op, oq)]
        _, xv, yv, _, _ = self._route_ends(p, q)
        up, wp, Lp = self.edges[ep]
        uq, wq, Lq = self.edges[eq]
        legs = [(ep, op, 0.0 if xv == up else Lp)]
        for k, a, b in self.vertex_path(xv, yv):
            u, w, L = self.edges[k]
            legs.append((k, 0.0, L) if a == u else (k, L, 0.0))
        legs.append((eq, 0.0 if yv == uq else Lq, oq))
        return legs

    def walk(self, p: Point, q: Point, s: float) -> Point:
        """Point on [p, q] at arc length ``s`` from ``p``."""
        remaining = s
        legs = self.legs(p, q)
        for k, start, end in legs:
            length = abs(end - start)
            if remaining <= length:
                step = remaining if end >= start else -remaining
                return self._wrap(Locus(k, start + step))
            remaining -= length
        return q

    def _geodesic(self, a, b, t):
        ea, oa = a.payload
        eb, ob = b.payload
        if ea == eb:
            return self._wrap(Locus(ea, oa + t * (ob - oa)))
        return self.walk(a, b, t * self._distance(a, b))

    def point_at_distance(self, a, b, s):
        d = self._distance(a, b)
        if d == 0.0 or s <= 0.0:
            return a
        if s >= d:
            return b
        return self.walk(a, b, s)

    def distances_on_edge(self, p: Point, edge: int, offsets: np.ndarray) -> np.ndarray:
        """Vectorized d(p, (edge, o)) for an array of offsets."""
        ep, op = p.payload
        u, w, L = self.edges[edge]
        if ep == edge:
            return np.abs(offsets - op)
        du = self.dist_to_vertex(p, u)
        dw = self.dist_to_vertex(p, w)
        return np.minimum(du + offsets, dw + (L - offsets))

    def edge_affine(self, p: Point, edge: int):
        """Distance to p along ``edge`` as ``slope * o + intercept``.

        Returns None when p lies in the interior of the edge (the distance then
        has a kink at p's offset).
        """
        ep, op = p.payload
        u, w, L = self.edges[edge]
        if ep == edge and 0.0 < op < L:
            return None
        du = self.dist_to_vertex(p, u)
        dw = self.dist_to_vertex(p, w)
        if du + L <= dw + 0.0:
            return 1.0, du
        if dw + L <= du + 0.0:
            return -1.0, dw + L
        # p attaches through both ends only if it is on the edge
        return (1.0, du) if du <= dw else (-1.0, dw + L)

    # -- projections -----------------------------------------------------
    def project_segment(self, a, b, x):
        dab = self._distance(a, b)
        if dab == 0.0:
            return a
        s = 0.5 * (self._distance(a, x) + dab - self._distance(b, x))
        return self.point_at_distance(a, b, min(max(s, 0.0), dab))

    def project_subtree(self, vertices, x):
        idx = self._subtree_indices(vertices)
        e, o = x.payload
        u, w, L = self.edges[e]
        if u in idx and w in idx:
            return x
        v = self.vertex_of(x)
        if v is not None and v in idx:
            return x
        best = None
        for i in sorted(idx):
            d = self.dist_to_vertex(x, i)
            key = (d, self._vertex_locus[i])
            if best is None or key < best:
                best = key
        return Point(self.id, best[1])

    def _subtree_indices(self, vertices):
        idx = set()
        for name in vertices:
            if str(name) not in self.vindex:
                raise ValidationError(f"unknown vertex {name!r}")
            idx.add(self.vindex[str(name)])
        if not idx:
            raise ValidationError("empty subtree")
        # connectivity of the induced subgraph
        start = next(iter(idx))
        seen = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y, _ in self.adj[x]:
                if y in idx and y not in seen:
                    seen.add(y)
                    stack.append(y)
        if seen != idx:
            raise ValidationError("subtree vertex set is not connected")
        return idx

    def in_subtree(self, vertices, x) -> bool:
        idx = self._subtree_indices(vertices)
        e, _ = x.payload
        u, w, _ = self.edges[e]
        v = self.vertex_of(x)
        return (u in idx and w in idx) or (v is not None and v in idx)

    # -- rays (leaf surrogate) and Busemann functions --------------------
    def leaves(self):
        return [self.vertices[i] for i in range(len(self.vertices)) if len(self.adj[i]) == 1]

    def make_ray(self, origin, direction) -> GeodesicRay:
        self.check(origin)
        name = str(direction)
        if name not in self.vindex:
            raise ValidationError(f"unknown vertex {name!r}")
        if len(self.adj[self.vindex[name]]) != 1:
            raise ValidationError(f"ray end {name!r} must be a leaf")
        if self._distance(origin, self.vertex(name)) == 0.0:
            raise ValidationError("ray origin coincides with its end")
        return GeodesicRay(self.id, origin, name)

    def ray_point(self, ray, t):
        end = self.vertex(ray.direction)
        total = self._distance(ray.origin, end)
        if t > total + self.tol:
            raise DomainError(f"ray parameter {t} beyond the declared end at {total}")
        return self.point_at_distance(ray.origin, end, t)

    def busemann(self, ray, x):
        end = self.vertex(ray.direction)
        return self._distance(x, end) - self._distance(ray.origin, end)

    def busemann_step(self, ray, x, s):
        return self.point_at_distance(x, self.vertex(ray.direction), s)

    # -- isometries ------------------------------------------------------
    def make_isometry(self, descriptor) -> TreeAutomorphism:
        mapping = descriptor["vertex_map"]
        nv = len(self.vertices)
        vmap = list(range(nv))
        for a, b in mapping.items():
            if str(a) not in self.vindex or str(b) not in self.vindex:
                raise ValidationError("vertex map references an unknown vertex")
            vmap[self.vindex[str(a)]] = self.vindex[str(b)]
        if sorted(vmap) != list(range(nv)):
            raise ValidationError("vertex map is not a permutation")
        emap = []
        for k, (u, w, L) in enumerate(self.edges):
            k2 = self.edge_of.get((vmap[u], vmap[w]))
            if k2 is None:
                raise ValidationError("vertex map does not preserve adjacency")
            u2, w2, L2 = self.edges[k2]
            if abs(L2 - L) > 1e-12 * max(1.0, L):
                raise ValidationError("vertex map does not preserve edge lengths")
            emap.append((k2, u2 != vmap[u]))
        return TreeAutomorphism(tuple(vmap), tuple(emap))

    def apply_isometry(self, iso, x):
        e, o = x.payload
        k2, flipped = iso.edge_map[e]
        L = self.edges[k2][2]
        return self._wrap(Locus(k2, L - o if flipped else o))

    def isometry_to_json(self, iso):
        return {"vertex_map": {self.vertices[i]: self.vertices[j]
                               for i, j in enumerate(iso.vertex_map)}}
