"""Triangle-mesh surfaces: loading, synthetic generators, and geodesic distances.

A surface is a watertight (or at least edge-manifold and connected) triangle
mesh. Per-facet geometry (centers, outward normals, areas) and edge adjacency
are computed once at construction; geodesic distances between facet centers
are shortest paths on the facet-adjacency graph with Euclidean edge weights.
"""

import hashlib
import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

log = logging.getLogger(__name__)

_DEGENERATE_REL_AREA = 1e-12


class MeshError(Exception):
    """Raised for unusable mesh input (parse failures, bad topology)."""


@dataclass(frozen=True)
class SurfaceMesh:
    """Immutable triangle mesh with per-facet geometry and adjacency.

    Attributes:
        vertices: (n_v, 3) float array, meters.
        facets: (n_f, 3) int array of vertex indices.
        facet_centers: (n_f, 3) triangle centroids.
        facet_normals: (n_f, 3) outward unit normals.
        facet_areas: (n_f,) triangle areas, m^2.
        facet_adjacency: per facet, tuple of edge-sharing facet indices.
    """

    vertices: np.ndarray
    facets: np.ndarray
    facet_centers: np.ndarray
    facet_normals: np.ndarray
    facet_areas: np.ndarray
    facet_adjacency: tuple = field(repr=False)

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    @property
    def bounding_box(self):
        """(lo, hi) corners of the axis-aligned vertex bounding box."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def content_hash(self) -> str:
        """SHA-256 over vertex coordinates and facet indices (hex digest)."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices, dtype=np.float64).tobytes())
        h.update(np.ascontiguousarray(self.facets, dtype=np.int64).tobytes())
        return h.hexdigest()


def _facet_edges(facets):
    """Yield (sorted edge key, facet index) for every edge of every facet."""
    for fi, (a, b, c) in enumerate(facets):
        yield (min(a, b), max(a, b)), fi
        yield (min(b, c), max(b, c)), fi
        yield (min(a, c), max(a, c)), fi


def _build_adjacency(facets):
    edge_map = {}
    for edge, fi in _facet_edges(facets):
        edge_map.setdefault(edge, []).append(fi)
    adj = [set() for _ in range(len(facets))]
    for edge, fis in edge_map.items():
        if len(fis) > 2:
            raise MeshError(f"non-manifold edge {edge} shared by {len(fis)} facets")
        if len(fis) == 2:
            a, b = fis
            adj[a].add(b)
            adj[b].add(a)
    return tuple(tuple(sorted(s)) for s in adj), edge_map


def _orient_consistently(facets, adj):
    """Flood-fill a consistent winding: shared edges traversed antiparallel."""
    n = len(facets)
    facets = facets.copy()

    def directed_edges(f):
        a, b, c = f
        return ((a, b), (b, c), (c, a))

    visited = np.zeros(n, dtype=bool)
    for seed in range(n):
        if visited[seed]:
            continue
        visited[seed] = True
        stack = [seed]
        while stack:
            fi = stack.pop()
            for nb in adj[fi]:
                if visited[nb]:
                    continue
                shared = set(facets[fi].tolist()) & set(facets[nb].tolist())
                if len(shared) == 2:
                    de_nb = directed_edges(facets[nb])
                    for e in directed_edges(facets[fi]):
                        if set(e) == shared and e in de_nb:
                            # same direction on both -> flip neighbor
                            facets[nb] = facets[nb][::-1]
                            break
                visited[nb] = True
                stack.append(nb)
    return facets


def mesh_from_arrays(vertices, facets, *, require_connected=True) -> SurfaceMesh:
    """Build a SurfaceMesh from raw arrays, validating invariants.

    Degenerate (zero-area) facets are dropped with a warning. Winding is made
    consistent by flood fill over edge adjacency, then globally flipped if
    needed so normals point away from the mesh centroid on average.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    facets = np.asarray(facets, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshError("vertices must be (n, 3)")
    if facets.ndim != 2 or facets.shape[1] != 3:
        raise MeshError("facets must be (m, 3) vertex-index triples")
    if facets.size and (facets.min() < 0 or facets.max() >= len(vertices)):
        raise MeshError("facet vertex index out of range")
    for fi, f in enumerate(facets):
        if len(set(f.tolist())) != 3:
            raise MeshError(f"facet {fi} has repeated vertex indices")

    # drop degenerate facets before adjacency so they cannot break orientation
    tri = vertices[facets]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    scale = float(np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0))) or 1.0
    keep = areas > _DEGENERATE_REL_AREA * scale**2
    if not np.all(keep):
        log.warning("dropping %d degenerate facet(s)", int((~keep).sum()))
        facets = facets[keep]
    if len(facets) == 0:
        raise MeshError("mesh has no non-degenerate facets")

    adj, _ = _build_adjacency(facets)
    n_comp, labels = connected_components(_adjacency_csr(adj), directed=False)
    if require_connected and n_comp > 1:
        sizes = np.bincount(labels)
        raise MeshError(
            f"facet adjacency graph is disconnected ({n_comp} components, "
            f"sizes {sizes.tolist()})"
        )

    facets = _orient_consistently(facets, adj)
    tri = vertices[facets]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    normals = cross / (2.0 * areas)[:, None]
    centers = tri.mean(axis=1)
    centroid = centers.mean(axis=0)
    if np.mean(np.einsum("ij,ij->i", normals, centers - centroid)) < 0:
        facets = facets[:, ::-1]
        normals = -normals

    for arr in (vertices, facets, centers, normals, areas):
        arr.setflags(write=False)
    return SurfaceMesh(vertices, facets, centers, normals, areas, adj)


def _adjacency_csr(adj):
    rows, cols = [], []
    for i, nbrs in enumerate(adj):
        for j in nbrs:
            rows.append(i)
            cols.append(j)
    n = len(adj)
    return csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


# ---------------------------------------------------------------------------
# File I/O (ASCII OBJ and ASCII STL only)
# ---------------------------------------------------------------------------

def load_mesh(path) -> SurfaceMesh:
    """Load an ASCII OBJ or ASCII STL triangle mesh.

    Non-triangle faces, binary files and disconnected meshes are rejected.
    """
    with open(path, "rb") as fh:
        head = fh.read(2048)
    try:
        head_text = head.decode("ascii")
    except UnicodeDecodeError as exc:
        raise MeshError(f"{path}: not an ASCII mesh file") from exc

    if head_text.lstrip().lower().startswith("solid"):
        vertices, facets = _parse_ascii_stl(path)
    else:
        vertices, facets = _parse_ascii_obj(path)
    return mesh_from_arrays(vertices, facets)


def _parse_ascii_obj(path):
    vertices, facets = [], []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshError(f"{path}:{lineno}: malformed vertex record")
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [p.split("/")[0] for p in parts[1:]]
                if len(idx) != 3:
                    raise MeshError(
                        f"{path}:{lineno}: non-triangle face with {len(idx)} vertices"
                    )
                tri = [int(i) for i in idx]
                if any(i <= 0 for i in tri):
                    raise MeshError(f"{path}:{lineno}: only positive 1-based indices supported")
                facets.append([i - 1 for i in tri])
    if not facets:
        raise MeshError(f"{path}: no faces found")
    return np.array(vertices), np.array(facets)


def _parse_ascii_stl(path):
    verts = []
    vert_ids = {}
    facets = []
    current = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "vertex":
                if len(parts) != 4:
                    raise MeshError(f"{path}:{lineno}: malformed vertex record")
                key = (parts[1], parts[2], parts[3])
                if key not in vert_ids:
                    vert_ids[key] = len(verts)
                    verts.append([float(x) for x in parts[1:4]])
                current.append(vert_ids[key])
            elif parts[0] == "endfacet":
                if len(current) != 3:
                    raise MeshError(f"{path}:{lineno}: non-triangle facet in STL")
                facets.append(current)
                current = []
    if not facets:
        raise MeshError(f"{path}: no facets found")
    return np.array(verts, dtype=np.float64), np.array(facets)


def save_obj(mesh: SurfaceMesh, path) -> None:
    """Write the mesh as ASCII OBJ (v/f records, 1-based indices)."""
    with open(path, "w", encoding="ascii") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.facets:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------

def generate_cylinder_tank(radius, height, dome_height, target_facets) -> SurfaceMesh:
    """Closed tank mesh: cylindrical wall, flat bottom disk, spherical-cap dome.

    The facet count approximates ``target_facets`` (within +-20% except near
    the minimal-topology floor). Panels are kept near-square by deriving row
    counts from the angular resolution.
    """
    if radius <= 0 or height <= 0 or dome_height <= 0:
        raise ValueError("radius, height and dome_height must be positive")
    if target_facets < 8:
        raise ValueError("target_facets must be >= 8")

    best = None
    for n_theta in range(3, 512):
        counts = _tank_counts(radius, height, dome_height, n_theta)
        total = counts["total"]
        if best is None or abs(total - target_facets) < abs(best[1] - target_facets):
            best = (n_theta, total, counts)
        if total > 1.5 * target_facets and n_theta > 8:
            break
    n_theta, _, counts = best
    return _build_tank(radius, height, dome_height, n_theta, counts)


def _tank_counts(radius, height, dome_height, n_theta):
    panel = 2.0 * math.pi * radius / n_theta
    n_z = max(1, round(height / panel))
    n_r = max(1, round(radius / panel))
    sphere_r = (radius**2 + dome_height**2) / (2.0 * dome_height)
    phi_max = math.asin(min(1.0, radius / sphere_r))
    if sphere_r - dome_height < 0:  # dome taller than hemisphere
        phi_max = math.pi - phi_max
    n_c = max(1, round(sphere_r * phi_max / panel))
    total = 2 * n_theta * n_z + (2 * n_r - 1) * n_theta + (2 * n_c - 1) * n_theta
    return {"n_z": n_z, "n_r": n_r, "n_c": n_c, "phi_max": phi_max,
            "sphere_r": sphere_r, "total": total}


def _build_tank(radius, height, dome_height, n_theta, counts):
    n_z, n_r, n_c = counts["n_z"], counts["n_r"], counts["n_c"]
    sphere_r, phi_max = counts["sphere_r"], counts["phi_max"]
    thetas = np.arange(n_theta) * (2.0 * math.pi / n_theta)
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)

    verts = []
    ring_ids = []

    def add_ring(r, z):
        base = len(verts)
        for i in range(n_theta):
            verts.append((r * cos_t[i], r * sin_t[i], z))
        return base

    # bottom disk: center point, then rings of growing radius up to the wall
    center_bottom = len(verts)
    verts.append((0.0, 0.0, 0.0))
    for k in range(1, n_r + 1):
        ring_ids.append(add_ring(radius * k / n_r, 0.0))
    # wall rings above the rim
    for j in range(1, n_z + 1):
        ring_ids.append(add_ring(radius, height * j / n_z))
    # dome rings from the rim towards the apex
    z_center = height + dome_height - sphere_r
    for m in range(1, n_c):
        phi = phi_max * (1.0 - m / n_c)
        ring_ids.append(add_ring(sphere_r * math.sin(phi), z_center + sphere_r * math.cos(phi)))
    apex = len(verts)
    verts.append((0.0, 0.0, height + dome_height))

    facets = []
    first_ring = ring_ids[0]
    for i in range(n_theta):
        facets.append((center_bottom, first_ring + i, first_ring + (i + 1) % n_theta))
    for ra, rb in zip(ring_ids[:-1], ring_ids[1:]):
        for i in range(n_theta):
            i2 = (i + 1) % n_theta
            facets.append((ra + i, rb + i, rb + i2))
            facets.append((ra + i, rb + i2, ra + i2))
    last_ring = ring_ids[-1]
    for i in range(n_theta):
        facets.append((last_ring + i, apex, last_ring + (i + 1) % n_theta))

    return mesh_from_arrays(np.array(verts), np.array(facets))


def generate_winged_prism(radius, length, wing_span, wing_chord,
                          wing_thickness, target_facets) -> SurfaceMesh:
    """Non-convex composite test mesh: horizontal fuselage plus two wing slabs.

    The fuselage is a closed cylinder along +x with capped ends. Two
    rectangular slab wings attach at the sides (+-y) over a chordwise span
    centered on the fuselage, sharing vertices with the wall grid so the
    result is a single edge-manifold connected surface.
    """
    if min(radius, length, wing_span, wing_chord, wing_thickness) <= 0:
        raise ValueError("all dimensions must be positive")

    best = None
    for n_theta in range(8, 256, 2):
        est = _winged_counts(radius, length, wing_span, wing_chord, wing_thickness, n_theta)
        if est is None:
            continue
        if best is None or abs(est[0] - target_facets) < abs(best[1] - target_facets):
            best = (n_theta, est[0], est[1])
        if est[0] > 1.6 * target_facets:
            break
    if best is None:
        raise MeshError("cannot fit wing onto fuselage grid; adjust dimensions")
    n_theta, _, n_x = best
    return _build_winged(radius, length, wing_span, wing_chord, wing_thickness, n_theta, n_x)


def _wing_grid_extents(radius, length, wing_chord, wing_thickness, n_theta, n_x):
    """Grid index ranges of the two wing-root openings; None if degenerate."""
    dz = wing_thickness / 2.0
    if dz >= radius:
        return None
    delta = math.asin(dz / radius)
    dtheta = 2.0 * math.pi / n_theta
    half_cells = max(1, round(delta / dtheta))
    jc = n_x / 2.0
    chord_cells = max(1, round(wing_chord / (length / n_x)))
    j0 = int(round(jc - chord_cells / 2.0))
    j1 = j0 + chord_cells
    if j0 < 1 or j1 > n_x - 1:
        return None
    roots = []
    for center in (n_theta // 4, 3 * n_theta // 4):  # theta = pi/2 and 3pi/2
        i0 = center - half_cells
        i1 = center + half_cells
        roots.append((i0, i1, j0, j1))
    a, b = roots
    if a[1] >= b[0]:  # wings may not overlap around the circumference
        return None
    return roots


def _winged_counts(radius, length, wing_span, wing_chord, wing_thickness, n_theta):
    panel = 2.0 * math.pi * radius / n_theta
    n_x = max(2, round(length / panel))
    roots = _wing_grid_extents(radius, length, wing_chord, wing_thickness, n_theta, n_x)
    if roots is None:
        return None
    total = 2 * n_theta * n_x + 2 * n_theta  # wall + two cap fans
    for (i0, i1, j0, j1) in roots:
        cells = (i1 - i0) * (j1 - j0)
        perim = 2 * ((i1 - i0) + (j1 - j0))
        total += 2 * perim  # strips replace removed cells; outboard face adds cells back
    return total, n_x


def _build_winged(radius, length, wing_span, wing_chord, wing_thickness, n_theta, n_x):
    roots = _wing_grid_extents(radius, length, wing_chord, wing_thickness, n_theta, n_x)
    thetas = np.arange(n_theta) * (2.0 * math.pi / n_theta)
    ys, zs = radius * np.sin(thetas), radius * np.cos(thetas)
    xs = np.arange(n_x + 1) * (length / n_x)

    verts = [(xs[j], ys[i], zs[i]) for j in range(n_x + 1) for i in range(n_theta)]

    def wall_idx(i, j):
        return j * n_theta + i % n_theta

    skip = set()
    for (i0, i1, j0, j1) in roots:
        for i in range(i0, i1):
            for j in range(j0, j1):
                skip.add((i % n_theta, j))

    facets = []
    for j in range(n_x):
        for i in range(n_theta):
            if (i, j) in skip:
                continue
            a, b = wall_idx(i, j), wall_idx(i + 1, j)
            c, d = wall_idx(i + 1, j + 1), wall_idx(i, j + 1)
            facets.append((a, b, c))
            facets.append((a, c, d))

    for j in (0, n_x):
        center = len(verts)
        verts.append((xs[j], 0.0, 0.0))
        for i in range(n_theta):
            facets.append((center, wall_idx(i, j), wall_idx(i + 1, j)))

    for (i0, i1, j0, j1) in roots:
        side = 1.0 if math.sin(thetas[(i0 + i1) // 2 % n_theta]) > 0 else -1.0
        y_out = side * (radius + wing_span)
        out_idx = {}
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                out_idx[(i, j)] = len(verts)
                verts.append((xs[j], y_out, zs[i % n_theta]))
        # outboard face
        for i in range(i0, i1):
            for j in range(j0, j1):
                a, b = out_idx[(i, j)], out_idx[(i + 1, j)]
                c, d = out_idx[(i + 1, j + 1)], out_idx[(i, j + 1)]
                facets.append((a, b, c))
                facets.append((a, c, d))
        # side strips root ring -> outboard ring along the opening perimeter
        for j in range(j0, j1):
            for i_b in (i0, i1):
                facets.append((wall_idx(i_b, j), wall_idx(i_b, j + 1), out_idx[(i_b, j + 1)]))
                facets.append((wall_idx(i_b, j), out_idx[(i_b, j + 1)], out_idx[(i_b, j)]))
        for i in range(i0, i1):
            for j_b in (j0, j1):
                facets.append((wall_idx(i, j_b), wall_idx(i + 1, j_b), out_idx[(i + 1, j_b)]))
                facets.append((wall_idx(i, j_b), out_idx[(i + 1, j_b)], out_idx[(i, j_b)]))

    return mesh_from_arrays(np.array(verts), np.array(facets))


# ---------------------------------------------------------------------------
# Geodesics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicField:
    """All-pairs geodesic distances between facet centers (n x n, meters)."""

    dist: np.ndarray

    @property
    def n(self) -> int:
        return self.dist.shape[0]


# Above this size the O(n^3) Floyd-Warshall pass gets slow; Dijkstra takes
# over (identical paths, last-ulp float differences in the summed lengths).
_FW_CUTOFF = 1500


def compute_geodesics(mesh: SurfaceMesh) -> GeodesicField:
    """Shortest-path distances on the facet-center adjacency graph.

    Nodes are facet centers; an edge joins edge-adjacent facets, weighted by
    the Euclidean distance between their centers. Floyd-Warshall is used up
    to ``_FW_CUTOFF`` facets (bit-identical to the textbook reference),
    Dijkstra beyond that.
    """
    n = mesh.n_facets
    centers = mesh.facet_centers
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for i, nbrs in enumerate(mesh.facet_adjacency):
        for j in nbrs:
            dist[i, j] = np.linalg.norm(centers[i] - centers[j])
    if n <= _FW_CUTOFF:
        for k in range(n):
            np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :], out=dist)
    else:
        graph = csr_matrix(np.where(np.isfinite(dist), dist, 0.0))
        dist = shortest_path(graph, method="D", directed=False)
    if not np.all(np.isfinite(dist)):
        i, j = np.argwhere(~np.isfinite(dist))[0]
        raise MeshError(f"no geodesic path between facets {i} and {j} (disconnected graph)")
    dist.setflags(write=False)
    return GeodesicField(dist)


MATRIX_MAGIC = b"SMAT"


def write_matrix_sidecar(path, matrix) -> None:
    """Flat binary n x n matrix file: magic, u64 n, n^2 little-endian f64."""
    matrix = np.asarray(matrix, dtype=np.float64)
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise ValueError("sidecar matrices must be square")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<Q", n))
        fh.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def read_matrix_sidecar(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != MATRIX_MAGIC:
            raise MeshError(f"{path}: bad sidecar magic")
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(n * n * 8), dtype="<f8")
    if data.size != n * n:
        raise MeshError(f"{path}: truncated sidecar (expected {n}x{n})")
    return data.reshape(n, n).astype(np.float64)


def geodesics_cached(mesh: SurfaceMesh, cache_dir=None) -> GeodesicField:
    """Compute geodesics, reusing/writing a content-hash-keyed cache file."""
    if cache_dir is None:
        return compute_geodesics(mesh)
    import os

    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, f"geodesics_{mesh.content_hash()[:16]}.bin")
    if os.path.exists(path):
        try:
            dist = read_matrix_sidecar(path)
            if dist.shape[0] == mesh.n_facets:
                dist.setflags(write=False)
                return GeodesicField(dist)
        except MeshError:
            log.warning("ignoring unreadable geodesic cache %s", path)
    geo = compute_geodesics(mesh)
    write_matrix_sidecar(path, geo.dist)
    return geo
