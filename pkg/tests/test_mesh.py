import numpy as np
import pytest

from surfipp import mesh as meshmod
from surfipp.mesh import (GeodesicField, MeshError, compute_geodesics,
                          generate_cylinder_tank, generate_winged_prism,
                          load_mesh, mesh_from_arrays, read_matrix_sidecar,
                          save_obj, write_matrix_sidecar)

from conftest import make_chain_mesh


class TestLoadMesh:
    def test_cube_topology(self, cube_mesh):
        assert cube_mesh.n_facets == 12
        assert all(len(a) == 3 for a in cube_mesh.facet_adjacency)
        assert cube_mesh.facet_areas.sum() == pytest.approx(6.0)

    def test_cube_normals_outward(self, cube_mesh):
        rel = cube_mesh.facet_centers - cube_mesh.vertices.mean(axis=0)
        dots = np.einsum("ij,ij->i", cube_mesh.facet_normals, rel)
        assert np.all(dots > 0)
        assert np.allclose(np.linalg.norm(cube_mesh.facet_normals, axis=1), 1.0,
                           atol=1e-9)

    def test_roundtrip_identity(self, tmp_path, tank400):
        p = tmp_path / "tank.obj"
        save_obj(tank400, p)
        again = load_mesh(p)
        assert again.n_facets == tank400.n_facets
        assert np.allclose(again.facet_centers, tank400.facet_centers, atol=1e-12)

    def test_quad_face_rejected(self, tmp_path):
        p = tmp_path / "quad.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        with pytest.raises(MeshError, match="non-triangle"):
            load_mesh(p)

    def test_disconnected_rejected(self, tmp_path):
        two = ("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 5 5 5\nv 6 5 5\nv 5 6 5\n"
               "f 1 2 3\nf 4 5 6\n")
        p = tmp_path / "two.obj"
        p.write_text(two)
        with pytest.raises(MeshError, match="disconnected"):
            load_mesh(p)

    def test_ascii_stl(self, tmp_path):
        stl = ["solid tri"]
        for tri in (((0, 0, 0), (1, 0, 0), (0, 1, 0)), ((1, 0, 0), (1, 1, 0), (0, 1, 0))):
            stl.append(" facet normal 0 0 1\n  outer loop")
            stl += [f"   vertex {x} {y} {z}" for x, y, z in tri]
            stl.append("  endloop\n endfacet")
        stl.append("endsolid tri")
        p = tmp_path / "pair.stl"
        p.write_text("\n".join(stl))
        m = load_mesh(p)
        assert m.n_facets == 2
        assert m.facet_areas.sum() == pytest.approx(1.0)

    def test_degenerate_facets_dropped(self):
        verts = np.array([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0.5, 0.0, 0.0)])
        facets = np.array([(0, 1, 2), (0, 1, 3)])  # second has zero area
        m = mesh_from_arrays(verts, facets)
        assert m.n_facets == 1


class TestGenerators:
    def test_paper_scale_count(self):
        m = generate_cylinder_tank(6, 20, 1.2, 2190)
        assert abs(m.n_facets - 2190) <= 0.2 * 2190

    def test_desk_scale_count(self, tank400):
        assert 320 <= tank400.n_facets <= 480

    def test_minimal_tank_closed(self):
        m = generate_cylinder_tank(1, 1, 0.1, 8)
        assert all(len(a) == 3 for a in m.facet_adjacency)
        compute_geodesics(m)  # connected

    def test_tank_closed_and_outward(self, tank400):
        assert all(len(a) == 3 for a in tank400.facet_adjacency)
        rel = tank400.facet_centers - tank400.vertices.mean(axis=0)
        assert np.mean(np.einsum("ij,ij->i", tank400.facet_normals, rel)) > 0

    def test_precondition_checks(self):
        with pytest.raises(ValueError):
            generate_cylinder_tank(-1, 1, 0.1, 100)
        with pytest.raises(ValueError):
            generate_cylinder_tank(1, 1, 0.1, 4)

    def test_winged_prism_closed_nonconvex(self):
        m = generate_winged_prism(3.0, 24.0, 6.0, 6.0, 1.0, 800)
        assert 600 <= m.n_facets <= 1000
        assert all(len(a) == 3 for a in m.facet_adjacency)
        # non-convex: at least one reflex edge (neighbor center above the plane)
        reflex = 0.0
        for i, nbrs in enumerate(m.facet_adjacency):
            for j in nbrs:
                lift = float(np.dot(m.facet_normals[i],
                                    m.facet_centers[j] - m.facet_centers[i]))
                reflex = max(reflex, lift)
        assert reflex > 1e-3


class TestGeodesics:
    def test_adjacent_equals_euclid(self):
        m = make_chain_mesh(2)
        geo = compute_geodesics(m)
        direct = np.linalg.norm(m.facet_centers[0] - m.facet_centers[1])
        assert geo.dist[0, 1] == pytest.approx(direct, abs=1e-15)

    def test_self_distance_zero(self, tank400_geo):
        assert np.all(np.diag(tank400_geo.dist) == 0.0)

    def test_chain_additivity(self, chain3_mesh):
        geo = compute_geodesics(chain3_mesh)
        assert geo.dist[0, 2] == pytest.approx(geo.dist[0, 1] + geo.dist[1, 2],
                                               abs=1e-12)

    def _brute_force_paths(self, mesh):
        """Min-weight simple path between every pair, by DFS enumeration."""
        n = mesh.n_facets
        w = {}
        for i, nbrs in enumerate(mesh.facet_adjacency):
            for j in nbrs:
                w[(i, j)] = np.linalg.norm(mesh.facet_centers[i] - mesh.facet_centers[j])
        best = np.full((n, n), np.inf)
        np.fill_diagonal(best, 0.0)

        def dfs(start, node, seen, acc):
            if acc < best[start, node]:
                best[start, node] = acc
            for nb in mesh.facet_adjacency[node]:
                if nb not in seen:
                    dfs(start, nb, seen | {nb}, acc + w[(node, nb)])

        for s in range(n):
            dfs(s, s, {s}, 0.0)
        return best

    def test_brute_force_enumeration(self, cube_mesh, chain3_mesh):
        for mesh in (cube_mesh, chain3_mesh, make_chain_mesh(6)):
            geo = compute_geodesics(mesh)
            ref = self._brute_force_paths(mesh)
            assert np.allclose(geo.dist, ref, atol=1e-12)

    def test_floyd_warshall_exact(self):
        m = generate_cylinder_tank(1.0, 2.0, 0.3, 48)
        assert m.n_facets <= 50
        geo = compute_geodesics(m)
        n = m.n_facets
        ref = np.full((n, n), np.inf)
        np.fill_diagonal(ref, 0.0)
        for i, nbrs in enumerate(m.facet_adjacency):
            for j in nbrs:
                ref[i, j] = np.linalg.norm(m.facet_centers[i] - m.facet_centers[j])
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    v = ref[i, k] + ref[k, j]
                    if v < ref[i, j]:
                        ref[i, j] = v
        assert np.array_equal(geo.dist, ref)

    def test_chord_lower_bound(self, tank400, tank400_geo):
        c = tank400.facet_centers
        chord = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2)
        assert np.all(tank400_geo.dist >= chord - 1e-9)

    def test_symmetry_triangle_inequality(self, tank400_geo):
        d = tank400_geo.dist
        assert np.array_equal(d, d.T)
        via0 = d[:, [0]] + d[[0], :]
        assert np.all(d <= via0 + 1e-9)

    def test_disconnected_error_names_pair(self):
        verts = np.array([(0, 0, 0), (1, 0, 0), (0, 1, 0), (5, 5, 5), (6, 5, 5),
                          (5, 6, 5)])
        facets = np.array([(0, 1, 2), (3, 4, 5)])
        m = mesh_from_arrays(verts, facets, require_connected=False)
        with pytest.raises(MeshError, match="facets 0 and 1"):
            compute_geodesics(m)


class TestSidecar:
    def test_matrix_roundtrip(self, tmp_path):
        mat = np.random.default_rng(0).random((7, 7))
        p = tmp_path / "m.bin"
        write_matrix_sidecar(p, mat)
        again = read_matrix_sidecar(p)
        assert np.array_equal(mat, again)

    def test_geodesic_cache_reuse(self, tmp_path, chain3_mesh):
        geo1 = meshmod.geodesics_cached(chain3_mesh, tmp_path)
        files = list(tmp_path.glob("geodesics_*.bin"))
        assert len(files) == 1
        geo2 = meshmod.geodesics_cached(chain3_mesh, tmp_path)
        assert np.array_equal(geo1.dist, geo2.dist)

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "bad.bin"
        p.write_bytes(b"NOPE" + b"\0" * 32)
        with pytest.raises(MeshError, match="magic"):
            read_matrix_sidecar(p)
