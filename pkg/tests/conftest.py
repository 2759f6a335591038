import numpy as np
import pytest

from surfipp import mesh as meshmod
from surfipp.scenario import ScenarioConfig, assemble_scenario

CUBE_OBJ = """\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
"""


@pytest.fixture()
def cube_obj_path(tmp_path):
    p = tmp_path / "cube.obj"
    p.write_text(CUBE_OBJ)
    return p


@pytest.fixture(scope="session")
def cube_mesh(tmp_path_factory):
    p = tmp_path_factory.mktemp("meshes") / "cube.obj"
    p.write_text(CUBE_OBJ)
    return meshmod.load_mesh(p)


def make_chain_mesh(n_facets=3, center_spacing=1.0):
    """Open triangle strip whose consecutive facet centers are equally spaced."""
    verts = [(0.0, 0.0, 0.0), (0.0, 1.0, 0.0)]
    facets = []
    for k in range(n_facets):
        x = (k + 1) * 0.5
        verts.append((x, (k + 1) % 2, 0.0))
        a, b, c = k, k + 1, k + 2
        facets.append((a, b, c))
    mesh = meshmod.mesh_from_arrays(np.array(verts), np.array(facets))
    d = np.linalg.norm(mesh.facet_centers[1] - mesh.facet_centers[0])
    return meshmod.mesh_from_arrays(mesh.vertices * (center_spacing / d), mesh.facets)


@pytest.fixture(scope="session")
def chain3_mesh():
    return make_chain_mesh(3, center_spacing=1.0)


@pytest.fixture(scope="session")
def tank400():
    return meshmod.generate_cylinder_tank(6.0, 20.0, 1.2, 400)


@pytest.fixture(scope="session")
def tank400_geo(tank400):
    return meshmod.compute_geodesics(tank400)


@pytest.fixture(scope="session")
def desk_config():
    import pathlib
    cfg_path = pathlib.Path(__file__).resolve().parent.parent / "configs" / "cylinder_desk.yaml"
    return ScenarioConfig.load(cfg_path)


@pytest.fixture(scope="session")
def desk_scenario(desk_config):
    return assemble_scenario(desk_config)
