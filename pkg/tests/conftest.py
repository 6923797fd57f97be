import numpy as np
import pytest

from citywalk.citymodel import Building, CityScene, TerrainGrid, WaterBody, scene_to_mesh
from citywalk.geom import CameraPose, GeodeticPoint, Quaternion, Vec3
from citywalk.raycast import build_ray_index
from citywalk.viewselect import GlobalTrajectory


def box_scene(
    footprint=((20.0, -5.0), (30.0, -5.0), (30.0, 5.0), (20.0, 5.0)),
    base=0.0,
    height=10.0,
    terrain_z=0.0,
    water=(),
    attributes=None,
    extra_buildings=(),
) -> CityScene:
    """One rectangular prism on a large flat terrain square."""
    terrain = TerrainGrid(
        origin_x=-200.0, origin_y=-200.0, cell=400.0,
        values=np.full((2, 2), terrain_z),
    )
    b = Building(
        id="bldg-1",
        footprint=np.array(footprint, dtype=np.float64),
        base_elevation=base,
        height=height,
        attributes=dict(attributes or {}),
    )
    return CityScene(
        origin=GeodeticPoint(35.68, 139.76, 0.0),
        buildings=[b, *extra_buildings],
        terrain=terrain,
        water=list(water),
    )


@pytest.fixture(scope="session")
def demo_scene() -> CityScene:
    """Flat ground at 1 m, a 10 m building ahead of the street, two flood levels."""
    water = [
        WaterBody(
            scenario_id="L1", level=3.2,
            extent=np.array([[-40.0, -40.0], [40.0, -40.0], [40.0, 40.0], [-40.0, 40.0]]),
        ),
        WaterBody(
            scenario_id="L2", level=5.0,
            extent=np.array([[-40.0, -40.0], [40.0, -40.0], [40.0, 40.0], [-40.0, 40.0]]),
        ),
    ]
    return box_scene(
        base=1.0, terrain_z=1.0, water=water,
        attributes={"address": "1-2-3 Example Ward"},
    )


@pytest.fixture(scope="session")
def demo_traj() -> GlobalTrajectory:
    frames = [
        CameraPose(position=Vec3(float(i), 0.0, 3.0), orientation=Quaternion.identity())
        for i in range(16)
    ]
    return GlobalTrajectory(street_id="st0", frames=frames)


@pytest.fixture(scope="session")
def demo_index(demo_scene):
    return build_ray_index(scene_to_mesh(demo_scene), demo_scene)
