"""Build a small self-contained demo bundle for the walkthrough service.

Writes scene.json, one aligned street trajectory, and grayscale building-mask
panoramas standing in for real footage, then prints the serve command.  The
viewer in frontend/ connects to the served bundle out of the box.
"""
import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from citywalk.alignment import AlignParams, LocalTrajectory, params_to_json, write_local_trajectory
from citywalk.citymodel import Building, CityScene, TerrainGrid, WaterBody, scene_to_json, scene_to_mesh
from citywalk.geom import CameraPose, GeodeticPoint, Quaternion, Vec3, geodetic_from_enu
from citywalk.panorama import render_building_mask, save_mask_set
from citywalk.raycast import build_ray_index


def rect(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)


def demo_scene() -> CityScene:
    # a short street along +x, lined with prisms; the first building is the
    # one the viewer's info card demo points at
    buildings = [
        Building(id="bldg-1", footprint=rect(20, -5, 30, 5), base_elevation=1.0, height=10.0,
                 attributes={"usage": "retail", "address": "1-2-3 Example Ward"}),
        Building(id="bldg-2", footprint=rect(-2, 8, 14, 16), base_elevation=1.0, height=14.0),
        Building(id="bldg-3", footprint=rect(-2, -16, 14, -8), base_elevation=1.0, height=7.0),
        Building(id="bldg-4", footprint=rect(34, -16, 44, 16), base_elevation=1.0, height=22.0),
    ]
    terrain = TerrainGrid(origin_x=-200.0, origin_y=-200.0, cell=400.0,
                          values=np.full((2, 2), 1.0))
    water = [
        WaterBody(scenario_id="L1", level=3.2, extent=rect(-40, -40, 40, 40)),
        WaterBody(scenario_id="L2", level=5.0, extent=rect(-40, -40, 40, 40)),
    ]
    return CityScene(origin=GeodeticPoint(35.68, 139.76, 0.0),
                     buildings=buildings, terrain=terrain, water=water)


def demo_trajectory(scene: CityScene, frames: int = 16) -> LocalTrajectory:
    poses = [CameraPose(Vec3(float(i), 0.0, 3.0), Quaternion.identity()) for i in range(frames)]
    return LocalTrajectory(
        street_id="st0",
        frames=poses,
        gravity=Vec3(0.0, 0.0, -1.0),
        start_geodetic=geodetic_from_enu(scene.origin, poses[0].position),
        end_geodetic=geodetic_from_enu(scene.origin, poses[-1].position),
    )


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo")
    ap.add_argument("--mask-res", type=int, nargs=2, default=[512, 256], metavar=("W", "H"))
    args = ap.parse_args()

    scene = demo_scene()
    traj = demo_trajectory(scene)
    # the trajectory is authored in scene coordinates already, so the aligned
    # parameters are simply its own endpoints
    params = AlignParams(v_s=traj.frames[0].position, v_e=traj.frames[-1].position)

    tdir = os.path.join(args.out, "trajectories")
    adir = os.path.join(args.out, "assets")
    os.makedirs(tdir, exist_ok=True)
    os.makedirs(adir, exist_ok=True)
    with open(os.path.join(args.out, "scene.json"), "w", encoding="utf-8") as f:
        f.write(scene_to_json(scene))
    with open(os.path.join(tdir, "st0.traj.txt"), "w", encoding="utf-8") as f:
        f.write(write_local_trajectory(traj))
    with open(os.path.join(tdir, "st0.params.json"), "w", encoding="utf-8") as f:
        f.write(params_to_json(params))

    mesh = scene_to_mesh(scene)
    index = build_ray_index(mesh, scene)
    w, h = args.mask_res
    masks = {i: render_building_mask(mesh, index, p, w, h) for i, p in enumerate(traj.frames)}
    save_mask_set(adir, "st0", masks, ext="pgm")

    print(f"wrote {args.out} ({len(masks)} panoramas at {w}x{h})")
    print("serve it with:")
    print(f"  citywalk serve --scene {args.out}/scene.json "
          f"--trajectories {tdir} --assets {adir} --mask-res {w} {h}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
