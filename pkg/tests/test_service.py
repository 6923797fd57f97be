import json
import math

import numpy as np
import pytest

from citywalk.errors import SceneNotLoaded
from citywalk.geom import Vec3
from citywalk.service import MAX_STEP_M, PROTOCOL, WalkEngine, canonical
from citywalk.viewselect import DEFAULT_ALPHA_M

# engine construction is cheap for the demo scene; per-test engines keep the
# session and overlay state isolated


@pytest.fixture()
def engine(demo_scene, demo_traj):
    return WalkEngine(demo_scene, [demo_traj], width=128, height=64)


def drive(engine, sid, msgs):
    return [engine.handle(sid, m) for m in msgs]


class TestSessions:
    def test_requires_trajectories(self, demo_scene):
        with pytest.raises(SceneNotLoaded):
            WalkEngine(demo_scene, [])

    def test_spawn_ahead_of_first_frame(self, engine):
        sid = engine.create_session()
        s = engine.sessions[sid]
        # first frame at (0,0,3) facing +x, terrain at 1.0
        assert s.avatar.position.x == pytest.approx(DEFAULT_ALPHA_M)
        assert s.avatar.position.y == pytest.approx(0.0)
        assert s.avatar.position.z == pytest.approx(1.0)
        assert s.view.frame_index == 0

    def test_create_checks_scene_id(self, engine):
        with pytest.raises(SceneNotLoaded):
            engine.create_session(scene_id="other")
        sid = engine.create_session(scene_id="scene")
        assert sid in engine.sessions

    def test_hello_packet(self, engine):
        sid = engine.create_session()
        h = engine.hello(sid)
        assert h["proto"] == PROTOCOL
        assert h["session"] == sid
        assert h["streets"] == ["st0"]
        assert h["scenarios"] == ["L1", "L2"]
        assert h["pano_size"] == [128, 64]

    def test_unknown_session_is_an_error_packet(self, engine):
        out = engine.handle("nope", {"type": "move", "dx": 0.1, "dy": 0})
        assert out["type"] == "error"
        assert out["code"] == "SessionUnknown"

    def test_drop_session(self, engine):
        sid = engine.create_session()
        engine.drop_session(sid)
        assert sid not in engine.sessions
        engine.drop_session(sid)  # idempotent

    def test_sessions_are_isolated(self, engine):
        # interleaving two sessions gives the same packets as running each
        # serially on a fresh engine
        msgs_a = [{"type": "move", "dx": 0.4, "dy": 0.0} for _ in range(30)]
        msgs_b = [{"type": "move", "dx": -0.2, "dy": 0.3} for _ in range(30)]
        a = engine.create_session()
        b = engine.create_session()
        inter_a, inter_b = [], []
        for ma, mb in zip(msgs_a, msgs_b):
            inter_a.append(canonical(engine.handle(a, ma)))
            inter_b.append(canonical(engine.handle(b, mb)))
        serial_a = [canonical(p) for p in drive(engine, engine.create_session(), msgs_a)]
        serial_b = [canonical(p) for p in drive(engine, engine.create_session(), msgs_b)]
        assert inter_a == serial_a
        assert inter_b == serial_b


class TestMove:
    def test_step_cap(self, engine):
        sid = engine.create_session()
        before = engine.sessions[sid].avatar.position
        engine.handle(sid, {"type": "move", "dx": 30.0, "dy": 40.0})
        after = engine.sessions[sid].avatar.position
        d = math.hypot(after.x - before.x, after.y - before.y)
        assert d == pytest.approx(MAX_STEP_M)
        # direction preserved: 3/5, 4/5
        assert (after.x - before.x) == pytest.approx(0.3)
        assert (after.y - before.y) == pytest.approx(0.4)

    def test_small_steps_pass_through(self, engine):
        sid = engine.create_session()
        before = engine.sessions[sid].avatar.position
        engine.handle(sid, {"type": "move", "dx": 0.2, "dy": -0.1})
        after = engine.sessions[sid].avatar.position
        assert after.x - before.x == pytest.approx(0.2)
        assert after.y - before.y == pytest.approx(-0.1)

    def test_out_of_bounds_keeps_position(self, demo_scene, demo_traj):
        eng = WalkEngine(demo_scene, [demo_traj], width=64, height=32)
        sid = eng.create_session()
        s = eng.sessions[sid]
        # walk the avatar to the terrain edge, then push past it
        s.avatar = type(s.avatar)(position=Vec3(199.8, 0.0, 1.0))
        eng.handle(sid, {"type": "move", "dx": 0.5, "dy": 0.0})
        assert eng.sessions[sid].avatar.position.x == pytest.approx(199.8)

    def test_bad_values_are_errors(self, engine):
        sid = engine.create_session()
        for msg in (
            {"type": "move", "dx": "x", "dy": 0},
            {"type": "move", "dx": float("nan"), "dy": 0},
            {"type": "move", "dx": float("inf"), "dy": 1},
        ):
            out = engine.handle(sid, msg)
            assert out["type"] == "error" and out["code"] == "BadMessage"

    def test_frame_advances_at_most_one_per_tick(self, engine):
        sid = engine.create_session()
        frames = [engine.sessions[sid].view.frame_index]
        for _ in range(200):
            engine.handle(sid, {"type": "move", "dx": 0.5, "dy": 0.0})
            frames.append(engine.sessions[sid].view.frame_index)
        deltas = [b - a for a, b in zip(frames, frames[1:])]
        assert all(d in (0, 1) for d in deltas)
        assert max(frames) == 15  # reached the last frame

    def test_view_packet_schema(self, engine):
        sid = engine.create_session()
        p = engine.handle(sid, {"type": "move", "dx": 0.1, "dy": 0.0})
        assert p["type"] == "view"
        assert p["street"] == "st0"
        assert isinstance(p["frame"], int)
        assert p["asset"] == f"/pano/st0/{p['frame']}.pgm"
        q = p["q_view"]
        assert len(q) == 4
        assert sum(c * c for c in q) == pytest.approx(1.0)
        assert len(p["frame_position"]) == 3
        assert len(p["avatar"]) == 3
        assert p["overlays"] == {"water": None, "shadow": None}
        assert p["flags"] == {"camera_under_water": False, "sun_below_horizon": False}
        assert p["scenario"] is None
        assert p["time"] is None


class TestScenarioAndTime:
    def test_scenario_sets_overlay_url_and_flag(self, engine):
        sid = engine.create_session()
        p = engine.handle(sid, {"type": "scenario", "id": "L1"})
        assert p["scenario"] == "L1"
        assert p["overlays"]["water"] == "/overlay/water-st0-0-L1.pgm"
        # camera at z=3 sits under the 3.2 m surface
        assert p["flags"]["camera_under_water"] is True
        p2 = engine.handle(sid, {"type": "scenario", "id": None})
        assert p2["scenario"] is None
        assert p2["overlays"]["water"] is None

    def test_unknown_scenario_is_error(self, engine):
        sid = engine.create_session()
        out = engine.handle(sid, {"type": "scenario", "id": "L99"})
        assert out["type"] == "error" and out["code"] == "UnknownScenario"

    def test_time_sets_shadow_url(self, engine):
        sid = engine.create_session()
        p = engine.handle(sid, {"type": "time", "iso": "2024-07-01T03:00:00Z"})
        assert p["time"] == "2024-07-01T03:00:00Z"
        assert p["overlays"]["shadow"] == "/overlay/shadow-st0-0-20240701T030000Z.pgm"
        assert p["flags"]["sun_below_horizon"] is False

    def test_night_time_flags_instead_of_url(self, engine):
        sid = engine.create_session()
        p = engine.handle(sid, {"type": "time", "iso": "2024-07-01T15:00:00Z"})
        assert p["overlays"]["shadow"] is None
        assert p["flags"]["sun_below_horizon"] is True

    def test_naive_time_treated_as_utc(self, engine):
        sid = engine.create_session()
        p = engine.handle(sid, {"type": "time", "iso": "2024-07-01T03:00:00"})
        assert p["time"] == "2024-07-01T03:00:00Z"

    def test_offset_time_normalized_to_utc(self, engine):
        sid = engine.create_session()
        p = engine.handle(sid, {"type": "time", "iso": "2024-07-01T12:00:00+09:00"})
        assert p["time"] == "2024-07-01T03:00:00Z"

    def test_bad_time_is_error(self, engine):
        sid = engine.create_session()
        out = engine.handle(sid, {"type": "time", "iso": "yesterday"})
        assert out["type"] == "error" and out["code"] == "BadMessage"

    def test_clearing_time(self, engine):
        sid = engine.create_session()
        engine.handle(sid, {"type": "time", "iso": "2024-07-01T03:00:00Z"})
        p = engine.handle(sid, {"type": "time", "iso": None})
        assert p["time"] is None and p["overlays"]["shadow"] is None


class TestClick:
    def test_click_building_center(self, engine):
        sid = engine.create_session()
        engine.handle(sid, {"type": "scenario", "id": "L1"})
        # frame 0 at (0,0,3) facing +x; wall at x=20 fills the field center
        p = engine.handle(sid, {"type": "click", "u": 64, "v": 32})
        assert p["type"] == "info"
        assert p["building"] == "bldg-1"
        assert p["height"] == 10.0
        assert p["attributes"]["address"] == "1-2-3 Example Ward"
        assert p["scenario"] == "L1"
        assert p["flood_depth"] == pytest.approx(2.2)
        assert p["distance"] == pytest.approx(20.0, abs=0.2)

    def test_click_without_scenario_has_no_depth(self, engine):
        sid = engine.create_session()
        p = engine.handle(sid, {"type": "click", "u": 64, "v": 32})
        assert p["type"] == "info"
        assert p["flood_depth"] is None

    def test_click_sky_is_error(self, engine):
        sid = engine.create_session()
        out = engine.handle(sid, {"type": "click", "u": 64, "v": 0})
        assert out["type"] == "error" and out["code"] == "NoBuildingAtPixel"

    def test_click_terrain_is_error(self, engine):
        sid = engine.create_session()
        # looking straight back and down: terrain, no building
        out = engine.handle(sid, {"type": "click", "u": 0, "v": 63})
        assert out["type"] == "error" and out["code"] == "NoBuildingAtPixel"

    def test_click_out_of_range_is_error(self, engine):
        sid = engine.create_session()
        for u, v in ((-1, 10), (128, 10), (5, 64), (5, -2)):
            out = engine.handle(sid, {"type": "click", "u": u, "v": v})
            assert out["type"] == "error" and out["code"] == "BadMessage"

    def test_click_missing_coords_is_error(self, engine):
        sid = engine.create_session()
        out = engine.handle(sid, {"type": "click"})
        assert out["type"] == "error" and out["code"] == "BadMessage"


class TestTextLayer:
    def test_canonical_is_sorted_and_compact(self):
        s = canonical({"b": 1, "a": [1, 2], "c": None})
        assert s == '{"a":[1,2],"b":1,"c":null}'

    def test_handle_text_round_trip(self, engine):
        sid = engine.create_session()
        out = engine.handle_text(sid, '{"type":"move","dx":0.1,"dy":0.0}')
        p = json.loads(out)
        assert p["type"] == "view"

    def test_handle_text_bad_json(self, engine):
        sid = engine.create_session()
        out = json.loads(engine.handle_text(sid, "{nope"))
        assert out["type"] == "error" and out["code"] == "BadMessage"
        out = json.loads(engine.handle_text(sid, "[1,2]"))
        assert out["type"] == "error" and out["code"] == "BadMessage"

    def test_unknown_type_is_error(self, engine):
        sid = engine.create_session()
        out = engine.handle(sid, {"type": "teleport"})
        assert out["type"] == "error" and out["code"] == "BadMessage"


class TestReplayDeterminism:
    def script(self, rng, n=120):
        msgs = []
        for k in range(n):
            r = rng.random()
            if r < 0.7:
                msgs.append(
                    {"type": "move", "dx": float(rng.uniform(-0.6, 0.6)),
                     "dy": float(rng.uniform(-0.6, 0.6))}
                )
            elif r < 0.8:
                msgs.append({"type": "scenario", "id": ["L1", "L2", None][k % 3]})
            elif r < 0.9:
                msgs.append({"type": "time", "iso": f"2024-07-01T{k % 24:02d}:00:00Z"})
            else:
                msgs.append({"type": "click", "u": float(rng.integers(0, 128)),
                             "v": float(rng.integers(0, 64))})
        return msgs

    def test_replay_is_byte_identical(self, demo_scene, demo_traj):
        msgs = self.script(np.random.default_rng(12))
        logs = []
        for _ in range(2):
            eng = WalkEngine(demo_scene, [demo_traj], width=128, height=64)
            sid = eng.create_session()
            logs.append("\n".join(eng.handle_text(sid, canonical(m)) for m in msgs))
        assert logs[0] == logs[1]


class TestOverlayDelivery:
    def test_water_overlay_bytes(self, engine):
        sid = engine.create_session()
        p = engine.handle(sid, {"type": "scenario", "id": "L1"})
        key = p["overlays"]["water"].removeprefix("/overlay/").removesuffix(".pgm")
        data = engine.overlay_bytes(key)
        assert data.startswith(b"P5\n128 64\n255\n")
        assert len(data) == len(b"P5\n128 64\n255\n") + 128 * 64
        # second fetch comes from the cache, same object
        assert engine.overlay_bytes(key) is data

    def test_shadow_overlay_bytes(self, engine):
        sid = engine.create_session()
        p = engine.handle(sid, {"type": "time", "iso": "2024-07-01T03:00:00Z"})
        key = p["overlays"]["shadow"].removeprefix("/overlay/").removesuffix(".pgm")
        data = engine.overlay_bytes(key)
        assert data.startswith(b"P5\n128 64\n255\n")

    def test_unknown_key_is_none(self, engine):
        assert engine.overlay_bytes("water-st0-0-L9") is None


class TestWebApp:
    @pytest.fixture()
    def client(self, engine, tmp_path):
        from fastapi.testclient import TestClient
        from citywalk.webapp import make_app

        street_dir = tmp_path / "st0"
        street_dir.mkdir()
        (street_dir / "0.pgm").write_bytes(b"P5\n2 1\n255\n\x00\xff")
        return TestClient(make_app(engine, str(tmp_path)))

    def test_scene_json(self, client, engine):
        r = client.get("/scene.json")
        assert r.status_code == 200
        assert r.text == engine.scene_json()

    def test_pano_asset(self, client):
        r = client.get("/pano/st0/0.pgm")
        assert r.status_code == 200
        assert r.content == b"P5\n2 1\n255\n\x00\xff"
        assert r.headers["content-type"] == "image/x-portable-graymap"

    def test_pano_missing_and_bad_names(self, client):
        assert client.get("/pano/st0/99.pgm").status_code == 404
        assert client.get("/pano/st0/%2e%2e%2fsecret").status_code in (400, 404)

    def test_overlay_route(self, client, engine):
        sid = engine.create_session()
        p = engine.handle(sid, {"type": "scenario", "id": "L1"})
        r = client.get(p["overlays"]["water"])
        assert r.status_code == 200
        assert r.content.startswith(b"P5\n")
        assert client.get("/overlay/water-zzz-0-L1.pgm").status_code == 404

    def test_websocket_flow(self, client):
        with client.websocket_connect("/ws") as ws:
            hello = json.loads(ws.receive_text())
            assert hello["type"] == "hello"
            assert hello["proto"] == PROTOCOL
            ws.send_text('{"type":"move","dx":0.3,"dy":0.0}')
            view = json.loads(ws.receive_text())
            assert view["type"] == "view"
            ws.send_text('{"type":"click","u":64,"v":32}')
            info = json.loads(ws.receive_text())
            assert info["type"] == "info"
            assert info["building"] == "bldg-1"
