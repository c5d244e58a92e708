import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from condgen.agents import GreedyAgent, RandomAgent
from condgen.config import parse_config
from condgen.serve import MAX_FRAME_BYTES, SteerSession, build_app, handle_message


def make_config(interval_ms=20):
    return parse_config({
        "domain": {"name": "binary", "size": [6, 6]},
        "control": {"controlled": ["regions"], "bounds": {"regions": [1, 6]}},
        "service": {"interval_ms": interval_ms},
    })


def make_session(agent=None, seed=0):
    config = make_config()
    env = config.build_env()
    return SteerSession(env, agent or GreedyAgent(), config.service.interval_ms, seed=seed)


class TestSteerSession:
    def test_initial_goal_is_bounds_midpoint(self):
        session = make_session()
        assert session.goal.tolist() == [3]  # (1 + 6) // 2

    def test_tick_advances_steps(self):
        session = make_session()
        before = session.state.steps
        session.tick()
        assert session.state.steps == before + 1

    def test_tick_after_done_starts_fresh_episode(self):
        session = make_session(agent=RandomAgent(), seed=3)
        for _ in range(2000):
            if session.state.done:
                break
            session.tick()
        assert session.state.done
        session.tick()
        assert not session.state.done
        assert session.state.steps == 0

    def test_apply_targets_merges(self):
        session = make_session()
        session.apply_targets({"regions": 5})
        assert session.goal.tolist() == [5]
        assert session.state.goal.tolist() == [5]

    def test_apply_targets_rejections(self):
        from condgen.env import GoalBoundsError

        session = make_session()
        with pytest.raises(GoalBoundsError, match="unknown metric"):
            session.apply_targets({"lava": 1})
        with pytest.raises(GoalBoundsError, match="integer"):
            session.apply_targets({"regions": 2.5})
        with pytest.raises(GoalBoundsError, match="integer"):
            session.apply_targets({"regions": True})
        with pytest.raises(GoalBoundsError):
            session.apply_targets({"regions": 99})
        assert session.goal.tolist() == [3]  # unchanged after failures

    def test_apply_targets_while_done(self):
        session = make_session(agent=RandomAgent(), seed=3)
        for _ in range(2000):
            if session.state.done:
                break
            session.tick()
        assert session.state.done
        session.apply_targets({"regions": 6})
        assert session.state.goal.tolist() == [6]

    def test_hello_frame(self):
        frame = make_session().hello_frame()
        assert frame == {
            "type": "hello",
            "domain": "binary",
            "bounds": {"regions": [1, 6]},
            "alphabet": ["floor", "wall"],
        }

    def test_state_frame_shape_and_condition(self):
        session = make_session()
        frame = session.state_frame()
        assert frame["type"] == "state"
        assert len(frame["grid"]) == 6 and len(frame["grid"][0]) == 6
        assert set(frame["metrics"]) == {"regions", "path_length"}
        assert frame["goal"] == {"regions": 3}
        current = frame["metrics"]["regions"]
        assert frame["condition"]["regions"] == int(np.sign(3 - current))
        assert frame["done_reason"] == "running"
        assert len(json.dumps(frame).encode()) < MAX_FRAME_BYTES


class TestHandleMessage:
    def test_bad_json(self):
        reply = handle_message(make_session(), "{nope")
        assert reply["type"] == "error" and reply["code"] == "bad_json"

    def test_missing_type(self):
        reply = handle_message(make_session(), json.dumps({"targets": {}}))
        assert reply["code"] == "bad_request"

    def test_unknown_type(self):
        reply = handle_message(make_session(), json.dumps({"type": "dance"}))
        assert reply["code"] == "unknown_type"

    def test_set_targets_replies_with_state(self):
        session = make_session()
        reply = handle_message(
            session, json.dumps({"type": "set_targets", "targets": {"regions": 4}})
        )
        assert reply["type"] == "state"
        assert reply["goal"] == {"regions": 4}

    def test_set_targets_out_of_bounds(self):
        reply = handle_message(
            make_session(), json.dumps({"type": "set_targets", "targets": {"regions": 40}})
        )
        assert reply["code"] == "target_out_of_bounds"

    def test_set_targets_requires_mapping(self):
        reply = handle_message(
            make_session(), json.dumps({"type": "set_targets", "targets": [1]})
        )
        assert reply["code"] == "bad_request"

    def test_pause_resume(self):
        session = make_session()
        assert handle_message(session, json.dumps({"type": "pause"})) is None
        assert session.paused
        reply = handle_message(session, json.dumps({"type": "resume"}))
        assert not session.paused
        assert reply["type"] == "state"

    def test_resume_restarts_finished_episode(self):
        session = make_session(agent=RandomAgent(), seed=3)
        for _ in range(2000):
            if session.state.done:
                break
            session.tick()
        session.paused = True
        handle_message(session, json.dumps({"type": "resume"}))
        assert not session.state.done

    def test_reset_with_seed_is_reproducible(self):
        session = make_session()
        a = handle_message(session, json.dumps({"type": "reset", "seed": 7}))
        session.tick()
        b = handle_message(session, json.dumps({"type": "reset", "seed": 7}))
        assert a["grid"] == b["grid"]

    def test_reset_seed_type_checked(self):
        reply = handle_message(make_session(), json.dumps({"type": "reset", "seed": "x"}))
        assert reply["code"] == "bad_request"

    def test_set_speed(self):
        session = make_session()
        assert handle_message(session, json.dumps({"type": "set_speed", "ms": 5})) is None
        assert session.interval_ms == 5
        reply = handle_message(session, json.dumps({"type": "set_speed", "ms": 0}))
        assert reply["code"] == "bad_request"
        reply = handle_message(session, json.dumps({"type": "set_speed", "ms": True}))
        assert reply["code"] == "bad_request"


class TestWebSocket:
    def test_hello_then_initial_state(self):
        app = build_app(make_config(), GreedyAgent())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                hello = json.loads(ws.receive_text())
                assert hello["type"] == "hello"
                assert hello["domain"] == "binary"
                state = json.loads(ws.receive_text())
                assert state["type"] == "state"
                assert state["steps"] == 0

    def test_frames_stream_without_client_input(self):
        app = build_app(make_config(interval_ms=10), GreedyAgent())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                frames = [json.loads(ws.receive_text()) for _ in range(6)]
        assert frames[0]["type"] == "hello"
        states = [f for f in frames[1:] if f["type"] == "state"]
        assert len(states) == 5
        # steps only ever grow or wrap to zero on an episode restart
        steps = [s["steps"] for s in states]
        for prev, cur in zip(steps, steps[1:]):
            assert cur == prev + 1 or cur == 0

    def test_set_targets_round_trip(self):
        app = build_app(make_config(interval_ms=10), GreedyAgent())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_text()
                ws.send_text(json.dumps({"type": "set_targets", "targets": {"regions": 6}}))
                for _ in range(20):
                    frame = json.loads(ws.receive_text())
                    if frame.get("goal") == {"regions": 6}:
                        break
                else:
                    pytest.fail("goal change never reflected in a state frame")

    def test_pause_stops_ticking(self):
        app = build_app(make_config(interval_ms=200), GreedyAgent())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_text()  # hello
                ws.receive_text()  # initial state
                ws.send_text(json.dumps({"type": "pause"}))
                time.sleep(0.7)  # several intervals; no tick frames may arrive
                ws.send_text("not json")
                seen_states = 0
                while True:
                    frame = json.loads(ws.receive_text())
                    if frame["type"] == "error":
                        assert frame["code"] == "bad_json"
                        break
                    assert frame["type"] == "state"
                    seen_states += 1
                # at most one tick frame can race the pause request
                assert seen_states <= 1
                ws.send_text(json.dumps({"type": "resume"}))
                frame = json.loads(ws.receive_text())
                assert frame["type"] == "state"

    def test_error_frames_do_not_kill_session(self):
        app = build_app(make_config(interval_ms=10), GreedyAgent())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_text()
                ws.send_text(json.dumps({"type": "set_targets", "targets": {"bogus": 1}}))
                saw_error = saw_state = False
                for _ in range(20):
                    frame = json.loads(ws.receive_text())
                    if frame["type"] == "error":
                        saw_error = True
                    elif frame["type"] == "state" and saw_error:
                        saw_state = True
                        break
                assert saw_error and saw_state

    def test_static_frontend_mount(self, tmp_path):
        (tmp_path / "index.html").write_text("<html><body>steer</body></html>")
        app = build_app(make_config(), GreedyAgent(), tmp_path)
        with TestClient(app) as client:
            response = client.get("/")
            assert response.status_code == 200
            assert "steer" in response.text

    def test_no_frontend_means_no_root_route(self):
        app = build_app(make_config(), GreedyAgent(), None)
        with TestClient(app) as client:
            assert client.get("/").status_code == 404
