"""Live steering service.

One WebSocket connection is one session: an inference episode stepped at a
fixed interval by the configured agent, streaming JSON state frames.  The
client can re-target any controlled metric mid-episode, pause/resume,
reset, and change the step interval.  Terminated episodes restart from a
fresh random map automatically while not paused.

Frames (all JSON text, at most 64 KiB):
  server: {"type":"hello","domain":str,"bounds":{metric:[lo,hi]},"alphabet":[str]}
          {"type":"state","grid":[[int]],"metrics":{},"goal":{},"condition":{},
           "steps":int,"changes":int,"done_reason":str}
          {"type":"error","code":str,"detail":str}
  client: {"type":"set_targets","targets":{metric:int}}
          {"type":"pause"} {"type":"resume"} {"type":"reset","seed":int|null}
          {"type":"set_speed","ms":int}
"""

from __future__ import annotations

import asyncio
import json
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from condgen.config import RunConfig
from condgen.env import CondGenEnv, GoalBoundsError
from condgen.metrics import metrics_as_dict

MAX_FRAME_BYTES = 64 * 1024


class SteerSession:
    """Single-connection episode driver; all access is from one coroutine."""

    def __init__(self, env: CondGenEnv, agent, interval_ms: int, seed: int | None = None):
        self.env = env
        self.agent = agent
        self.interval_ms = interval_ms
        self.paused = False
        self.rng = np.random.default_rng(seed)
        bounds = env.control.bounds_array()
        # Start aiming at the middle of each controlled range.
        self.goal = (bounds[:, 0] + bounds[:, 1]) // 2
        self.state, self.obs = env.reset(self.goal, self._episode_seed())

    def _episode_seed(self) -> np.random.Generator:
        return np.random.default_rng(int(self.rng.integers(0, 2**63)))

    def reset(self, seed: int | None = None) -> None:
        source = np.random.default_rng(seed) if seed is not None else self._episode_seed()
        self.state, self.obs = self.env.reset(self.goal, source)

    def tick(self) -> None:
        """One agent step; on termination, start the next episode."""
        if self.state.done:
            self.reset()
            return
        action = self.agent.act(self.env, self.state, self.obs, self.rng)
        result = self.env.step(self.state, action)
        self.obs = result.observation

    def apply_targets(self, targets: dict) -> None:
        """Merge per-metric targets into the goal; bounds-checked atomically."""
        control = self.env.control
        unknown = set(targets) - set(control.controlled)
        if unknown:
            raise GoalBoundsError(f"unknown metric {sorted(unknown)[0]!r}")
        candidate = self.goal.copy()
        for i, name in enumerate(control.controlled):
            if name in targets:
                value = targets[name]
                if not isinstance(value, int) or isinstance(value, bool):
                    raise GoalBoundsError(f"target {name} must be an integer")
                candidate[i] = value
        self.goal = control.validate_goal(candidate)
        if not self.state.done:
            self.env.set_goal(self.state, self.goal)
        else:
            self.state.goal = self.goal  # picked up by the next reset's frame

    def hello_frame(self) -> dict:
        control = self.env.control
        return {
            "type": "hello",
            "domain": self.env.domain.name,
            "bounds": {name: list(control.bounds[name]) for name in control.controlled},
            "alphabet": list(self.env.domain.alphabet),
        }

    def state_frame(self) -> dict:
        state = self.state
        control = self.env.control
        controlled = control.controlled_values(state.s_t)
        condition = np.sign(self.goal - controlled)
        return {
            "type": "state",
            "grid": state.grid.cells.tolist(),
            "metrics": metrics_as_dict(self.env.domain, state.s_t),
            "goal": {name: int(v) for name, v in zip(control.controlled, self.goal)},
            "condition": {name: int(c) for name, c in zip(control.controlled, condition)},
            "steps": state.steps,
            "changes": state.changes,
            "done_reason": state.done_reason,
        }


def build_app(config: RunConfig, agent, frontend_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI()
    domain = config.build_domain()
    control = config.build_control(domain)

    def make_env() -> CondGenEnv:
        return CondGenEnv(
            domain, control, change_ratio=config.env.change_ratio,
            raster_order=config.env.raster_order,
        )

    async def send_frame(ws: WebSocket, frame: dict) -> None:
        text = json.dumps(frame, separators=(",", ":"))
        if len(text.encode()) > MAX_FRAME_BYTES:
            raise RuntimeError("frame exceeds the 64 KiB protocol limit")
        await ws.send_text(text)

    @app.websocket("/ws")
    async def steer(ws: WebSocket) -> None:
        await ws.accept()
        session = SteerSession(make_env(), agent, config.service.interval_ms)
        await send_frame(ws, session.hello_frame())
        await send_frame(ws, session.state_frame())
        try:
            while True:
                timeout = None if session.paused else session.interval_ms / 1000.0
                try:
                    raw = await asyncio.wait_for(ws.receive_text(), timeout)
                except asyncio.TimeoutError:
                    session.tick()
                    await send_frame(ws, session.state_frame())
                    continue
                reply = handle_message(session, raw)
                if reply is not None:
                    await send_frame(ws, reply)
        except WebSocketDisconnect:
            return

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")
    return app


def handle_message(session: SteerSession, raw: str) -> dict | None:
    """Apply one client frame; returns the frame to send back, if any."""
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError as exc:
        return {"type": "error", "code": "bad_json", "detail": str(exc)}
    if not isinstance(msg, dict) or "type" not in msg:
        return {"type": "error", "code": "bad_request", "detail": "missing frame type"}
    kind = msg["type"]

    if kind == "set_targets":
        targets = msg.get("targets")
        if not isinstance(targets, dict):
            return {"type": "error", "code": "bad_request", "detail": "targets must be a mapping"}
        try:
            session.apply_targets(targets)
        except GoalBoundsError as exc:
            return {"type": "error", "code": "target_out_of_bounds", "detail": str(exc)}
        return session.state_frame()

    if kind == "pause":
        session.paused = True
        return None

    if kind == "resume":
        session.paused = False
        if session.state.done:
            session.reset()
        return session.state_frame()

    if kind == "reset":
        seed = msg.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
            return {"type": "error", "code": "bad_request", "detail": "seed must be int or null"}
        session.reset(seed)
        return session.state_frame()

    if kind == "set_speed":
        ms = msg.get("ms")
        if not isinstance(ms, int) or isinstance(ms, bool) or ms < 1:
            return {"type": "error", "code": "bad_request", "detail": "ms must be a positive integer"}
        session.interval_ms = ms
        return None

    return {"type": "error", "code": "unknown_type", "detail": f"unknown frame type {kind!r}"}
