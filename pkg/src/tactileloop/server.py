"""Live session served over a WebSocket, for the browser UI.

One session owner advances the loop against the wall clock in fixed-step
batches; clients exchange JSON messages with it through per-connection
queues.  The first connection is the controller and may send control
messages; later connections are viewers and receive the same broadcast.

Stream messages (server -> client), each carrying a monotone
nondecreasing session time t:

    {"kind": "state",      "t": ..., "payload": {z, proximity, raw_code,
                                     level, u_q, current, detected, armed}}
    {"kind": "sound",      "t": ..., "payload": {f_sound, tau_sound, amp_sound}}
    {"kind": "config_ack", "t": ..., "payload": {...}}
    {"kind": "error",      "t": ..., "payload": {code, message}}

Control messages (client -> server):

    {"kind": "set_target", "payload": {"z_target": metres}}
    {"kind": "load_behaviour", "payload": {<BehaviourSpec fields>}}
    {"kind": "start"} | {"kind": "stop"} | {"kind": "reset_calibration"}

State messages are decimated to the stream rate (~60 Hz); sound events are
never decimated.  If the session falls more than 250 ms behind the wall
clock it re-anchors and reports an error instead of accumulating lag.
"""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import asdict

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .behaviour import BehaviourSpec
from .physics import HandTarget, drive_to_current
from .session import ClosedLoop, SessionConfig, SensorRow, config_to_dict

Z_TARGET_MAX_M = 0.12  # just past the range where force stays perceivable
STREAM_RATE_HZ = 60
MAX_LAG_S = 0.25

CONTROL_KINDS = {"set_target", "load_behaviour", "start", "stop", "reset_calibration"}


def stream_message(kind: str, t: float, payload: dict | None = None) -> str:
    return json.dumps({"kind": kind, "t": t, "payload": payload or {}})


class LiveSession:
    """Owns the loop state and turns control messages into tick inputs."""

    def __init__(self, cfg: SessionConfig):
        self.cfg = cfg
        self.loop = ClosedLoop(cfg)
        self.running = False
        self.target = cfg.trajectory.target_at(0.0)
        self.last_sensor: SensorRow | None = None
        self.applied_log: list[tuple[int, str, dict]] = []
        self._anchor: float | None = None

    @property
    def t(self) -> float:
        return self.loop.t

    def active_config_doc(self) -> dict:
        doc = config_to_dict(self.cfg)
        doc["behaviour"] = asdict(self.loop.behaviour_spec)
        return doc

    def start(self, now: float) -> None:
        self.running = True
        self._anchor = now - self.loop.tick_index * self.cfg.physics.dt

    def stop(self) -> None:
        self.running = False

    def apply_control(self, kind: str, payload: dict, now: float) -> dict | None:
        """Apply one already-validated control; returns an ack payload or None."""
        self.applied_log.append((self.loop.tick_index, kind, payload))
        if kind == "set_target":
            z = min(Z_TARGET_MAX_M, max(0.0, float(payload["z_target"])))
            self.target = HandTarget(z_target=z, v_target=0.0)
            return None
        if kind == "load_behaviour":
            spec = BehaviourSpec(**payload)
            spec.validate(self.cfg.actuator.control_rate_hz)
            self.loop.behaviour_spec = spec
            return {"behaviour": asdict(spec)}
        if kind == "start":
            self.start(now)
            return None
        if kind == "stop":
            self.stop()
            return None
        if kind == "reset_calibration":
            self.loop.reset_calibration()
            return None
        raise ValueError(f"unhandled control kind {kind!r}")

    def advance(self, now: float) -> tuple[list[str], bool]:
        """Advance to the wall clock; returns (messages, lagged)."""
        if not self.running or self._anchor is None:
            return [], False
        dt = self.cfg.physics.dt
        target_tick = int((now - self._anchor) / dt)
        lagged = (target_tick - self.loop.tick_index) * dt > MAX_LAG_S
        if lagged:
            # Too far behind: skip the backlog instead of grinding through it.
            self._anchor = now - self.loop.tick_index * dt
            target_tick = self.loop.tick_index
        messages: list[str] = []
        while self.loop.tick_index < target_tick:
            out = self.loop.tick(self.target)
            if out.sensor is not None:
                self.last_sensor = out.sensor
            if out.sound is not None:
                messages.append(stream_message("sound", out.sound.t, {
                    "f_sound": out.sound.f_sound,
                    "tau_sound": out.sound.tau_sound,
                    "amp_sound": out.sound.amp_sound,
                }))
        messages.append(self.state_message())
        return messages, lagged

    def state_message(self) -> str:
        sensor = self.last_sensor
        return stream_message("state", self.t, {
            "z": self.loop.state.z,
            "proximity": sensor.proximity if sensor else 0.0,
            "raw_code": sensor.raw_code if sensor else 0,
            "level": self.loop.held_level,
            "u_q": self.loop.held_u_q,
            "current": drive_to_current(self.loop.held_u_q, self.cfg.actuator.i_max),
            "detected": bool(sensor.detected) if sensor else False,
            "armed": self.loop.behaviour_state.armed,
        })


class Hub:
    """Connection registry: one controller, any number of viewers."""

    def __init__(self) -> None:
        self.queues: dict[WebSocket, asyncio.Queue[str]] = {}
        self.controller: WebSocket | None = None

    def register(self, ws: WebSocket) -> asyncio.Queue[str]:
        queue: asyncio.Queue[str] = asyncio.Queue()
        self.queues[ws] = queue
        if self.controller is None:
            self.controller = ws
        return queue

    def unregister(self, ws: WebSocket) -> bool:
        """Drop a connection; returns True when it was the controller."""
        self.queues.pop(ws, None)
        if self.controller is ws:
            self.controller = None
            return True
        return False

    def broadcast(self, messages: list[str]) -> None:
        for queue in self.queues.values():
            for msg in messages:
                queue.put_nowait(msg)

    def send_to(self, ws: WebSocket, message: str) -> None:
        queue = self.queues.get(ws)
        if queue is not None:
            queue.put_nowait(message)


def build_app(cfg: SessionConfig, ui_dir: str | None = None) -> FastAPI:
    cfg.validate()
    live = LiveSession(cfg)
    hub = Hub()

    app = FastAPI(title="tactileloop live session")
    app.state.live = live
    app.state.hub = hub

    @app.on_event("startup")
    async def start_pacing() -> None:
        app.state.pacer = asyncio.create_task(_pace(live, hub))

    @app.on_event("shutdown")
    async def stop_pacing() -> None:
        app.state.pacer.cancel()

    @app.get("/config")
    async def get_config() -> dict:
        return live.active_config_doc()

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        queue = hub.register(ws)
        sender = asyncio.create_task(_drain(queue, ws))
        try:
            while True:
                text = await ws.receive_text()
                _handle_client_text(live, hub, ws, text)
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            if hub.unregister(ws):
                live.stop()  # controller gone: pause rather than play to nobody

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app


def _handle_client_text(live: LiveSession, hub: Hub, ws: WebSocket, text: str) -> None:
    try:
        msg = json.loads(text)
    except json.JSONDecodeError:
        hub.send_to(ws, stream_message("error", live.t, {
            "code": "bad_json", "message": "control message is not valid JSON"}))
        return
    kind = msg.get("kind") if isinstance(msg, dict) else None
    if kind not in CONTROL_KINDS:
        hub.send_to(ws, stream_message("error", live.t, {
            "code": "bad_kind", "message": f"unknown control kind {kind!r}"}))
        return
    if hub.controller is not ws:
        hub.send_to(ws, stream_message("error", live.t, {
            "code": "not_controller", "message": "only the first connection may control"}))
        return
    payload = msg.get("payload") or {}
    try:
        ack = live.apply_control(kind, payload, time.monotonic())
    except (KeyError, TypeError, ValueError) as exc:
        hub.send_to(ws, stream_message("error", live.t, {
            "code": "bad_payload", "message": f"{kind}: {exc}"}))
        return
    if ack is not None:
        hub.send_to(ws, stream_message("config_ack", live.t, ack))


async def _drain(queue: asyncio.Queue[str], ws: WebSocket) -> None:
    while True:
        msg = await queue.get()
        await ws.send_text(msg)


async def _pace(live: LiveSession, hub: Hub) -> None:
    period = 1.0 / STREAM_RATE_HZ
    while True:
        await asyncio.sleep(period)
        if not live.running:
            continue
        messages, lagged = live.advance(time.monotonic())
        if lagged:
            messages.insert(0, stream_message("error", live.t, {
                "code": "lag", "message": "session fell behind wall clock; skipped ahead"}))
        hub.broadcast(messages)


def serve(cfg: SessionConfig, host: str = "127.0.0.1", port: int = 8000,
          ui_dir: str | None = None) -> None:
    """Run the live session server until interrupted."""
    import uvicorn

    uvicorn.run(build_app(cfg, ui_dir), host=host, port=port, log_level="warning")
