"""Deterministic simulated drone environment implementing every token contract.

The world advances only through :meth:`SimWorld.step`, called once per tick by
the runtime's clock; token calls register intents and handles, which the step
function updates at tick boundaries. Geometry uses a local flat-earth ENU
frame around the home point (fine for mission scales up to ~10 km).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .model import location as make_location
from .runtime import (
    ButtonToken,
    CameraToken,
    ClawToken,
    DetectionHandle,
    GimbalToken,
    LevelSensorToken,
    MovementToken,
    OpHandle,
    PhotoResult,
    SpeakerToken,
    TokenInterface,
    TrackHandle,
)

METERS_PER_DEG_LAT = 111320.0

CLAW_OP_SECONDS = 1.0
AUDIO_CLIP_SECONDS = 2.0
FOLLOW_FLOOR = 2.0
COVERAGE_FLOOR = 10.0
RETURN_FLOOR = 5.0


class SimWorldError(ValueError):
    pass


@dataclass(frozen=True)
class ScriptedField:
    """Circular sensor field with linear falloff from ``level`` at the center."""

    center: dict
    radius: float
    level: float


@dataclass(frozen=True)
class ScriptedObject:
    """A detectable world object following a piecewise-linear timed path."""

    object_id: str
    image: str
    path: tuple[tuple[float, dict], ...]  # (time, location), times ascending
    visible_from: float = 0.0
    visible_until: float = math.inf


@dataclass(frozen=True)
class SimWorldConfig:
    home: dict = field(default_factory=lambda: make_location(37.0, -122.0, 0.0))
    max_speed: float = 10.0
    ascent_rate: float = 2.0
    descent_rate: float = 2.0
    tick: float = 0.1
    battery_minutes: float = 20.0
    critical_fraction: float = 0.10
    arrival_tolerance: float = 2.0
    detection_range: float = 50.0
    sweep_spacing: float = 10.0
    button_presses: tuple[float, ...] = ()
    gas_fields: tuple[ScriptedField, ...] = ()
    humidity_fields: tuple[ScriptedField, ...] = ()
    objects: tuple[ScriptedObject, ...] = ()
    seed: int = 0  # reserved for stochastic worlds

    def __post_init__(self) -> None:
        if self.tick <= 0:
            raise SimWorldError("tick must be positive")
        if self.arrival_tolerance <= 0:
            raise SimWorldError("arrival tolerance must be positive")
        if min(self.max_speed, self.ascent_rate, self.descent_rate) <= 0:
            raise SimWorldError("speeds and climb rates must be positive")
        if self.battery_minutes <= 0 or not (0 < self.critical_fraction < 1):
            raise SimWorldError("battery configuration out of range")


def config_to_json(config: SimWorldConfig) -> dict:
    return {
        "home": dict(config.home),
        "maxSpeed": config.max_speed,
        "ascentRate": config.ascent_rate,
        "descentRate": config.descent_rate,
        "tick": config.tick,
        "batteryMinutes": config.battery_minutes,
        "criticalFraction": config.critical_fraction,
        "arrivalTolerance": config.arrival_tolerance,
        "detectionRange": config.detection_range,
        "sweepSpacing": config.sweep_spacing,
        "buttonPresses": list(config.button_presses),
        "gasFields": [
            {"center": dict(f.center), "radius": f.radius, "level": f.level}
            for f in config.gas_fields
        ],
        "humidityFields": [
            {"center": dict(f.center), "radius": f.radius, "level": f.level}
            for f in config.humidity_fields
        ],
        "objects": [
            {
                "id": o.object_id,
                "image": o.image,
                "visibleFrom": o.visible_from,
                "visibleUntil": None if math.isinf(o.visible_until) else o.visible_until,
                "path": [{"t": t, **loc} for t, loc in o.path],
            }
            for o in config.objects
        ],
        "seed": config.seed,
    }


def _field_from_json(data: dict) -> ScriptedField:
    return ScriptedField(center=dict(data["center"]), radius=float(data["radius"]),
                         level=float(data["level"]))


def config_from_json(data: dict) -> SimWorldConfig:
    known = {"home", "maxSpeed", "ascentRate", "descentRate", "tick", "batteryMinutes",
             "criticalFraction", "arrivalTolerance", "detectionRange", "sweepSpacing",
             "buttonPresses", "gasFields", "humidityFields", "objects", "seed"}
    if not isinstance(data, dict):
        raise SimWorldError("world config must be an object")
    unknown = set(data) - known
    if unknown:
        raise SimWorldError(f"unknown world config keys: {', '.join(sorted(unknown))}")
    try:
        return _config_from_json(data)
    except SimWorldError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise SimWorldError(f"malformed world config: {exc!r}") from exc


def _config_from_json(data: dict) -> SimWorldConfig:
    objects = []
    for o in data.get("objects", ()):
        path = tuple(
            (float(p["t"]), make_location(p["lat"], p["lon"], p.get("alt", 0.0)))
            for p in o["path"]
        )
        until = o.get("visibleUntil")
        objects.append(ScriptedObject(
            object_id=o["id"], image=o["image"], path=path,
            visible_from=float(o.get("visibleFrom", 0.0)),
            visible_until=math.inf if until is None else float(until)))
    defaults = SimWorldConfig()
    home = data.get("home")
    return SimWorldConfig(
        home=make_location(home["lat"], home["lon"], home.get("alt", 0.0)) if home else defaults.home,
        max_speed=float(data.get("maxSpeed", defaults.max_speed)),
        ascent_rate=float(data.get("ascentRate", defaults.ascent_rate)),
        descent_rate=float(data.get("descentRate", defaults.descent_rate)),
        tick=float(data.get("tick", defaults.tick)),
        battery_minutes=float(data.get("batteryMinutes", defaults.battery_minutes)),
        critical_fraction=float(data.get("criticalFraction", defaults.critical_fraction)),
        arrival_tolerance=float(data.get("arrivalTolerance", defaults.arrival_tolerance)),
        detection_range=float(data.get("detectionRange", defaults.detection_range)),
        sweep_spacing=float(data.get("sweepSpacing", defaults.sweep_spacing)),
        button_presses=tuple(float(t) for t in data.get("buttonPresses", ())),
        gas_fields=tuple(_field_from_json(f) for f in data.get("gasFields", ())),
        humidity_fields=tuple(_field_from_json(f) for f in data.get("humidityFields", ())),
        objects=tuple(objects),
        seed=int(data.get("seed", 0)),
    )


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

class Frame:
    """Local east/north/up frame centered on a reference location."""

    def __init__(self, origin: dict):
        self.origin = dict(origin)
        self._m_per_deg_lon = METERS_PER_DEG_LAT * math.cos(math.radians(origin["lat"]))

    def to_enu(self, loc: dict) -> tuple[float, float, float]:
        east = (loc["lon"] - self.origin["lon"]) * self._m_per_deg_lon
        north = (loc["lat"] - self.origin["lat"]) * METERS_PER_DEG_LAT
        return (east, north, loc["alt"])

    def to_location(self, east: float, north: float, up: float) -> dict:
        return make_location(
            self.origin["lat"] + north / METERS_PER_DEG_LAT,
            self.origin["lon"] + east / self._m_per_deg_lon,
            up,
        )

    def offset(self, east: float, north: float, alt: float = 0.0) -> dict:
        return self.to_location(east, north, alt)

    def box_to_enu(self, box: dict) -> tuple[float, float, float, float]:
        west, south, _ = self.to_enu(make_location(box["latMin"], box["lonMin"], 0.0))
        east, north, _ = self.to_enu(make_location(box["latMax"], box["lonMax"], 0.0))
        return (west, east, south, north)

    def box_around(self, east: float, north: float, width: float, height: float) -> dict:
        half_w, half_h = width / 2.0, height / 2.0
        sw = self.to_location(east - half_w, north - half_h, 0.0)
        ne = self.to_location(east + half_w, north + half_h, 0.0)
        return {"latMin": sw["lat"], "latMax": ne["lat"],
                "lonMin": sw["lon"], "lonMax": ne["lon"]}


def _interp(a: tuple[float, float, float], b: tuple[float, float, float], f: float):
    return tuple(a[i] + (b[i] - a[i]) * f for i in range(3))


# ---------------------------------------------------------------------------
# Movement modes and handles
# ---------------------------------------------------------------------------

class _Goto:
    def __init__(self, target: tuple[float, float, float], handle: OpHandle):
        self.target = target
        self.handle = handle


class _Sweep:
    def __init__(self, waypoints: list[tuple[float, float, float]], handle: OpHandle):
        self.waypoints = waypoints
        self.index = 0
        self.handle = handle


class _Follow:
    def __init__(self, offset: dict, floor: float):
        self.offset = offset
        self.floor = floor
        self.handle = OpHandle()  # never completes


class _Orbit:
    def __init__(self, center: tuple[float, float, float], radius: float, floor: float):
        self.center = center
        self.radius = max(radius, 1.0)
        self.floor = floor
        self.theta = 0.0
        self.handle = OpHandle()  # never completes


class _Land:
    def __init__(self, handle: OpHandle):
        self.handle = handle


class _ButtonWatch(OpHandle):
    def __init__(self, started_at: float):
        super().__init__()
        self.started_at = started_at


class SimTrackHandle(TrackHandle):
    def __init__(self, world: "SimWorld", image: str):
        self._world = world
        self._image = image
        self._object_id: str | None = None

    def position(self) -> dict | None:
        if self._object_id is None:
            obj = self._world.nearest_visible(self._image, self._world.config.detection_range)
            if obj is None:
                return None
            self._object_id = obj.object_id
            self._world.active_track = self._object_id
        east, north, up = self._world.object_position(self._object_id)
        return self._world.frame.to_location(east, north, up)

    def stop(self) -> None:
        if self._object_id is not None and self._world.active_track == self._object_id:
            self._world.active_track = None
        self._object_id = None


# ---------------------------------------------------------------------------
# World
# ---------------------------------------------------------------------------

class SimWorld:
    """Single-writer world state; advanced only by :meth:`step`."""

    def __init__(self, config: SimWorldConfig | None = None):
        self.config = config or SimWorldConfig()
        self.frame = Frame(self.config.home)
        home = self.frame.to_enu(self.config.home)
        self.position = (home[0], home[1], 0.0)
        self.heading = 0.0
        self.battery = 1.0
        self.airborne = False
        self.claw_closed = False
        self.recording = False
        self.forced_land = False
        self.active_track: str | None = None
        self.tick_index = 0
        self.mode: object | None = None
        self.op_log: list[str] = []
        self.audio_log: list[dict] = []
        self.position_history: list[tuple[float, float, float, float]] = [(0.0, *self.position)]
        self._photo_count = 0
        self._video_count = 0
        self._playing: dict | None = None
        self._detections: list[tuple[DetectionHandle, str]] = []
        self._button_watches: list[_ButtonWatch] = []
        self._timers: list[tuple[OpHandle, float]] = []
        self._object_frames = {
            o.object_id: [(t, self.frame.to_enu(loc)) for t, loc in o.path]
            for o in self.config.objects
        }
        self._tokens_by_type: dict[str, TokenInterface] = {}

    # -- time and scripted state -------------------------------------------

    @property
    def now(self) -> float:
        return round(self.tick_index * self.config.tick, 9)

    def object_position(self, object_id: str) -> tuple[float, float, float]:
        points = self._object_frames[object_id]
        t = self.now
        if t <= points[0][0]:
            return points[0][1]
        for (t0, p0), (t1, p1) in zip(points, points[1:]):
            if t <= t1:
                span = t1 - t0
                return _interp(p0, p1, (t - t0) / span if span > 0 else 1.0)
        return points[-1][1]

    def _visible(self, obj: ScriptedObject) -> bool:
        return obj.visible_from <= self.now <= obj.visible_until

    def nearest_visible(self, image: str, within: float) -> ScriptedObject | None:
        best = None
        best_dist = within
        for obj in self.config.objects:
            if obj.image != image or not self._visible(obj):
                continue
            east, north, _ = self.object_position(obj.object_id)
            dist = math.hypot(east - self.position[0], north - self.position[1])
            if dist <= best_dist:
                best = obj
                best_dist = dist
        return best

    def sensor_level(self, kind: str, east: float, north: float) -> float:
        fields = self.config.gas_fields if kind == "gas" else self.config.humidity_fields
        level = 0.0
        for f in fields:
            ce, cn, _ = self.frame.to_enu(f.center)
            dist = math.hypot(east - ce, north - cn)
            level = max(level, f.level * max(0.0, 1.0 - dist / f.radius))
        return level

    # -- motion --------------------------------------------------------------

    def _velocity_toward(self, target: tuple[float, float, float]):
        dx = target[0] - self.position[0]
        dy = target[1] - self.position[1]
        dz = target[2] - self.position[2]
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        if dist == 0.0:
            return (0.0, 0.0, 0.0), 0.0
        speed = self.config.max_speed
        vz = speed * dz / dist
        rate = self.config.ascent_rate if dz > 0 else self.config.descent_rate
        if abs(vz) > rate:
            speed *= rate / abs(vz)
        unit = (dx / dist, dy / dist, dz / dist)
        return (unit[0] * speed, unit[1] * speed, unit[2] * speed), dist

    def _move_toward(self, target: tuple[float, float, float], dt: float) -> bool:
        """Advance toward target; True when it was reached this step."""
        velocity, dist = self._velocity_toward(target)
        speed = math.sqrt(sum(v * v for v in velocity))
        if dist <= speed * dt or speed == 0.0:
            self.position = target
            return True
        if velocity[0] or velocity[1]:
            self.heading = math.degrees(math.atan2(velocity[0], velocity[1])) % 360.0
        self.position = (
            self.position[0] + velocity[0] * dt,
            self.position[1] + velocity[1] * dt,
            self.position[2] + velocity[2] * dt,
        )
        return False

    def _step_motion(self, dt: float) -> None:
        if self.forced_land:
            down = (self.position[0], self.position[1], 0.0)
            if self._move_toward(down, dt) and isinstance(self.mode, _Land):
                # an explicit landing in progress is satisfied by the forced one
                self.mode.handle.done = True
                self.mode = None
            return
        mode = self.mode
        if mode is None:
            return
        if isinstance(mode, _Goto):
            if self._move_toward(mode.target, dt):
                mode.handle.done = True
                self.mode = None
        elif isinstance(mode, _Land):
            if self._move_toward((self.position[0], self.position[1], 0.0), dt):
                mode.handle.done = True
                self.mode = None
        elif isinstance(mode, _Sweep):
            target = mode.waypoints[mode.index]
            if self._move_toward(target, dt):
                mode.index += 1
                if mode.index >= len(mode.waypoints):
                    mode.handle.done = True
                    self.mode = None
        elif isinstance(mode, _Follow):
            if self.active_track is not None:
                east, north, up = self.object_position(self.active_track)
                target = (east + mode.offset["east"], north + mode.offset["north"],
                          max(up + mode.offset["up"], mode.floor))
                self._move_toward(target, dt)
        elif isinstance(mode, _Orbit):
            mode.theta += (self.config.max_speed / mode.radius) * dt
            target = (mode.center[0] + mode.radius * math.cos(mode.theta),
                      mode.center[1] + mode.radius * math.sin(mode.theta),
                      max(mode.center[2], mode.floor))
            self._move_toward(target, dt)

    def step(self) -> None:
        self.tick_index += 1
        dt = self.config.tick
        self._step_motion(dt)
        if self.position[2] <= 0.01 and (self.forced_land or isinstance(self.mode, _Land)
                                         or self.mode is None):
            self.position = (self.position[0], self.position[1], 0.0)
        self.airborne = self.position[2] > 0.01
        drain = dt / (self.config.battery_minutes * 60.0)
        self.battery = max(0.0, self.battery - (drain if self.airborne else drain * 0.1))
        if self.airborne and self.battery <= self.config.critical_fraction and not self.forced_land:
            self.forced_land = True
            self.op_log.append(f"movement.forced-land engaged at {self.now}")
        self._update_handles()
        self.position_history.append((self.now, *self.position))

    def add_timer(self, handle: OpHandle, ready_at: float) -> None:
        self._timers.append((handle, ready_at))

    def _update_handles(self) -> None:
        for handle, ready_at in self._timers:
            if self.now >= ready_at:
                handle.done = True
        self._timers = [(h, r) for h, r in self._timers if not h.done]
        for watch in self._button_watches:
            if not watch.done:
                if any(watch.started_at <= p <= self.now for p in self.config.button_presses):
                    watch.done = True
        self._button_watches = [w for w in self._button_watches if not w.done]
        still = []
        for handle, image in self._detections:
            obj = self.nearest_visible(image, self.config.detection_range)
            if obj is not None:
                east, north, up = self.object_position(obj.object_id)
                handle.location = self.frame.to_location(east, north, up)
                handle.done = True
            else:
                still.append((handle, image))
        self._detections = still
        if self._playing is not None and self._playing["until"] is not None:
            if self.now >= self._playing["until"]:
                self._playing["handle"].done = True
                self._finish_audio()

    def _finish_audio(self) -> None:
        if self._playing is not None:
            self.audio_log.append({
                "audio": self._playing["audio"],
                "start": self._playing["start"],
                "end": self.now,
            })
            self._playing = None

    # -- intents (called by tokens) ------------------------------------------

    def start_goto(self, destination: dict, min_altitude: float | None,
                   floor: float = 0.0) -> OpHandle:
        handle = OpHandle()
        east, north, up = self.frame.to_enu(destination)
        up = max(up, min_altitude or 0.0, floor)
        target = (east, north, up)
        if self.forced_land:
            return handle  # preempted; never completes
        if target == self.position:
            handle.done = True
            return handle
        self.mode = _Goto(target, handle)
        return handle

    def start_land(self) -> OpHandle:
        handle = OpHandle()
        if not self.airborne:
            handle.done = True
            self.op_log.append("movement.land noop (already grounded)")
            return handle
        self.mode = _Land(handle)
        return handle

    def start_hover(self) -> OpHandle:
        handle = OpHandle()
        handle.done = True  # holding position is immediate
        self.mode = None
        return handle

    def start_sweep(self, area: dict, avoid: dict | None,
                    min_altitude: float | None) -> OpHandle:
        handle = OpHandle()
        west, east, south, north = self.frame.box_to_enu(area)
        spacing = self.config.sweep_spacing
        alt = max(self.position[2], min_altitude or 0.0, COVERAGE_FLOOR)
        avoid_box = self.frame.box_to_enu(avoid) if avoid is not None else None

        def centers(lo: float, hi: float) -> list[float]:
            if hi - lo <= spacing:
                return [(lo + hi) / 2.0]
            out = []
            c = lo + spacing / 2.0
            while c < hi:
                out.append(c)
                c += spacing
            return out

        waypoints: list[tuple[float, float, float]] = []
        for row, n in enumerate(centers(south, north)):
            es = centers(west, east)
            if row % 2 == 1:
                es = list(reversed(es))
            for e in es:
                if avoid_box is not None and (
                        avoid_box[0] <= e <= avoid_box[1] and avoid_box[2] <= n <= avoid_box[3]):
                    continue
                waypoints.append((e, n, alt))
        if not waypoints or self.forced_land:
            handle.done = not self.forced_land
            return handle
        self.mode = _Sweep(waypoints, handle)
        return handle

    def start_follow(self, offset: dict, min_altitude: float | None) -> OpHandle:
        mode = _Follow(offset, max(min_altitude or 0.0, FOLLOW_FLOOR))
        self.mode = mode
        return mode.handle

    def start_orbit(self, center: dict, radius: float, min_altitude: float | None) -> OpHandle:
        enu = self.frame.to_enu(center)
        mode = _Orbit(enu, radius, max(min_altitude or 0.0, FOLLOW_FLOOR))
        self.mode = mode
        return mode.handle

    def engage_forced_land(self, reason: str) -> None:
        if not self.forced_land:
            self.forced_land = True
            self.op_log.append(f"movement.forced-land engaged ({reason})")

    # -- tokens ---------------------------------------------------------------

    def token_for_type(self, token_type: str) -> TokenInterface:
        token = self._tokens_by_type.get(token_type)
        if token is None:
            token = _build_token(self, token_type)
            self._tokens_by_type[token_type] = token
        return token

    def tokens_for_deck(self, deck) -> dict[str, TokenInterface]:
        return {t.token_id: self.token_for_type(t.token_type) for t in deck.declared_tokens}


# ---------------------------------------------------------------------------
# Token implementations
# ---------------------------------------------------------------------------

class SimMovementToken(MovementToken):
    def __init__(self, world: SimWorld):
        self.world = world
        self.estop_at: float | None = None

    def fly_to(self, destination: dict, min_altitude: float | None = None) -> OpHandle:
        return self.world.start_goto(destination, min_altitude)

    def land(self) -> OpHandle:
        return self.world.start_land()

    def hover(self) -> OpHandle:
        return self.world.start_hover()

    def hover_to_altitude(self, altitude: float) -> OpHandle:
        east, north, _ = self.world.position
        target = self.world.frame.to_location(east, north, altitude)
        return self.world.start_goto(target, None)

    def return_home(self, min_altitude: float | None = None) -> OpHandle:
        home = self.world.config.home
        altitude = max(self.world.position[2], RETURN_FLOOR, min_altitude or 0.0)
        target = make_location(home["lat"], home["lon"], altitude)
        return self.world.start_goto(target, min_altitude)

    def cover_path(self, area: dict, avoid: dict | None = None,
                   min_altitude: float | None = None) -> OpHandle:
        return self.world.start_sweep(area, avoid, min_altitude)

    def circle(self, center: dict, radius: float,
               min_altitude: float | None = None) -> OpHandle:
        return self.world.start_orbit(center, radius, min_altitude)

    def follow_target(self, offset: dict, min_altitude: float | None = None) -> OpHandle:
        return self.world.start_follow(offset, min_altitude)

    def current_location(self) -> dict:
        return self.world.frame.to_location(*self.world.position)

    def at_location(self, location: dict) -> bool:
        east, north, _ = self.world.frame.to_enu(location)
        dist = math.hypot(east - self.world.position[0], north - self.world.position[1])
        return dist <= self.world.config.arrival_tolerance

    def battery_fraction(self) -> float:
        return self.world.battery

    def forced_landing_engaged(self) -> bool:
        return self.world.forced_land

    def grounded(self) -> bool:
        return not self.world.airborne

    def emergency_stop(self, reason: str) -> None:
        self.estop_at = self.world.now
        self.world.engage_forced_land(f"emergency stop: {reason}")


class SimCameraToken(CameraToken):
    def __init__(self, world: SimWorld):
        self.world = world
        self.estop_at: float | None = None

    def take_photo(self) -> PhotoResult:
        self.world._photo_count += 1
        ref = f"photo-{self.world._photo_count:04d}"
        return PhotoResult(image=ref, location=self.world.frame.to_location(*self.world.position))

    def start_video(self) -> None:
        if self.world.recording:
            self.world.op_log.append("camera.start_video noop (already recording)")
            return
        self.world.recording = True
        self.world._video_count += 1

    def stop_video(self) -> str:
        if not self.world.recording:
            self.world.op_log.append("camera.stop_video noop (not recording)")
            return ""
        self.world.recording = False
        return f"video-{self.world._video_count:04d}"

    def detect(self, image_ref: str) -> DetectionHandle:
        handle = DetectionHandle()
        obj = self.world.nearest_visible(image_ref, self.world.config.detection_range)
        if obj is not None:
            east, north, up = self.world.object_position(obj.object_id)
            handle.location = self.world.frame.to_location(east, north, up)
            handle.done = True
        else:
            self.world._detections.append((handle, image_ref))
        return handle

    def track(self, image_ref: str) -> SimTrackHandle:
        return SimTrackHandle(self.world, image_ref)

    def emergency_stop(self, reason: str) -> None:
        self.estop_at = self.world.now
        if self.world.recording:
            self.stop_video()


class SimGimbalToken(GimbalToken):
    def __init__(self, world: SimWorld):
        self.world = world
        self.estop_at: float | None = None

    def emergency_stop(self, reason: str) -> None:
        self.estop_at = self.world.now


class SimClawToken(ClawToken):
    def __init__(self, world: SimWorld):
        self.world = world
        self.estop_at: float | None = None

    def _transition(self, closed: bool, name: str) -> OpHandle:
        handle = OpHandle()
        if self.world.claw_closed == closed:
            handle.done = True
            self.world.op_log.append(f"claw.{name} noop (already {name}ed)")
            return handle
        self.world.claw_closed = closed
        self.world.add_timer(handle, self.world.now + CLAW_OP_SECONDS)
        return handle

    def open(self) -> OpHandle:
        return self._transition(False, "open")

    def close(self) -> OpHandle:
        return self._transition(True, "close")

    def emergency_stop(self, reason: str) -> None:
        self.estop_at = self.world.now


class SimSpeakerToken(SpeakerToken):
    def __init__(self, world: SimWorld):
        self.world = world
        self.estop_at: float | None = None

    def _start(self, audio_ref: str, until: float | None) -> OpHandle:
        handle = OpHandle()
        self.world._finish_audio()
        self.world._playing = {"audio": audio_ref, "start": self.world.now,
                               "until": until, "handle": handle}
        return handle

    def play(self, audio_ref: str) -> OpHandle:
        return self._start(audio_ref, self.world.now + AUDIO_CLIP_SECONDS)

    def play_loop(self, audio_ref: str) -> OpHandle:
        return self._start(audio_ref, None)

    def stop_audio(self) -> None:
        self.world._finish_audio()

    def emergency_stop(self, reason: str) -> None:
        self.estop_at = self.world.now
        self.stop_audio()


class SimLevelSensorToken(LevelSensorToken):
    def __init__(self, world: SimWorld, kind: str):
        self.world = world
        self.kind = kind
        self.token_type = f"{kind}-sensor"
        self.estop_at: float | None = None

    def read_level(self) -> float:
        return self.world.sensor_level(self.kind, self.world.position[0], self.world.position[1])

    def emergency_stop(self, reason: str) -> None:
        self.estop_at = self.world.now


class SimButtonToken(ButtonToken):
    def __init__(self, world: SimWorld):
        self.world = world
        self.estop_at: float | None = None

    def watch(self) -> OpHandle:
        handle = _ButtonWatch(self.world.now)
        if any(handle.started_at <= p <= self.world.now for p in self.world.config.button_presses):
            handle.done = True
        else:
            self.world._button_watches.append(handle)
        return handle

    def emergency_stop(self, reason: str) -> None:
        self.estop_at = self.world.now


def _build_token(world: SimWorld, token_type: str) -> TokenInterface:
    if token_type == "movement":
        return SimMovementToken(world)
    if token_type == "camera":
        return SimCameraToken(world)
    if token_type == "gimbal":
        return SimGimbalToken(world)
    if token_type == "claw":
        return SimClawToken(world)
    if token_type == "speaker":
        return SimSpeakerToken(world)
    if token_type == "gas-sensor":
        return SimLevelSensorToken(world, "gas")
    if token_type == "humidity-sensor":
        return SimLevelSensorToken(world, "humidity")
    if token_type == "button":
        return SimButtonToken(world)
    raise SimWorldError(f"the simulator has no token implementation for type {token_type!r}")


class SimClock:
    """Steps the world once per tick; optionally paces wall time by ``ratio``.

    ratio 0 runs as fast as possible; ratio 10 runs ten simulated seconds per
    wall second.
    """

    def __init__(self, world: SimWorld, ratio: float = 0.0):
        self.world = world
        self.ratio = ratio
        self.tick_seconds = world.config.tick

    def advance(self) -> None:
        self.world.step()
        if self.ratio > 0:
            time.sleep(self.tick_seconds / self.ratio)
