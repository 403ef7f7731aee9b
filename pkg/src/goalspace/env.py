"""Simulated ArmBall / ArmArrow environments.

A 7-joint planar arm driven by dynamic movement primitives (one critically
damped transformation system per joint) can grab an object with its tip.
The learner never sees the arm: it only receives a 70x70 grayscale frame of
the object at the end of the movement.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from goalspace.errors import DimensionError

IMAGE_SIZE = 70
IMAGE_CENTER = 35.0
# world units -> pixels; keeps a radius-4 sprite (plus antialiasing) inside
# rows/cols 1..69 for any position in [-1, 1]^2
PIXELS_PER_UNIT = 29.0
OBJECT_RADIUS_PX = 4.0
GRAB_RADIUS = 0.1
INITIAL_POSITION = (0.6, 0.6)
INITIAL_ANGLE = 0.0
TWO_PI = 2.0 * math.pi


class EnvKind(str, enum.Enum):
    ARM_BALL = "ArmBall"
    ARM_ARROW = "ArmArrow"

    @classmethod
    def parse(cls, value) -> "EnvKind":
        if isinstance(value, cls):
            return value
        for kind in cls:
            if str(value).lower() == kind.value.lower():
                return kind
        raise ValueError(f"unknown environment {value!r}")

    @property
    def state_dim(self) -> int:
        return 2 if self is EnvKind.ARM_BALL else 3


@dataclass(frozen=True)
class DmpConfig:
    """Motor primitive constants.

    ``duration`` is the simulated time spanned by the ``n_steps`` Euler steps;
    it sets how far uniformly random weights can swing the arm.
    """

    n_joints: int = 7
    n_basis: int = 3
    n_steps: int = 50
    basis_centers: tuple = (0.25, 0.5, 0.75)
    basis_width: float = 0.1
    spring_k: float = 25.0
    damping_c: float = 10.0
    weight_scale: float = 200.0
    duration: float = 0.12

    def __post_init__(self):
        centers = np.asarray(self.basis_centers, dtype=float)
        if len(centers) != self.n_basis:
            raise DimensionError("basis_centers", self.n_basis, len(centers))
        if np.any(np.diff(centers) <= 0) or centers.min() < 0 or centers.max() > 1:
            raise ValueError("basis centers must be strictly increasing in [0, 1]")
        if min(self.basis_width, self.spring_k, self.damping_c,
               self.weight_scale, self.duration) <= 0:
            raise ValueError("DMP constants must be positive")
        if not math.isclose(self.damping_c, 2.0 * math.sqrt(self.spring_k)):
            raise ValueError("damping must be critical: c = 2*sqrt(k)")

    @property
    def n_params(self) -> int:
        return self.n_joints * self.n_basis


@dataclass(frozen=True)
class ArmGeometry:
    link_lengths: tuple = (1.0 / 7,) * 7
    base: tuple = (0.0, 0.0)

    def __post_init__(self):
        lengths = np.asarray(self.link_lengths, dtype=float)
        if np.any(lengths <= 0):
            raise ValueError("link lengths must be positive")
        if not math.isclose(lengths.sum(), 1.0, rel_tol=1e-12):
            raise ValueError("link lengths must sum to 1")


@dataclass(frozen=True)
class TrueState:
    env_kind: EnvKind
    object_pos: tuple
    object_angle: float = 0.0
    held: bool = False

    def __post_init__(self):
        x, y = (float(v) for v in self.object_pos)
        if not (-1.0 <= x <= 1.0 and -1.0 <= y <= 1.0):
            raise ValueError(f"object position {(x, y)} outside [-1, 1]^2")
        object.__setattr__(self, "env_kind", EnvKind.parse(self.env_kind))
        object.__setattr__(self, "object_pos", (x, y))
        object.__setattr__(self, "object_angle", float(self.object_angle) % TWO_PI)

    def as_vector(self) -> np.ndarray:
        """(x, y) for ArmBall, (x, y, angle) for ArmArrow."""
        if self.env_kind is EnvKind.ARM_BALL:
            return np.array(self.object_pos)
        return np.array([*self.object_pos, self.object_angle])


DEFAULT_DMP = DmpConfig()
DEFAULT_GEOMETRY = ArmGeometry()


def as_motor_params(params, cfg: DmpConfig = DEFAULT_DMP) -> np.ndarray:
    """Validate a parameter vector and clamp it to the unit box."""
    params = np.asarray(params, dtype=float).reshape(-1)
    if params.size != cfg.n_params:
        raise DimensionError("motor parameters", cfg.n_params, params.size)
    return np.clip(params, 0.0, 1.0)


def dmp_rollout(params, cfg: DmpConfig = DEFAULT_DMP) -> np.ndarray:
    """Integrate one DMP per joint; returns an ``(n_steps, n_joints)`` angle array.

    Parameters are laid out joint-major: ``params[j * n_basis + b]`` is the
    weight of basis ``b`` for joint ``j``.  Start and goal are the rest
    posture (all zeros), so only the forcing term moves the arm.
    """
    p = as_motor_params(params, cfg)
    weights = cfg.weight_scale * (2.0 * p.reshape(cfg.n_joints, cfg.n_basis) - 1.0)
    centers = np.asarray(cfg.basis_centers, dtype=float)
    dt = cfg.duration / cfg.n_steps
    phase = np.arange(1, cfg.n_steps + 1) / cfg.n_steps
    psi = np.exp(-((phase[:, None] - centers[None, :]) ** 2) / (2.0 * cfg.basis_width ** 2))
    forcing = psi @ weights.T  # (n_steps, n_joints)

    y = np.zeros(cfg.n_joints)
    yd = np.zeros(cfg.n_joints)
    out = np.empty((cfg.n_steps, cfg.n_joints))
    for s in range(cfg.n_steps):
        ydd = -cfg.spring_k * y - cfg.damping_c * yd + forcing[s]
        yd = yd + ydd * dt
        y = np.clip(y + yd * dt, -math.pi, math.pi)
        out[s] = y
    return out


def forward_kinematics(angles, geom: ArmGeometry = DEFAULT_GEOMETRY) -> np.ndarray:
    """Tip position for relative joint angles; works on ``(..., n_joints)`` arrays."""
    angles = np.asarray(angles, dtype=float)
    absolute = np.cumsum(angles, axis=-1)
    lengths = np.asarray(geom.link_lengths)
    x = (lengths * np.cos(absolute)).sum(axis=-1) + geom.base[0]
    y = (lengths * np.sin(absolute)).sum(axis=-1) + geom.base[1]
    return np.stack([x, y], axis=-1)


@dataclass
class Episode:
    """Full record of one rollout (the public API only returns the summary)."""

    state: TrueState
    image: np.ndarray
    handled: bool
    contact_step: int | None
    tips: np.ndarray = field(repr=False)
    object_track: np.ndarray = field(repr=False)


def simulate_episode(env_kind, params, cfg: DmpConfig = DEFAULT_DMP,
                     geom: ArmGeometry = DEFAULT_GEOMETRY) -> Episode:
    kind = EnvKind.parse(env_kind)
    angles = dmp_rollout(params, cfg)
    tips = forward_kinematics(angles, geom)
    start = np.asarray(INITIAL_POSITION)
    dist = np.linalg.norm(tips - start, axis=1)
    contact = np.flatnonzero(dist <= GRAB_RADIUS)

    track = np.repeat(start[None, :], len(tips), axis=0)
    angle = INITIAL_ANGLE
    if contact.size:
        t0 = int(contact[0])
        track[t0:] = tips[t0:]
        # arrow follows the orientation of the last link
        angle = float(np.cumsum(angles[-1])[-1])
        contact_step = t0
    else:
        contact_step = None
    final = np.clip(track[-1], -1.0, 1.0)
    state = TrueState(kind, tuple(final), angle if kind is EnvKind.ARM_ARROW else 0.0,
                      held=contact_step is not None)
    return Episode(state, render_scene(kind, state), contact_step is not None,
                   contact_step, tips, track)


def run_episode(env_kind, params, rng=None, cfg: DmpConfig = DEFAULT_DMP,
                geom: ArmGeometry = DEFAULT_GEOMETRY):
    """Reset, roll out ``params`` and return ``(final_state, image, handled)``.

    The dynamics are noiseless; ``rng`` is accepted so callers can hand every
    episode its own stream without caring whether it is consumed.
    """
    ep = simulate_episode(env_kind, params, cfg, geom)
    return ep.state, ep.image, ep.handled


def world_to_pixel(pos) -> tuple[float, float]:
    """Map world (x, y) to (column, row) pixel coordinates."""
    x, y = pos
    return IMAGE_CENTER + PIXELS_PER_UNIT * x, IMAGE_CENTER - PIXELS_PER_UNIT * y


_ROWS, _COLS = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE].astype(float)


def _triangle_vertices(col, row, angle, radius=OBJECT_RADIUS_PX):
    spread = math.radians(140.0)
    out = []
    for a in (angle, angle + spread, angle - spread):
        # image rows grow downwards
        out.append((col + radius * math.cos(a), row - radius * math.sin(a)))
    return out


def _triangle_signed_distance(verts):
    """Exact Euclidean distance to the boundary, positive inside."""
    inside = np.full(_ROWS.shape, np.inf)
    outside = np.full(_ROWS.shape, np.inf)
    area = 0.0
    for i in range(3):
        (x0, y0), (x1, y1) = verts[i], verts[(i + 1) % 3]
        area += x0 * y1 - x1 * y0
    orient = 1.0 if area > 0 else -1.0
    for i in range(3):
        (x0, y0), (x1, y1) = verts[i], verts[(i + 1) % 3]
        ex, ey = x1 - x0, y1 - y0
        norm = math.hypot(ex, ey)
        # half-plane distance (exact inside a convex polygon)
        inside = np.minimum(inside, orient * (ex * (_ROWS - y0) - ey * (_COLS - x0)) / norm)
        # distance to the edge segment
        t = np.clip(((_COLS - x0) * ex + (_ROWS - y0) * ey) / norm ** 2, 0.0, 1.0)
        outside = np.minimum(outside, np.hypot(_COLS - x0 - t * ex, _ROWS - y0 - t * ey))
    return np.where(inside >= 0, inside, -outside)


def render_scene(env_kind, state: TrueState) -> np.ndarray:
    """Rasterize the object (never the arm) into a 70x70 frame in [0, 1]."""
    kind = EnvKind.parse(env_kind)
    col, row = world_to_pixel(state.object_pos)
    if kind is EnvKind.ARM_BALL:
        dist = np.hypot(_COLS - col, _ROWS - row)
        sd = OBJECT_RADIUS_PX - dist
    else:
        sd = _triangle_signed_distance(_triangle_vertices(col, row, state.object_angle))
    return np.clip(sd + 0.5, 0.0, 1.0)


def sample_state(env_kind, rng: np.random.Generator) -> TrueState:
    kind = EnvKind.parse(env_kind)
    pos = rng.uniform(-1.0, 1.0, size=2)
    angle = rng.uniform(0.0, TWO_PI) if kind is EnvKind.ARM_ARROW else 0.0
    return TrueState(kind, tuple(pos), angle)


def sample_observation(env_kind, rng: np.random.Generator):
    """Passive observation: object placed uniformly at random, plus its image."""
    state = sample_state(env_kind, rng)
    return state, render_scene(state.env_kind, state)


def sample_dataset(env_kind, n: int, rng: np.random.Generator):
    """``n`` passive observations as ``(states, images)`` with images flattened."""
    states, images = [], np.empty((n, IMAGE_SIZE * IMAGE_SIZE))
    for i in range(n):
        s, img = sample_observation(env_kind, rng)
        states.append(s)
        images[i] = img.reshape(-1)
    return states, images


# -- export -----------------------------------------------------------------

def write_pgm(path, image) -> None:
    """Binary PGM (P5, maxval 255)."""
    img = np.asarray(image, dtype=float)
    if img.ndim == 1:
        img = img.reshape(IMAGE_SIZE, IMAGE_SIZE)
    data = np.round(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end])
        pos = end
    pos += 1
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h, maxval = (int(t) for t in tokens[1:])
    data = np.frombuffer(raw[pos:pos + w * h], dtype=np.uint8).reshape(h, w)
    return data.astype(float) / maxval


STATE_CSV_COLUMNS = ("episode", "x", "y", "angle", "handled")


def write_states_csv(path, states, handled=None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STATE_CSV_COLUMNS)
        for i, s in enumerate(states):
            h = s.held if handled is None else handled[i]
            writer.writerow([i, repr(s.object_pos[0]), repr(s.object_pos[1]),
                             repr(s.object_angle), int(bool(h))])


def read_states_csv(path, env_kind):
    kind = EnvKind.parse(env_kind)
    states = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            states.append(TrueState(kind, (float(row["x"]), float(row["y"])),
                                    float(row["angle"]), bool(int(row["handled"]))))
    return states
