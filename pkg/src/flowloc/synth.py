"""Deterministic synthetic street scenes for end-to-end testing.

A scene is a textured noise background with textured rectangles ("actors")
moving along integer trajectories. Each actor carries a class label and a
sounding flag, from which ground-truth boxes and simulated semantic maps are
derived. Semantic maps in ``all-vehicles`` mode light up every vehicle,
parked or not, which is the failure mode motion fusion is meant to fix.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boxes import VEHICLE_CLASSES, BBox, BoxSet
from .core import Frame, Heatmap, blur_array
from .errors import InvalidScenarioError
from .fusion import minmax_normalize

SEMANTIC_SIGMA = 3.0
BACKGROUND_SIGMA = 2.0
TEXTURE_SIGMA = 1.5
FLAT_ACTOR_VALUE = 0.8


@dataclass(frozen=True)
class Actor:
    width: int
    height: int
    trajectory: tuple
    class_label: str = "car"
    textured: bool = True
    sounding: bool = False

    def __post_init__(self):
        traj = tuple((int(x), int(y)) for x, y in self.trajectory)
        object.__setattr__(self, "trajectory", traj)
        if self.width < 1 or self.height < 1:
            raise InvalidScenarioError(f"actor extent must be positive, got {self.width}x{self.height}")

    @classmethod
    def linear(cls, size, start, velocity, n_frames, stop_after=None, **kw) -> "Actor":
        """Constant-velocity actor; with ``stop_after=k`` it halts from frame k on."""
        traj = []
        for t in range(n_frames):
            steps = t if stop_after is None else min(t, stop_after)
            traj.append((start[0] + velocity[0] * steps, start[1] + velocity[1] * steps))
        return cls(size[0], size[1], tuple(traj), **kw)


@dataclass(frozen=True)
class Scenario:
    width: int
    height: int
    n_frames: int
    seed: int = 0
    actors: tuple = field(default_factory=tuple)
    camera_shake: float = 0.0
    background_texture: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "actors", tuple(self.actors))
        if self.width < 1 or self.height < 1 or self.n_frames < 1:
            raise InvalidScenarioError("scene dimensions and frame count must be positive")
        if self.camera_shake < 0:
            raise InvalidScenarioError("camera_shake must be non-negative")
        m = self.margin
        for k, a in enumerate(self.actors):
            if len(a.trajectory) != self.n_frames:
                raise InvalidScenarioError(
                    f"actor {k} has {len(a.trajectory)} positions for {self.n_frames} frames"
                )
            for t, (x, y) in enumerate(a.trajectory):
                if x - m < 0 or y - m < 0 or x + a.width + m > self.width or y + a.height + m > self.height:
                    raise InvalidScenarioError(
                        f"actor {k} leaves the frame at t={t} (position {x},{y}, shake margin {m})"
                    )

    @property
    def margin(self) -> int:
        return int(math.ceil(self.camera_shake))


def _unit_noise(rng, shape, sigma):
    n = blur_array(rng.random(shape), sigma)
    lo, hi = n.min(), n.max()
    return (n - lo) / (hi - lo) if hi > lo else np.zeros(shape)


def shake_offsets(scenario: Scenario) -> list[tuple[int, int]]:
    """Per-frame integer camera offsets ``(dx, dy)``; the view moves by +offset."""
    rng = np.random.default_rng([scenario.seed, 1])
    a = scenario.camera_shake
    if a == 0:
        return [(0, 0)] * scenario.n_frames
    m = int(math.floor(a))
    return [tuple(int(v) for v in rng.integers(-m, m + 1, size=2)) for _ in range(scenario.n_frames)]


def actor_boxes(scenario: Scenario, t: int) -> list[BBox]:
    ox, oy = shake_offsets(scenario)[t]
    return [
        BBox(x - ox, y - oy, a.width, a.height, a.class_label, t, a.sounding)
        for a in scenario.actors
        for x, y in [a.trajectory[t]]
    ]


def render(scenario: Scenario) -> tuple[list[Frame], list[BoxSet]]:
    """Rasterize every frame and the matching ground-truth boxes."""
    rng = np.random.default_rng(scenario.seed)
    m = scenario.margin
    H, W = scenario.height, scenario.width
    noise = _unit_noise(rng, (H + 2 * m, W + 2 * m), BACKGROUND_SIGMA)
    canvas = 0.5 + scenario.background_texture * (noise - 0.5)
    textures = []
    for a in scenario.actors:
        if a.textured:
            textures.append(0.05 + 0.9 * _unit_noise(rng, (a.height, a.width), TEXTURE_SIGMA))
        else:
            textures.append(np.full((a.height, a.width), FLAT_ACTOR_VALUE))

    offsets = shake_offsets(scenario)
    frames, gts = [], []
    for t in range(scenario.n_frames):
        img = canvas.copy()
        for a, tex in zip(scenario.actors, textures):
            x, y = a.trajectory[t]
            img[y + m : y + m + a.height, x + m : x + m + a.width] = tex
        ox, oy = offsets[t]
        view = img[m + oy : m + oy + H, m + ox : m + ox + W]
        frames.append(Frame(np.clip(view, 0.0, 1.0), t))
        gts.append(BoxSet(t, tuple(actor_boxes(scenario, t))))
    return frames, gts


def semantic_oracle(scenario: Scenario, mode: str = "all-vehicles", sigma: float = SEMANTIC_SIGMA) -> list[Heatmap]:
    """Blurred, normalized indicator maps of the selected actors, one per frame."""
    if mode == "all-vehicles":
        pick = [a.class_label in VEHICLE_CLASSES for a in scenario.actors]
    elif mode == "sounding-only":
        pick = [a.sounding for a in scenario.actors]
    else:
        raise InvalidScenarioError(f"unknown semantic mode {mode!r}")
    out = []
    for t in range(scenario.n_frames):
        ind = np.zeros((scenario.height, scenario.width))
        for keep, b in zip(pick, actor_boxes(scenario, t)):
            if keep:
                ind[int(b.y) : int(b.y + b.h), int(b.x) : int(b.x + b.w)] = 1.0
        out.append(minmax_normalize(Heatmap(blur_array(ind, sigma))))
    return out


def simulated_detections(scenario: Scenario) -> list[BoxSet]:
    """What a perfect class-aware detector would report: every actor, no sounding flag."""
    return [
        BoxSet(t, tuple(BBox(b.x, b.y, b.w, b.h, b.class_label, t, None, 1.0) for b in actor_boxes(scenario, t)))
        for t in range(scenario.n_frames)
    ]


def canonical_scenario(camera_shake: float = 0.0, seed: int = 0, n_frames: int = 12) -> Scenario:
    """One moving sounding car between two parked silent ones."""
    return Scenario(
        width=192,
        height=144,
        n_frames=n_frames,
        seed=seed,
        camera_shake=camera_shake,
        actors=(
            Actor.linear((40, 24), (24, 92), (4, 0), n_frames, class_label="car", sounding=True),
            Actor.linear((40, 24), (20, 24), (0, 0), n_frames, class_label="car"),
            Actor.linear((44, 26), (124, 28), (0, 0), n_frames, class_label="truck"),
        ),
    )


# ---------------------------------------------------------------- config files

def _pair(text):
    parts = [p.strip() for p in re.split(r"[,x]", text)]
    if len(parts) != 2:
        raise InvalidScenarioError(f"expected two values in {text!r}")
    return int(parts[0]), int(parts[1])


def parse_scenario(text: str) -> Scenario:
    """Parse the INI-style scenario format (see ``demos/canonical.scenario``)."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InvalidScenarioError(f"malformed scenario file: {exc}") from exc
    if "scene" not in cp:
        raise InvalidScenarioError("scenario file needs a [scene] section")
    sc = cp["scene"]
    try:
        n_frames = sc.getint("n_frames")
        actors = []
        for name in cp.sections():
            if not name.startswith("actor"):
                continue
            sec = cp[name]
            w, h = _pair(sec.get("size", "32x20"))
            kw = dict(
                class_label=sec.get("class", "car"),
                textured=sec.getboolean("textured", True),
                sounding=sec.getboolean("sounding", False),
            )
            if "positions" in sec:
                traj = [_pair(p) for p in sec["positions"].split(";") if p.strip()]
                actors.append(Actor(w, h, tuple(traj), **kw))
            else:
                stop = sec.getint("stop_after", fallback=None)
                actors.append(Actor.linear(
                    (w, h), _pair(sec["start"]), _pair(sec.get("velocity", "0,0")), n_frames, stop, **kw
                ))
        return Scenario(
            width=sc.getint("width"),
            height=sc.getint("height"),
            n_frames=n_frames,
            seed=sc.getint("seed", 0),
            actors=tuple(actors),
            camera_shake=sc.getfloat("camera_shake", 0.0),
            background_texture=sc.getfloat("background_texture", 0.5),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenarioError(f"invalid scenario value: {exc}") from exc


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())
