"""Simulation scenarios: video sources, run length, queue sizing, pacing.

A scenario binds an allocation plan and a calibrated catalog to one or more
video sources. Two pacing modes exist: "realtime" feeds the decoder at each
source's frame rate with the bitstream in display order, "saturated" makes
every frame available at t=0 and the decoder walks the GOP in decode order,
which is what exposes out-of-order frame emission downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Tuple

from ..engine_model import DEFAULT_GOP, ENGINE_NVDEC
from ..errors import ConfigError, ValidationError

PACING_REALTIME = "realtime"
PACING_SATURATED = "saturated"
PACING_MODES = (PACING_REALTIME, PACING_SATURATED)

CODECS = ("H264", "H265")

SCENARIO_HEADER = "#hetpipe-scenario v1"

# Text-format defaults; key order fixed for serialization.
SCENARIO_DEFAULTS = (
    ("streams", "1"),
    ("resolution", "1920x1080"),
    ("fps", "30"),
    ("gop", DEFAULT_GOP),
    ("faces", "4"),
    ("duration_frames", "650"),
    ("seed", "42"),
    ("queue_capacity", "6"),
    ("encoder", "on"),
)


@dataclass(frozen=True)
class SourceSpec:
    """One video feed: geometry, rate, GOP structure, and face content."""

    resolution: Tuple[int, int] = (1920, 1080)
    fps: float = 30.0
    gop_pattern: str = DEFAULT_GOP
    faces_per_frame: object = 4  # constant int or a cyclic trace tuple
    codec: str = "H264"

    def faces_at(self, frame_index: int) -> int:
        trace = self.faces_per_frame
        if isinstance(trace, (tuple, list)):
            return int(trace[frame_index % len(trace)])
        return int(trace)

    def resolution_class(self) -> str:
        return "1080p" if self.resolution[1] <= 1080 else "2160p"

    def violations(self):
        out = []
        w, h = self.resolution
        if w <= 0 or h <= 0:
            out.append("resolution must be positive")
        if self.fps <= 0:
            out.append("fps must be positive")
        gop = self.gop_pattern
        if not gop or gop[0] != "I":
            out.append("gop pattern must start with I")
        if any(c not in "IPB" for c in gop):
            out.append("gop pattern may only contain I, P, B")
        if self.codec not in CODECS:
            out.append("codec must be one of %s" % (CODECS,))
        trace = self.faces_per_frame
        if isinstance(trace, (tuple, list)):
            if len(trace) == 0:
                out.append("faces trace must be non-empty")
            elif any(int(f) < 0 for f in trace):
                out.append("faces counts must be non-negative")
        elif int(trace) < 0:
            out.append("faces counts must be non-negative")
        return out


@dataclass(frozen=True)
class Scenario:
    """Everything one simulate() call needs, immutable and shareable.

    queue_capacity_frames of None means unbounded inter-stage queues.
    stage_time_overrides maps stage name to (seconds, engine id) and turns
    off jitter entirely; it exists so closed-form throughput checks can
    drive the event loop with exact service times.
    """

    sources: tuple
    plan: object
    catalog: object
    queue_capacity_frames: Optional[int] = 6
    duration_frames: int = 650
    seed: int = 42
    enable_encoder: bool = True
    pacing: str = PACING_REALTIME
    hypothetical_dual_dla: bool = False
    jitter_frac: Optional[float] = None
    stage_time_overrides: Optional[Mapping] = None
    horizon_s: float = math.inf

    def violations(self):
        out = []
        if len(self.sources) < 1:
            out.append("scenario needs at least one source")
        for i, src in enumerate(self.sources):
            out.extend("source %d: %s" % (i, v) for v in src.violations())
        if self.queue_capacity_frames is not None and self.queue_capacity_frames < 1:
            out.append("queue capacity must be positive")
        if self.duration_frames < 1:
            out.append("duration must be at least one frame")
        if self.pacing not in PACING_MODES:
            out.append("pacing must be one of %s" % (PACING_MODES,))
        if self.jitter_frac is not None and not 0.0 <= self.jitter_frac < 1.0:
            out.append("jitter fraction must be in [0, 1)")
        out.extend(self._decoder_capacity_violations())
        return out

    def _decoder_capacity_violations(self):
        try:
            dec = self.catalog.engine(ENGINE_NVDEC)
        except Exception:
            return []
        counts = {}
        for src in self.sources:
            klass = src.resolution_class()
            counts[klass] = counts.get(klass, 0) + 1
        out = []
        for klass, n in sorted(counts.items()):
            cap = dec.stream_capacity.get(klass)
            if cap is not None and n > cap:
                out.append(
                    "%d %s streams exceed the decoder capacity of %d" % (n, klass, cap)
                )
        return out


def validate_scenario(sc: Scenario):
    """All invariant violations, empty when the scenario is runnable."""
    return sc.violations()


def decode_order(gop_pattern: str):
    """Decode-order positions for one GOP, display indices as values.

    Anchors (I/P) decode in display order; each run of B frames decodes
    right after the anchor that closes it. Trailing B frames decode last.
    """
    anchors = [i for i, c in enumerate(gop_pattern) if c != "B"]
    order = []
    prev = -1
    for a in anchors:
        order.append(a)
        order.extend(range(prev + 1, a))
        prev = a
    order.extend(range(prev + 1, len(gop_pattern)))
    return order


@dataclass(frozen=True)
class ScenarioConfig:
    """Raw key-value scenario file contents, before plan/catalog binding."""

    streams: int = 1
    resolution: Tuple[int, int] = (1920, 1080)
    fps: float = 30.0
    gop: str = DEFAULT_GOP
    faces: object = 4
    duration_frames: int = 650
    seed: int = 42
    queue_capacity: int = 6
    encoder: bool = True


def parse_scenario(text: str) -> ScenarioConfig:
    lines = text.splitlines()
    if not lines or lines[0].strip() != SCENARIO_HEADER:
        raise ConfigError("scenario file must start with '%s'" % SCENARIO_HEADER)
    values = dict(SCENARIO_DEFAULTS)
    known = set(values)
    for line_no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise ConfigError("scenario line %d needs 'key value'" % line_no)
        key, value = parts
        if key not in known:
            raise ConfigError("scenario line %d: unknown key %r" % (line_no, key))
        values[key] = value.strip()
    return _config_from_values(values)


def _config_from_values(values) -> ScenarioConfig:
    def as_int(key, minimum=None):
        try:
            v = int(values[key])
        except ValueError:
            raise ConfigError("scenario key %r must be an integer" % key) from None
        if minimum is not None and v < minimum:
            raise ConfigError("scenario key %r must be >= %d" % (key, minimum))
        return v

    res_text = values["resolution"].lower()
    if "x" not in res_text:
        raise ConfigError("resolution must look like 1920x1080")
    w_text, h_text = res_text.split("x", 1)
    try:
        resolution = (int(w_text), int(h_text))
    except ValueError:
        raise ConfigError("resolution must look like 1920x1080") from None

    try:
        fps = float(values["fps"])
    except ValueError:
        raise ConfigError("scenario key 'fps' must be a number") from None

    faces_text = values["faces"]
    faces: object
    if "," in faces_text:
        try:
            faces = tuple(int(f) for f in faces_text.split(","))
        except ValueError:
            raise ConfigError("faces trace must be comma-separated integers") from None
    else:
        try:
            faces = int(faces_text)
        except ValueError:
            raise ConfigError("faces must be an integer or a comma list") from None

    encoder_text = values["encoder"].lower()
    if encoder_text not in ("on", "off", "true", "false", "1", "0"):
        raise ConfigError("encoder must be on or off")

    return ScenarioConfig(
        streams=as_int("streams", minimum=1),
        resolution=resolution,
        fps=fps,
        gop=values["gop"],
        faces=faces,
        duration_frames=as_int("duration_frames", minimum=1),
        seed=as_int("seed"),
        queue_capacity=as_int("queue_capacity", minimum=1),
        encoder=encoder_text in ("on", "true", "1"),
    )


def load_scenario(path) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read scenario file %s: %s" % (path, exc)) from exc
    return parse_scenario(text)


def build_scenario(cfg: ScenarioConfig, plan, catalog, *,
                   streams: Optional[int] = None,
                   seed: Optional[int] = None,
                   pacing: str = PACING_REALTIME,
                   hypothetical_dual_dla: bool = False) -> Scenario:
    """Bind a parsed scenario file to a plan and catalog, with overrides."""
    n_streams = streams if streams is not None else cfg.streams
    if n_streams < 1:
        raise ConfigError("stream count must be positive")
    source = SourceSpec(
        resolution=cfg.resolution,
        fps=cfg.fps,
        gop_pattern=cfg.gop,
        faces_per_frame=cfg.faces,
    )
    sc = Scenario(
        sources=tuple(replace(source) for _ in range(n_streams)),
        plan=plan,
        catalog=catalog,
        queue_capacity_frames=cfg.queue_capacity,
        duration_frames=cfg.duration_frames,
        seed=seed if seed is not None else cfg.seed,
        enable_encoder=cfg.encoder,
        pacing=pacing,
        hypothetical_dual_dla=hypothetical_dual_dla,
    )
    violations = validate_scenario(sc)
    if violations:
        raise ValidationError(violations)
    return sc
