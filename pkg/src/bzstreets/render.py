"""Raster output: thresholded snapshots, time-lapse overlays, frequency images, frames."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ContractViolation
from .medium import MediumState

PALETTES = ("binary", "grayscale")
SILHOUETTE_LEVEL = 48


@dataclass(frozen=True)
class RenderConfig:
    display_threshold: float = 0.04
    snapshot_stride: int = 150
    frame_stride: int = 50
    palette: str = "binary"
    silhouette: bool = False
    fps: int = 30
    image_format: str = "png"

    def __post_init__(self):
        if self.snapshot_stride < 1 or self.frame_stride < 1:
            raise ContractViolation("strides must be >= 1")
        if not self.display_threshold >= 0:
            raise ContractViolation("display_threshold must be >= 0")
        if self.palette not in PALETTES:
            raise ContractViolation(f"palette must be one of {PALETTES}")
        if self.image_format not in ("png", "pgm"):
            raise ContractViolation("image_format must be png or pgm")


def render_state(state: MediumState, config: RenderConfig = RenderConfig()) -> np.ndarray:
    """8-bit image of the activator field."""
    u = state.u
    if config.palette == "binary":
        img = np.where(u > config.display_threshold, 255, 0).astype(np.uint8)
    else:
        img = np.rint(np.clip(u, 0.0, 1.0) * 255.0).astype(np.uint8)
    if config.silhouette:
        img = np.maximum(img, np.where(state.mask.excitable, SILHOUETTE_LEVEL, 0).astype(np.uint8))
    return img


def render_timelapse(snapshots) -> np.ndarray:
    """Pixel-wise maximum over snapshots."""
    snapshots = [np.asarray(s) for s in snapshots]
    if not snapshots:
        raise ContractViolation("no snapshots to overlay")
    shape = snapshots[0].shape
    out = snapshots[0].copy()
    for s in snapshots[1:]:
        if s.shape != shape:
            raise ContractViolation(f"snapshot shape {s.shape} differs from {shape}")
        np.maximum(out, s, out=out)
    return out


def render_frequency(freq) -> np.ndarray:
    """Linear brightness, largest value mapped to 255."""
    freq = np.asarray(freq, dtype=float)
    if np.any(freq < 0):
        raise ContractViolation("frequency values must be non-negative")
    top = freq.max() if freq.size else 0.0
    if top == 0:
        return np.zeros(freq.shape, dtype=np.uint8)
    return np.rint(freq / top * 255.0).astype(np.uint8)


def write_image(path, img: np.ndarray) -> None:
    """8-bit grayscale PNG, or binary PGM when the suffix is .pgm."""
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() == ".pgm" else "PNG"
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="L").save(path, format=fmt)


def read_image(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8).copy()


class SnapshotRecorder:
    """Keeps the running time-lapse overlay of snapshots taken every ``stride`` steps.

    Set ``keep=True`` to also retain each snapshot image.
    """

    def __init__(self, config: RenderConfig = RenderConfig(), keep: bool = False):
        self.config = config
        self.stride = config.snapshot_stride
        self.keep = keep
        self.snapshots: list[tuple[int, np.ndarray]] = []
        self.composite: np.ndarray | None = None

    def observe(self, state: MediumState) -> None:
        img = render_state(state, self.config)
        if self.keep:
            self.snapshots.append((state.step_index, img))
        if self.composite is None:
            self.composite = img.copy()
        else:
            np.maximum(self.composite, img, out=self.composite)


class FrameWriter:
    """Writes ``frame_%08d.<ext>`` every ``frame_stride`` steps plus a manifest."""

    def __init__(self, directory, config: RenderConfig = RenderConfig()):
        self.directory = Path(directory)
        self.config = config
        self.stride = config.frame_stride
        self.frames: list[str] = []
        self.directory.mkdir(parents=True, exist_ok=True)

    def observe(self, state: MediumState) -> None:
        name = f"frame_{state.step_index:08d}.{self.config.image_format}"
        write_image(self.directory / name, render_state(state, self.config))
        self.frames.append(name)

    def write_manifest(self, extra: dict | None = None) -> Path:
        path = self.directory / "manifest.txt"
        with open(path, "w", newline="\n") as fh:
            fh.write(f"fps = {self.config.fps}\n")
            fh.write(f"frame_stride = {self.config.frame_stride}\n")
            fh.write(f"display_threshold = {self.config.display_threshold!r}\n")
            fh.write(f"palette = {self.config.palette}\n")
            for key, value in (extra or {}).items():
                fh.write(f"{key} = {value}\n")
            fh.write(f"frames = {len(self.frames)}\n")
            for name in self.frames:
                fh.write(name + "\n")
        return path
