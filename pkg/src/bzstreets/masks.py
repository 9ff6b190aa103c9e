"""Street masks: raster ingestion, synthetic street networks, connectivity report."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import InvalidSpecError, MaskFormatError
from .medium import GridMask

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


def load_mask(image, threshold: float = 0.5, streets_are_bright: bool = True) -> GridMask:
    """Threshold a grayscale raster into a mask.

    ``image`` is a path (PNG, PGM or anything Pillow reads) or a 2-D array
    of luminance in [0, 1]. Bright streets are those with luminance strictly
    above ``threshold``; dark streets strictly below it.
    """
    if not 0.0 <= threshold <= 1.0:
        raise InvalidSpecError(f"threshold must lie in [0, 1], got {threshold}")
    lum = read_luminance(image) if isinstance(image, (str, Path)) else np.asarray(image, dtype=float)
    if lum.ndim != 2 or lum.size == 0:
        raise MaskFormatError(f"expected a non-empty 2-D raster, got shape {lum.shape}")
    excitable = lum > threshold if streets_are_bright else lum < threshold
    return GridMask(excitable)


def read_luminance(path) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode in ("I", "I;16", "I;16B", "I;16L"):
                arr = np.asarray(img, dtype=float)
                peak = 65535.0 if arr.max() > 255 else 255.0
                return arr / peak
            return np.asarray(img.convert("L"), dtype=float) / 255.0
    except FileNotFoundError:
        raise MaskFormatError(f"{path}: no such file") from None
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise MaskFormatError(f"{path}: unreadable image ({exc})") from exc


def mask_to_image(mask: GridMask) -> np.ndarray:
    return np.where(mask.excitable, 255, 0).astype(np.uint8)


def save_mask(mask: GridMask, path) -> None:
    """Write the mask as 8-bit grayscale (streets white); format from suffix."""
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() in (".pgm", ".pnm") else None
    Image.fromarray(mask_to_image(mask), mode="L").save(path, format=fmt)


@dataclass(frozen=True)
class GridCitySpec:
    """Orthogonal lattice: one main street per block row/column, narrow side
    streets along the block boundaries between them."""

    rows: int = 4
    cols: int = 4
    main_street_width: int = 9
    side_street_width: int = 3
    block_size: int = 48

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidSpecError("rows and cols must be >= 1")
        if self.main_street_width < 1 or self.side_street_width < 1:
            raise InvalidSpecError("street widths must be >= 1")
        if self.side_street_width > self.main_street_width:
            raise InvalidSpecError("side streets cannot be wider than main streets")
        if self.main_street_width > self.block_size or 2 * self.side_street_width > self.block_size:
            raise InvalidSpecError("streets do not fit inside a block")
        if self.rows * self.block_size < 3 or self.cols * self.block_size < 3:
            raise InvalidSpecError("grid would be smaller than 3x3")

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows * self.block_size, self.cols * self.block_size

    def perturbation_origin(self, side: int = 20, block: tuple[int, int] | None = None):
        """Top-left corner of a ``side`` square centred on a main-street crossing.

        ``block`` picks the crossing by block index; defaults to the central one.
        """
        br, bc = block if block is not None else ((self.rows - 1) // 2, (self.cols - 1) // 2)
        centre_r = br * self.block_size + self.block_size // 2
        centre_c = bc * self.block_size + self.block_size // 2
        return centre_r - side // 2, centre_c - side // 2


def _bands(length, n_streets, block, width, offset):
    """Boolean profile of ``n_streets`` streets of ``width`` centred at ``k*block+offset``."""
    prof = np.zeros(length, dtype=bool)
    for k in range(n_streets):
        c = k * block + offset
        lo = c - width // 2
        prof[max(lo, 0):lo + width] = True
    return prof


def grid_city_layers(spec: GridCitySpec) -> tuple[np.ndarray, np.ndarray]:
    """(main, side) boolean rasters; side excludes nodes shared with main streets."""
    h, w = spec.shape
    b = spec.block_size
    main_r = _bands(h, spec.rows, b, spec.main_street_width, b // 2)
    main_c = _bands(w, spec.cols, b, spec.main_street_width, b // 2)
    side_r = _bands(h, spec.rows - 1, b, spec.side_street_width, b)
    side_c = _bands(w, spec.cols - 1, b, spec.side_street_width, b)
    main = main_r[:, None] | main_c[None, :]
    side = (side_r[:, None] | side_c[None, :]) & ~main
    return main, side


def gen_grid_city(spec: GridCitySpec) -> GridMask:
    main, side = grid_city_layers(spec)
    return GridMask(main | side)


def gen_open_field(width: int, height: int) -> GridMask:
    _check_dims(width, height)
    return GridMask(np.ones((height, width), dtype=bool))


def gen_channel(width: int, height: int, channel_width: int) -> GridMask:
    """Horizontal street of ``channel_width`` rows, centred vertically."""
    _check_dims(width, height)
    if not 1 <= channel_width <= height:
        raise InvalidSpecError(f"channel_width must be in [1, {height}]")
    m = np.zeros((height, width), dtype=bool)
    top = (height - channel_width) // 2
    m[top:top + channel_width, :] = True
    return GridMask(m)


def gen_ring(size: int, street_width: int, margin: int = 2) -> GridMask:
    """Closed square loop of street, ``size`` nodes on a side, inside a margin."""
    if size < 2 * street_width + 1 or street_width < 1:
        raise InvalidSpecError("ring needs an interior hole")
    n = size + 2 * margin
    m = np.zeros((n, n), dtype=bool)
    m[margin:margin + size, margin:margin + size] = True
    m[margin + street_width:margin + size - street_width,
      margin + street_width:margin + size - street_width] = False
    return GridMask(m)


def _check_dims(width, height):
    if width < 3 or height < 3:
        raise InvalidSpecError(f"dimensions must be >= 3, got {width}x{height}")


@dataclass(frozen=True)
class MaskReport:
    excitable_count: int
    component_count: int
    largest_component_fraction: float
    component_sizes: tuple[int, ...] = ()

    def to_text(self) -> str:
        lines = [
            f"excitable_count = {self.excitable_count}",
            f"component_count = {self.component_count}",
            f"largest_component_fraction = {self.largest_component_fraction!r}",
            "component_sizes = " + " ".join(str(s) for s in self.component_sizes),
        ]
        return "\n".join(lines) + "\n"


def validate_mask(mask: GridMask) -> MaskReport:
    """Count excitable nodes and their 4-connected components."""
    labels, n = ndimage.label(mask.excitable, structure=_FOUR_CONNECTED)
    sizes = np.bincount(labels.ravel())[1:] if n else np.zeros(0, dtype=int)
    sizes = tuple(sorted((int(s) for s in sizes), reverse=True))
    total = mask.excitable_count
    largest = sizes[0] / total if total else 0.0
    return MaskReport(total, n, largest, sizes)
