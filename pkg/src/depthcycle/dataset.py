"""Loading RGB-D recordings stored in the common text-index layout.

A sequence directory holds rgb.txt and depth.txt, each listing
"timestamp path" pairs (comments start with '#'), plus the referenced
image files.  Color and depth streams are unsynchronized, so frames are
associated greedily: walking color frames in order, each one claims the
nearest not-yet-claimed depth frame within max_time_diff seconds.

Depth files are single-channel 16-bit PNGs; meters = raw / depth_scale
and raw 0 means no measurement.  Color converts to grayscale with
integer-rounded BT.601 luma so results are bit-reproducible.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import Intrinsics, check_depth_map

__all__ = [
    "AssociatedFrame",
    "DatasetConfig",
    "FrameIndexEntry",
    "associate",
    "decode_depth_png",
    "encode_depth_png",
    "load_config",
    "load_sequence",
    "read_index",
    "to_gray",
]

_DEPTH_MODES = ("I;16", "I;16B", "I;16L", "I")


@dataclass(frozen=True)
class FrameIndexEntry:
    timestamp: float
    path: str


@dataclass(frozen=True)
class AssociatedFrame:
    """One color frame with its matched depth measurement.

    The pipeline treats `depth` as what the sensor would deliver if asked:
    ground truth for scoring, and the measurement actually consumed on
    frames where a new acquisition is requested.
    """

    rgb_timestamp: float
    depth_timestamp: float
    image: np.ndarray
    depth: np.ndarray | None


def read_index(path) -> list[FrameIndexEntry]:
    """Parse a 'timestamp path' index file; '#' lines are comments."""
    path = Path(path)
    entries: list[FrameIndexEntry] = []
    last = -np.inf
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'timestamp path', got {line!r}")
            try:
                ts = float(parts[0])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad timestamp {parts[0]!r}") from exc
            if ts < last:
                raise ValueError(f"{path}:{lineno}: timestamps must be non-decreasing")
            last = ts
            entries.append(FrameIndexEntry(timestamp=ts, path=parts[1]))
    return entries


def associate(
    rgb: list[FrameIndexEntry], depth: list[FrameIndexEntry], max_time_diff: float = 0.02
) -> list[tuple[FrameIndexEntry, FrameIndexEntry]]:
    """Greedy injective nearest-timestamp pairing, in color-frame order.

    Color frames with no unclaimed depth frame within max_time_diff are
    dropped; each depth frame is used at most once (ties resolve to the
    earlier depth entry).
    """
    if max_time_diff < 0:
        raise ValueError(f"max_time_diff must be non-negative, got {max_time_diff}")
    d_ts = np.array([e.timestamp for e in depth], dtype=np.float64)
    taken = np.zeros(len(depth), dtype=bool)
    pairs = []
    for entry in rgb:
        if not len(d_ts):
            break
        gaps = np.abs(d_ts - entry.timestamp)
        gaps[taken] = np.inf
        j = int(np.argmin(gaps))
        if gaps[j] <= max_time_diff:
            taken[j] = True
            pairs.append((entry, depth[j]))
    return pairs


def decode_depth_png(data: bytes, depth_scale: float) -> np.ndarray:
    """16-bit single-channel PNG bytes to a depth map in meters."""
    if not depth_scale > 0:
        raise ValueError(f"depth_scale must be positive, got {depth_scale}")
    img = Image.open(io.BytesIO(data))
    img.load()
    if img.mode not in _DEPTH_MODES:
        raise ValueError(f"expected a 16-bit single-channel depth image, got mode {img.mode!r}")
    raw = np.asarray(img)
    if raw.ndim != 2:
        raise ValueError(f"depth image must be single channel, got shape {raw.shape}")
    if raw.min() < 0 or raw.max() > 65535:
        raise ValueError("depth image values exceed the 16-bit range")
    return raw.astype(np.float64) / depth_scale


def encode_depth_png(depth, depth_scale: float) -> bytes:
    """Depth map in meters to 16-bit PNG bytes; values clip to the 16-bit range."""
    if not depth_scale > 0:
        raise ValueError(f"depth_scale must be positive, got {depth_scale}")
    d = check_depth_map(depth)
    raw = np.clip(np.floor(d * depth_scale + 0.5), 0, 65535).astype(np.uint16)
    buf = io.BytesIO()
    Image.fromarray(raw).save(buf, format="PNG")
    return buf.getvalue()


def to_gray(data: bytes) -> np.ndarray:
    """Decode an 8-bit color image and convert to BT.601 luma (uint8).

    luma = round(0.299 R + 0.587 G + 0.114 B), rounding half up.
    """
    img = Image.open(io.BytesIO(data))
    img.load()
    if img.mode != "RGB":
        img = img.convert("RGB")
    rgb = np.asarray(img, dtype=np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class DatasetConfig:
    intrinsics: Intrinsics
    max_time_diff: float


_CONFIG_KEYS = {
    "fx", "fy", "cx", "cy", "width", "height", "depth_scale", "max_time_diff",
}


def load_config(path) -> DatasetConfig:
    """Read a key=value camera config ('#' comments allowed).

    Required: fx, fy, cx, cy.  Optional with defaults: width 640,
    height 480, depth_scale 5000, max_time_diff 0.02.
    """
    path = Path(path)
    values: dict[str, float] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = float(raw.strip())
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value for {key}: {raw.strip()!r}") from exc
    missing = {"fx", "fy", "cx", "cy"} - values.keys()
    if missing:
        raise ValueError(f"{path}: missing required keys: {sorted(missing)}")
    intrinsics = Intrinsics(
        fx=values["fx"],
        fy=values["fy"],
        cx=values["cx"],
        cy=values["cy"],
        width=int(values.get("width", 640)),
        height=int(values.get("height", 480)),
        depth_scale=values.get("depth_scale", 5000.0),
    )
    return DatasetConfig(intrinsics=intrinsics, max_time_diff=values.get("max_time_diff", 0.02))


def _load_pair(
    root: Path, pair: tuple[FrameIndexEntry, FrameIndexEntry], depth_scale: float
) -> AssociatedFrame:
    rgb_entry, depth_entry = pair
    rgb_path = root / rgb_entry.path
    depth_path = root / depth_entry.path
    try:
        image = to_gray(rgb_path.read_bytes())
    except (OSError, ValueError) as exc:
        raise ValueError(f"failed to load color frame {rgb_path}: {exc}") from exc
    try:
        depth = decode_depth_png(depth_path.read_bytes(), depth_scale)
    except (OSError, ValueError) as exc:
        raise ValueError(f"failed to load depth frame {depth_path}: {exc}") from exc
    return AssociatedFrame(
        rgb_timestamp=rgb_entry.timestamp,
        depth_timestamp=depth_entry.timestamp,
        image=image,
        depth=depth,
    )


def load_sequence(
    root,
    intrinsics: Intrinsics,
    max_time_diff: float = 0.02,
    limit: int | None = None,
    workers: int = 1,
) -> list[AssociatedFrame]:
    """Load up to `limit` associated frames from a sequence directory."""
    root = Path(root)
    rgb_index = root / "rgb.txt"
    depth_index = root / "depth.txt"
    for index in (rgb_index, depth_index):
        if not index.is_file():
            raise FileNotFoundError(f"missing index file {index}")
    pairs = associate(read_index(rgb_index), read_index(depth_index), max_time_diff)
    if limit is not None:
        pairs = pairs[:limit]
    if not pairs:
        raise ValueError(f"{root}: no color/depth pairs within {max_time_diff}s of each other")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            frames = list(pool.map(lambda p: _load_pair(root, p, intrinsics.depth_scale), pairs))
    else:
        frames = [_load_pair(root, p, intrinsics.depth_scale) for p in pairs]
    for frame in frames:
        if frame.image.shape != (intrinsics.height, intrinsics.width):
            raise ValueError(
                f"frame at t={frame.rgb_timestamp} has shape {frame.image.shape[::-1]}, "
                f"expected {intrinsics.width}x{intrinsics.height}"
            )
    return frames
