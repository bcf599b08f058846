"""Loading 80-frame fire sequences from the on-disk layout.

Layout per fire: `<root>/<fire_id>/<camera_id>_<signed offset>.jpg` for
offsets -40..+39 relative to ignition, with optional sibling
`..._mask.png` ground-truth smoke masks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
from PIL import Image

from smokesense.data.manifest import ManifestEntry
from smokesense.imaging.types import MAX_OFFSET, MIN_OFFSET, RawFrame
from smokesense.weather.types import CameraPose, ensure_utc

N_FRAMES = MAX_OFFSET - MIN_OFFSET + 1
ALL_OFFSETS = tuple(range(MIN_OFFSET, MAX_OFFSET + 1))


def offset_tag(offset: int) -> str:
    """Signed two-digit offset string: 7 -> '+07', -40 -> '-40'."""
    return f"{offset:+03d}"


def frame_filename(camera_id: str, offset: int) -> str:
    return f"{camera_id}_{offset_tag(offset)}.jpg"


def mask_filename(camera_id: str, offset: int) -> str:
    return f"{camera_id}_{offset_tag(offset)}_mask.png"


@dataclass(frozen=True)
class FireSequence:
    fire_id: str
    camera: CameraPose
    ignition: datetime
    frames: tuple[RawFrame, ...]

    def __post_init__(self):
        object.__setattr__(self, "ignition", ensure_utc(self.ignition))
        object.__setattr__(self, "frames", tuple(self.frames))
        offsets = [f.minute_offset for f in self.frames]
        if offsets != list(ALL_OFFSETS):
            missing = sorted(set(ALL_OFFSETS) - set(offsets))
            dupes = sorted({o for o in offsets if offsets.count(o) > 1})
            raise ValueError(
                f"fire {self.fire_id}: expected one frame per offset "
                f"{offset_tag(MIN_OFFSET)}..{offset_tag(MAX_OFFSET)}; "
                f"missing {[offset_tag(o) for o in missing]}, "
                f"duplicated {[offset_tag(o) for o in dupes]}"
            )
        bad_cam = [f for f in self.frames if f.camera_id != self.camera.camera_id]
        if bad_cam:
            raise ValueError(
                f"fire {self.fire_id}: frame camera {bad_cam[0].camera_id!r} "
                f"does not match sequence camera {self.camera.camera_id!r}"
            )

    def __len__(self) -> int:
        return len(self.frames)

    def frame_time(self, offset: int) -> datetime:
        return self.ignition + timedelta(minutes=offset)


def _fire_dir(entry: ManifestEntry, data_root: Path | str) -> Path:
    d = Path(data_root) / entry.fire_id
    if not d.is_dir():
        raise FileNotFoundError(f"fire directory not found: {d}")
    return d


def load_fire_sequence(entry: ManifestEntry, data_root: Path | str) -> FireSequence:
    """Read all 80 frames of one fire, validating the offset inventory."""
    fire_dir = _fire_dir(entry, data_root)
    pattern = re.compile(re.escape(entry.camera_id) + r"_([+-]\d{2})\.jpg$")
    found: dict[int, list[Path]] = {}
    for path in sorted(fire_dir.iterdir()):
        m = pattern.fullmatch(path.name)
        if m:
            found.setdefault(int(m.group(1)), []).append(path)

    missing = [o for o in ALL_OFFSETS if o not in found]
    dupes = {o: paths for o, paths in found.items() if len(paths) > 1}
    if missing or dupes:
        raise ValueError(
            f"fire {entry.fire_id}: missing offsets "
            f"{[offset_tag(o) for o in missing]}, duplicate offsets "
            f"{[offset_tag(o) for o in sorted(dupes)]}"
        )

    frames = []
    for offset in ALL_OFFSETS:
        path = found[offset][0]
        try:
            with Image.open(path) as im:
                pixels = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except OSError as e:
            raise ValueError(f"fire {entry.fire_id}: unreadable image {path}: {e}") from e
        frames.append(
            RawFrame(camera_id=entry.camera_id, minute_offset=offset, pixels=pixels)
        )
    return FireSequence(
        fire_id=entry.fire_id,
        camera=entry.camera,
        ignition=entry.ignition,
        frames=tuple(frames),
    )


def load_fire_masks(entry: ManifestEntry, data_root: Path | str) -> dict[int, np.ndarray]:
    """Read whatever ground-truth masks exist for one fire: offset -> bool (H, W)."""
    fire_dir = _fire_dir(entry, data_root)
    masks: dict[int, np.ndarray] = {}
    for offset in ALL_OFFSETS:
        path = fire_dir / mask_filename(entry.camera_id, offset)
        if not path.exists():
            continue
        with Image.open(path) as im:
            masks[offset] = np.asarray(im.convert("L")) > 127
    return masks
