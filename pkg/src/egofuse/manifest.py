"""Dataset manifests: segment records, TSV parsing, stratified splits."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .frames import valid_id


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class SegmentRecord:
    """One labelled video segment, optionally with an audio track."""

    segment_id: str
    label: int
    frame_dir: str
    frame_rate: float
    audio_path: str | None = None


@dataclass
class DatasetManifest:
    """Ordered segment collection plus the class-name table."""

    class_names: list[str]
    segments: list[SegmentRecord] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.segments], dtype=np.int64)

    def by_id(self, segment_id: str) -> SegmentRecord:
        for s in self.segments:
            if s.segment_id == segment_id:
                return s
        raise KeyError(segment_id)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse a TSV manifest.

    First non-blank line must be ``#classes<TAB>name1,name2,...``; every
    following non-blank line is
    ``id<TAB>label<TAB>frame_dir<TAB>frame_rate<TAB>audio_or_dash``.
    Labels are integer indices into the class list.  Relative paths are
    resolved against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    lines = path.read_text().splitlines()
    class_names: list[str] | None = None
    segments: list[SegmentRecord] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if class_names is None:
            fields = line.split("\t")
            if len(fields) != 2 or fields[0] != "#classes":
                raise ManifestError(f"{path}:{lineno}: expected '#classes<TAB>name1,name2,...' header")
            class_names = [c.strip() for c in fields[1].split(",")]
            if not class_names or any(not c for c in class_names):
                raise ManifestError(f"{path}:{lineno}: empty class name in header")
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise ManifestError(f"{path}:{lineno}: expected 5 tab-separated fields, got {len(fields)}")
        seg_id, label_s, frame_dir, rate_s, audio = fields
        if not valid_id(seg_id):
            raise ManifestError(f"{path}:{lineno}: invalid segment id {seg_id!r}")
        if seg_id in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate segment id {seg_id!r}")
        seen.add(seg_id)
        try:
            label = int(label_s)
        except ValueError:
            raise ManifestError(f"{path}:{lineno}: label must be an integer, got {label_s!r}") from None
        if not 0 <= label < len(class_names):
            raise ManifestError(f"{path}:{lineno}: label {label} out of range [0, {len(class_names)})")
        try:
            rate = float(rate_s)
        except ValueError:
            raise ManifestError(f"{path}:{lineno}: frame rate must be numeric, got {rate_s!r}") from None
        if not rate > 0:
            raise ManifestError(f"{path}:{lineno}: frame rate must be positive, got {rate}")
        fdir = str(base / frame_dir) if not Path(frame_dir).is_absolute() else frame_dir
        apath: str | None
        if audio == "-":
            apath = None
        else:
            apath = audio if Path(audio).is_absolute() else str(base / audio)
        segments.append(SegmentRecord(seg_id, label, fdir, rate, apath))
    if class_names is None:
        raise ManifestError(f"{path}: empty manifest (missing #classes header)")
    if not segments:
        raise ManifestError(f"{path}: manifest has no segments")
    counts = np.bincount([s.label for s in segments], minlength=len(class_names))
    thin = [class_names[c] for c in range(len(class_names)) if counts[c] < 2]
    if thin:
        raise ManifestError(f"{path}: classes with fewer than 2 segments: {', '.join(thin)}")
    return DatasetManifest(class_names=class_names, segments=segments)


def write_manifest(path: str | Path, manifest: DatasetManifest) -> None:
    out = ["#classes\t" + ",".join(manifest.class_names)]
    for s in manifest.segments:
        out.append(
            "\t".join(
                [s.segment_id, str(s.label), s.frame_dir, format(s.frame_rate, "g"), s.audio_path or "-"]
            )
        )
    Path(path).write_text("\n".join(out) + "\n")


def stratified_split(
    labels: np.ndarray, train_fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class random split.

    Each class contributes ``floor(n_c * train_fraction + 0.5)`` training
    segments, clamped so both sides keep at least one segment per class.
    Returns sorted index arrays (train, test).
    """
    labels = np.asarray(labels)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        n_c = len(members)
        n_train = int(np.floor(n_c * train_fraction + 0.5))
        n_train = min(max(n_train, 1), n_c - 1)
        perm = rng.permutation(n_c)
        chosen = members[perm]
        train_idx.extend(chosen[:n_train].tolist())
        test_idx.extend(chosen[n_train:].tolist())
    return np.sort(np.array(train_idx, dtype=np.int64)), np.sort(np.array(test_idx, dtype=np.int64))
