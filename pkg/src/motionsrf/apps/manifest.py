"""Corpus manifests: tab-separated lines ``frame  next_frame  flow  [label]``.

``-`` marks an absent next frame or label, ``#`` starts a comment, and
relative paths resolve against the manifest's directory.
"""

from dataclasses import dataclass, field
from pathlib import Path

from ..errors import DataError
from ..flowio import read_flo
from ..imagecore import load_image


@dataclass(frozen=True)
class ManifestEntry:
    frame: Path
    flow: Path
    next_frame: Path = None
    label: str = None


@dataclass
class CorpusManifest:
    entries: list = field(default_factory=list)
    base_dir: Path = Path(".")

    def __len__(self):
        return len(self.entries)

    def labels(self):
        """Distinct labels in first-seen order; [None] when unlabeled."""
        seen = []
        for e in self.entries:
            if e.label not in seen:
                seen.append(e.label)
        return seen

    def by_label(self, label):
        return [e for e in self.entries if e.label == label]


def _resolve(base, text):
    if text == "-":
        return None
    p = Path(text)
    return p if p.is_absolute() else base / p


def parse_manifest(text, base_dir="."):
    base = Path(base_dir)
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].rstrip("\r\n")
        if not stripped.strip():
            continue
        cols = [c.strip() for c in stripped.split("\t")]
        if len(cols) not in (3, 4):
            raise DataError(f"manifest line {lineno}: expected 3 or 4 tab-separated columns")
        frame, nxt, flow = (_resolve(base, c) for c in cols[:3])
        if frame is None or flow is None:
            raise DataError(f"manifest line {lineno}: frame and flow are required")
        label = cols[3] if len(cols) == 4 and cols[3] != "-" else None
        entries.append(ManifestEntry(frame, flow, nxt, label))
    return CorpusManifest(entries, base)


def load_manifest(path, check=True):
    path = Path(path)
    manifest = parse_manifest(path.read_text(encoding="utf-8"), path.parent)
    if check:
        for e in manifest.entries:
            for p in (e.frame, e.flow, e.next_frame):
                if p is not None and not p.exists():
                    raise DataError(f"manifest references missing file {p}")
    return manifest


def format_manifest(manifest):
    lines = ["# frame\tnext_frame\tflow\tlabel"]
    base = Path(manifest.base_dir)

    def rel(p):
        if p is None:
            return "-"
        try:
            return Path(p).relative_to(base).as_posix()
        except ValueError:
            return str(p)

    for e in manifest.entries:
        lines.append("\t".join([rel(e.frame), rel(e.next_frame), rel(e.flow), e.label or "-"]))
    return "\n".join(lines) + "\n"


def write_manifest(path, manifest):
    Path(path).write_text(format_manifest(manifest), encoding="utf-8")


def load_pair(entry):
    """(image, flow) for one entry; checks that the sizes agree."""
    img = load_image(entry.frame)
    flow = read_flo(entry.flow)
    if img.shape[:2] != flow.shape[:2]:
        raise DataError(f"{entry.frame}: image {img.shape[:2]} vs flow {flow.shape[:2]}")
    return img, flow
