"""Time-bucketed corpus index and loaders.

Directory layout: ``<root>/<YYYY-MM>/<document>``.  Text documents carry
.txt/.md/.tex extensions and must be valid UTF-8; raw byte documents carry
.bin/.raw.  The manifest is versioned JSON and records byte sizes, which
are verified again at load time.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "CorpusError",
    "Document",
    "ManifestEntry",
    "CorpusManifest",
    "ingest",
    "load_bucket",
    "parse_year_month",
]

SCHEMA_VERSION = 1

TEXT_EXTENSIONS = {".txt", ".md", ".tex"}
BYTE_EXTENSIONS = {".bin", ".raw"}

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


class CorpusError(ValueError):
    pass


def parse_year_month(value: str) -> tuple[int, int]:
    match = _MONTH_RE.match(value)
    if not match:
        raise CorpusError(f"{value!r} is not a YYYY-MM month")
    year, month = int(match.group(1)), int(match.group(2))
    if not (2000 <= year <= 2100 and 1 <= month <= 12):
        raise CorpusError(f"{value!r} is outside the supported 2000-01..2100-12 range")
    return year, month


@dataclass(frozen=True)
class ManifestEntry:
    doc_id: str
    path: str  # relative to the corpus root
    modality: str  # "text" | "bytes"
    year_month: str
    byte_size: int


@dataclass(frozen=True)
class Document:
    doc_id: str
    modality: str
    year_month: str
    data: bytes
    text: str | None = None


@dataclass
class CorpusManifest:
    dataset: str
    entries: list[ManifestEntry] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def months(self) -> list[str]:
        return sorted({e.year_month for e in self.entries})

    def bucket(self, year_month: str) -> list[ManifestEntry]:
        return sorted(
            (e for e in self.entries if e.year_month == year_month),
            key=lambda e: e.doc_id,
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "dataset": self.dataset,
            "entries": [vars(e) for e in sorted(self.entries, key=lambda e: e.doc_id)],
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        data = json.loads(Path(path).read_text())
        if data.get("schema_version") != SCHEMA_VERSION:
            raise CorpusError(
                f"manifest schema {data.get('schema_version')!r} unsupported"
            )
        return cls(
            dataset=data["dataset"],
            entries=[ManifestEntry(**e) for e in data["entries"]],
        )


def _modality_for(path: Path) -> str:
    ext = path.suffix.lower()
    if ext in TEXT_EXTENSIONS:
        return "text"
    if ext in BYTE_EXTENSIONS:
        return "bytes"
    raise CorpusError(
        f"{path}: unknown extension {ext!r}; expected one of "
        f"{sorted(TEXT_EXTENSIONS | BYTE_EXTENSIONS)}"
    )


def ingest(directory, dataset: str | None = None) -> CorpusManifest:
    """Index every regular file under ``<directory>/<YYYY-MM>/`` into a manifest."""
    root = Path(directory)
    if not root.is_dir():
        raise CorpusError(f"{root} is not a directory")
    manifest = CorpusManifest(dataset=dataset or root.name)
    seen: set[str] = set()
    for month_dir in sorted(p for p in root.iterdir() if not p.name.startswith(".")):
        if not month_dir.is_dir():
            raise CorpusError(f"{month_dir}: corpus root must contain only month directories")
        parse_year_month(month_dir.name)
        for file_path in sorted(p for p in month_dir.iterdir() if not p.name.startswith(".")):
            if not file_path.is_file():
                raise CorpusError(f"{file_path}: nested directories are not supported")
            doc_id = f"{month_dir.name}/{file_path.name}"
            if doc_id in seen:
                raise CorpusError(f"duplicate document id {doc_id}")
            seen.add(doc_id)
            manifest.entries.append(ManifestEntry(
                doc_id=doc_id,
                path=doc_id,
                modality=_modality_for(file_path),
                year_month=month_dir.name,
                byte_size=file_path.stat().st_size,
            ))
    manifest.entries.sort(key=lambda e: e.doc_id)
    return manifest


def load_bucket(manifest: CorpusManifest, year_month: str, root) -> list[Document]:
    """Load one month of documents in doc_id order, verifying sizes and encodings."""
    parse_year_month(year_month)
    entries = manifest.bucket(year_month)
    if not entries:
        raise CorpusError(f"{manifest.dataset}: no documents for {year_month}")
    root = Path(root)
    documents = []
    for entry in entries:
        path = root / entry.path
        if not path.is_file():
            raise CorpusError(f"{path}: listed in manifest but missing on disk")
        data = path.read_bytes()
        if len(data) != entry.byte_size:
            raise CorpusError(
                f"{path}: integrity failure, manifest says {entry.byte_size} bytes "
                f"but file has {len(data)}"
            )
        text = None
        if entry.modality == "text":
            try:
                text = data.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorpusError(f"{path}: text document is not valid UTF-8: {exc}")
        documents.append(Document(
            doc_id=entry.doc_id,
            modality=entry.modality,
            year_month=entry.year_month,
            data=data,
            text=text,
        ))
    return documents


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
