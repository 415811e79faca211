"""Framed multi-chunk archive format for arithmetic-coded streams.

Layout (all integers little-endian):

    magic "MZP1" | u8 version | u8 register_bits | u8 freq_bits |
    u32 alphabet_size | u16 model_id length | model_id bytes (utf-8) |
    u32 chunk_count | per chunk: u32 symbol_count, u32 bit_length,
    ceil(bit_length / 8) payload bytes

Compression-rate computations use the summed payload bytes only; the header
is bookkeeping and is excluded.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .coder import ChunkFrame, CoderConfig, CoderError, decode_chunk, encode_chunk

__all__ = ["Archive", "ArchiveError", "encode_stream", "decode_stream"]

MAGIC = b"MZP1"
VERSION = 1


class ArchiveError(ValueError):
    pass


@dataclass
class Archive:
    model_id: str
    alphabet_size: int
    config: CoderConfig = field(default_factory=CoderConfig)
    chunks: list[ChunkFrame] = field(default_factory=list)
    version: int = VERSION

    @property
    def symbol_count(self) -> int:
        return sum(c.symbol_count for c in self.chunks)

    @property
    def payload_bytes(self) -> int:
        return sum((c.bit_length + 7) // 8 for c in self.chunks)

    @property
    def payload_bits(self) -> int:
        return sum(c.bit_length for c in self.chunks)

    def to_bytes(self) -> bytes:
        ident = self.model_id.encode("utf-8")
        if len(ident) > 0xFFFF:
            raise ArchiveError("model id too long")
        out = bytearray()
        out += MAGIC
        out += struct.pack(
            "<BBBIH", self.version, self.config.register_bits, self.config.freq_bits,
            self.alphabet_size, len(ident),
        )
        out += ident
        out += struct.pack("<I", len(self.chunks))
        for chunk in self.chunks:
            if not chunk.is_intact:
                raise ArchiveError("refusing to serialize a truncated chunk")
            out += struct.pack("<II", chunk.symbol_count, chunk.bit_length)
            out += chunk.payload
        return bytes(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Archive":
        if blob[:4] != MAGIC:
            raise ArchiveError("bad magic; not a modelzip archive")
        version, b, f, alphabet, ident_len = struct.unpack_from("<BBBIH", blob, 4)
        if version != VERSION:
            raise ArchiveError(f"unsupported archive version {version}")
        pos = 4 + 9
        ident = blob[pos: pos + ident_len].decode("utf-8")
        pos += ident_len
        (n_chunks,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        chunks = []
        for i in range(n_chunks):
            if pos + 8 > len(blob):
                raise ArchiveError(f"archive truncated in chunk {i} header")
            symbol_count, bit_length = struct.unpack_from("<II", blob, pos)
            pos += 8
            nbytes = (bit_length + 7) // 8
            if pos + nbytes > len(blob):
                raise ArchiveError(f"archive truncated in chunk {i} payload")
            payload = blob[pos: pos + nbytes]
            pos += nbytes
            chunks.append(ChunkFrame(symbol_count=symbol_count, bit_length=bit_length,
                                     payload=payload))
        if pos != len(blob):
            raise ArchiveError("trailing bytes after final chunk")
        return cls(model_id=ident, alphabet_size=alphabet,
                   config=CoderConfig(register_bits=b, freq_bits=f),
                   chunks=chunks, version=version)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Archive":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def encode_stream(symbols, model, chunk_size: int,
                  config: CoderConfig | None = None, freq_log=None) -> Archive:
    """Encode a symbol stream as independent chunks of ``chunk_size``.

    Model state resets at every chunk boundary; the final chunk may be
    short.  An empty input yields an archive with zero chunks.
    """
    if chunk_size < 1:
        raise ArchiveError("chunk size must be at least 1")
    config = config or CoderConfig()
    symbols = np.asarray(symbols, dtype=np.int64)
    archive = Archive(model_id=model.model_id, alphabet_size=model.alphabet_size,
                      config=config)
    for start in range(0, symbols.shape[0], chunk_size):
        piece = symbols[start: start + chunk_size]
        try:
            archive.chunks.append(encode_chunk(piece, model, config, freq_log=freq_log))
        except CoderError as exc:
            raise ArchiveError(f"chunk {start // chunk_size}: {exc}") from exc
    return archive


def decode_stream(archive: Archive, model) -> np.ndarray:
    """Invert :func:`encode_stream` under the same deterministic model."""
    if model.alphabet_size != archive.alphabet_size:
        raise ArchiveError(
            f"archive was coded over {archive.alphabet_size} symbols, "
            f"model has {model.alphabet_size}"
        )
    pieces = []
    for index, chunk in enumerate(archive.chunks):
        try:
            pieces.append(decode_chunk(chunk, model, archive.config))
        except CoderError as exc:
            raise ArchiveError(f"chunk {index}: {exc}") from exc
    if not pieces:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(pieces)
