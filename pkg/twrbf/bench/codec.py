"""
Whole-file compression for result and trace tables.

The writer picks a codec from the file suffix. A table read as plain text is
checked for a known magic prefix first, so a renamed file still decodes.
"""
import bz2
import gzip
import lzma
import zlib
from pathlib import Path
from typing import Dict, List, Type, Union

import snappy
import zstandard


class Codec:
    suffix = ""
    # Leading bytes of an encoded file; empty when the format has none.
    magic = b""

    def encode(self, data: bytes) -> bytes:
        raise NotImplementedError("abstract base is not implemented")

    def decode(self, source: bytes) -> bytes:
        raise NotImplementedError("abstract base is not implemented")


class NullCodec(Codec):
    def encode(self, data: bytes) -> bytes:
        return data

    def decode(self, source: bytes) -> bytes:
        return source


class GzipCodec(Codec):
    suffix = ".gz"
    magic = b"\x1f\x8b"

    def __init__(self, compression_level: int = 9):
        self.compression_level = compression_level

    def encode(self, data: bytes) -> bytes:
        # mtime=0 keeps repeated runs byte-identical.
        return gzip.compress(data, self.compression_level, mtime=0)

    def decode(self, source: bytes) -> bytes:
        return gzip.decompress(source)


class SnappyCodec(Codec):
    """Raw snappy followed by a big-endian CRC32 of the compressed bytes."""

    suffix = ".sz"

    def encode(self, data: bytes) -> bytes:
        body = snappy.compress(data)
        return body + zlib.crc32(body).to_bytes(4, "big")

    def decode(self, source: bytes) -> bytes:
        if len(source) < 4:
            raise ValueError("snappy table is truncated")
        body, trailer = source[:-4], source[-4:]
        if zlib.crc32(body).to_bytes(4, "big") != trailer:
            raise ValueError("snappy checksum mismatch, table is corrupted")
        return snappy.decompress(body)


class Bzip2Codec(Codec):
    suffix = ".bz2"
    magic = b"BZh"

    def encode(self, data: bytes) -> bytes:
        return bz2.compress(data)

    def decode(self, source: bytes) -> bytes:
        return bz2.decompress(source)


class XZCodec(Codec):
    suffix = ".xz"
    magic = b"\xfd7zXZ\x00"

    def encode(self, data: bytes) -> bytes:
        return lzma.compress(data, format=lzma.FORMAT_XZ)

    def decode(self, source: bytes) -> bytes:
        return lzma.decompress(source, format=lzma.FORMAT_XZ)


class ZstandardCodec(Codec):
    """One zstd frame carrying its content size and a checksum."""

    suffix = ".zst"
    magic = b"\x28\xb5\x2f\xfd"

    def __init__(self, level: int = 10):
        self.level = level

    def encode(self, data: bytes) -> bytes:
        compressor = zstandard.ZstdCompressor(
            level=self.level, write_checksum=True, write_content_size=True
        )
        return compressor.compress(data)

    def decode(self, source: bytes) -> bytes:
        try:
            return zstandard.ZstdDecompressor().decompress(source)
        except zstandard.ZstdError as e:
            raise ValueError(f"zstandard table is unreadable: {e}") from e


_CODECS: List[Type[Codec]] = [
    GzipCodec,
    SnappyCodec,
    Bzip2Codec,
    XZCodec,
    ZstandardCodec,
]

codec_by_suffix: Dict[str, Type[Codec]] = {c.suffix: c for c in _CODECS}


def codec_for_path(path: Union[str, Path]) -> Codec:
    """The codec named by the last suffix of ``path``; plain text otherwise."""
    cls = codec_by_suffix.get(Path(path).suffix.lower(), NullCodec)
    return cls()


def sniff_codec(data: bytes) -> Codec:
    """The codec whose magic bytes start ``data``, or plain text."""
    for cls in _CODECS:
        if cls.magic and data.startswith(cls.magic):
            return cls()
    return NullCodec()
