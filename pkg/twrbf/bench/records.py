"""
Versioned CSV tables for benchmark results and convergence traces.

A table file starts with a magic line ``# <name> schema=<version>``, followed
by the header row and one row per record. The whole text is passed through a
:py:class:`~twrbf.bench.codec.Codec` when the writer is closed.
"""
import csv
import dataclasses
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Iterable, List, Sequence, Type, Union

from twrbf.bench.codec import Codec, NullCodec, codec_for_path, sniff_codec


@dataclass(frozen=True)
class TableSchema:
    name: str
    version: int
    record: Type

    @property
    def magic(self) -> str:
        return f"# {self.name} schema={self.version}"

    @property
    def columns(self) -> List[str]:
        return [f.name for f in dataclasses.fields(self.record)]


@dataclass
class ResultRecord:
    trial: int
    snr_db: float
    scheme: str
    metric: str
    value: float
    iterations: int = 0
    runtime_ms: float = 0.0
    rank1_accepted: bool = False
    relaxation_gap: float = math.nan


@dataclass
class TraceRecord:
    trial: int
    snr_db: float
    algorithm: str
    iteration: int
    value: float
    bound: float = math.nan
    vertices: int = 0


RESULTS = TableSchema("twrbf-results", 1, ResultRecord)
TRACES = TableSchema("twrbf-trace", 1, TraceRecord)


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _parse(kind: Type, text: str) -> Any:
    if kind is bool:
        return text == "1"
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


class TableWriter:
    def __init__(
        self,
        fo: IO[bytes],
        schema: TableSchema = RESULTS,
        codec: Codec = NullCodec(),
    ):
        self.fo = fo
        self.schema = schema
        self.codec = codec
        self.count = 0
        self.buf = io.StringIO()
        self._csv = csv.writer(self.buf, lineterminator="\n")
        self.buf.write(schema.magic + "\n")
        self._csv.writerow(schema.columns)
        self.closed = False

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, exc_traceback):
        self.close()

    def write(self, record: Any) -> None:
        if not isinstance(record, self.schema.record):
            raise TypeError(
                f"{self.schema.name} rows must be {self.schema.record.__name__}"
            )
        row = dataclasses.astuple(record)
        self._csv.writerow([format_value(v) for v in row])
        self.count += 1

    def close(self) -> None:
        """Encode everything written so far and write it out once."""
        if self.closed:
            return
        self.fo.write(self.codec.encode(self.buf.getvalue().encode("utf-8")))
        self.fo.flush()
        self.closed = True


def write_table(
    path: Union[str, Path], records: Iterable[Any], schema: TableSchema = RESULTS
) -> int:
    with open(path, "wb") as fo:
        with TableWriter(fo, schema, codec_for_path(path)) as w:
            for r in records:
                w.write(r)
        return w.count


def read_table(
    fo: IO[bytes], schema: TableSchema = RESULTS, codec: Codec = NullCodec()
) -> List[Any]:
    raw = fo.read()
    if isinstance(codec, NullCodec):
        codec = sniff_codec(raw)
    text = codec.decode(raw).decode("utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != schema.magic:
        raise ValueError(
            f"missing '{schema.magic}' header, is this a {schema.name} file?"
        )
    reader = csv.reader(lines[1:])
    header = next(reader, None)
    if header != schema.columns:
        raise ValueError(f"unexpected columns {header}")
    kinds = [f.type for f in dataclasses.fields(schema.record)]
    out = []
    for row in reader:
        out.append(schema.record(*[_parse(k, v) for k, v in zip(kinds, row)]))
    return out


def read_results(path: Union[str, Path]) -> List[ResultRecord]:
    with open(path, "rb") as fo:
        return read_table(fo, RESULTS, codec_for_path(path))


def read_traces(path: Union[str, Path]) -> List[TraceRecord]:
    with open(path, "rb") as fo:
        return read_table(fo, TRACES, codec_for_path(path))


def sort_results(
    records: Sequence[ResultRecord],
    snr_order: Sequence[float],
    scheme_order: Sequence[str],
) -> List[ResultRecord]:
    """Order rows by trial, SNR position, scheme position and metric."""
    snr_rank = {s: k for k, s in enumerate(snr_order)}
    scheme_rank = {s: k for k, s in enumerate(scheme_order)}
    return sorted(
        records,
        key=lambda r: (
            r.trial,
            snr_rank.get(r.snr_db, len(snr_rank)),
            scheme_rank.get(r.scheme, len(scheme_rank)),
            r.metric,
        ),
    )
