import io
import math

import pytest
import zstandard

from twrbf.bench.codec import (
    GzipCodec,
    NullCodec,
    SnappyCodec,
    ZstandardCodec,
    codec_by_suffix,
    codec_for_path,
)
from twrbf.bench.records import (
    RESULTS,
    TRACES,
    ResultRecord,
    TableWriter,
    TraceRecord,
    read_results,
    read_table,
    read_traces,
    sort_results,
    write_table,
)


def sample_records():
    return [
        ResultRecord(0, 10.0, "maxmin", "min_sinr_ratio", 1.25, 3, 0.0, True, 0.0),
        ResultRecord(0, 10.0, "identity", "min_sinr_ratio", 0.5),
        ResultRecord(1, 0.0, "zf", "min_sinr_ratio", math.nan),
    ]


def same(a, b):
    for x, y in zip(a.__dict__.values(), b.__dict__.values()):
        if isinstance(x, float) and math.isnan(x):
            assert math.isnan(y)
        else:
            assert x == y


@pytest.mark.parametrize("suffix", ["", ".csv", ".gz", ".sz", ".bz2", ".xz", ".zst"])
def test_table_file(tmp_path, suffix):
    path = tmp_path / f"results{suffix}"
    records = sample_records()
    assert write_table(path, records) == 3
    read = read_results(path)
    assert len(read) == 3
    for a, b in zip(records, read):
        same(a, b)


@pytest.mark.parametrize("suffix, codec", list(codec_by_suffix.items()))
def test_codec_for_path(suffix, codec):
    assert isinstance(codec_for_path("out.csv" + suffix), codec)
    assert codec_for_path("out.csv" + suffix).suffix == suffix


def test_plain_text_default():
    assert isinstance(codec_for_path("out.csv"), NullCodec)


@pytest.mark.parametrize("suffix", [".gz", ".bz2", ".xz", ".zst"])
def test_renamed_file_still_reads(tmp_path, suffix):
    packed = tmp_path / f"results.csv{suffix}"
    write_table(packed, sample_records())
    renamed = tmp_path / "results.csv"
    packed.rename(renamed)
    assert len(read_results(renamed)) == 3


def test_snappy_truncated():
    with pytest.raises(ValueError):
        SnappyCodec().decode(b"\x01")


def test_zstandard_frame_header():
    payload = b"trial,snr_db\n" * 50
    encoded = ZstandardCodec().encode(payload)
    params = zstandard.get_frame_parameters(encoded)
    assert params.content_size == len(payload)
    assert params.has_checksum
    assert ZstandardCodec(level=1).decode(encoded) == payload


def test_zstandard_truncated():
    encoded = ZstandardCodec().encode(b"0,10,maxmin,min_sinr_ratio,1.25\n" * 20)
    with pytest.raises(ValueError):
        ZstandardCodec().decode(encoded[:-6])


def test_text_layout():
    fp = io.BytesIO()
    with TableWriter(fp) as w:
        w.write(sample_records()[0])
        w.write(sample_records()[2])
    lines = fp.getvalue().decode("utf-8").splitlines()
    assert lines[0] == "# twrbf-results schema=1"
    assert lines[1].split(",") == RESULTS.columns
    assert lines[2] == "0,10,maxmin,min_sinr_ratio,1.25,3,0,1,0"
    assert lines[3] == "1,0,zf,min_sinr_ratio,nan,0,0,0,nan"


def test_gzip_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv.gz", tmp_path / "b.csv.gz"
    write_table(a, sample_records())
    write_table(b, sample_records())
    assert a.read_bytes() == b.read_bytes()


def test_writer_ctx_manager():
    fp = io.BytesIO()
    with pytest.raises(ValueError):
        with TableWriter(fp, codec=GzipCodec()) as w:
            w.write(sample_records()[0])
            raise ValueError("barf")
    # Rows written before the error still reach the file.
    fp.seek(0)
    assert len(read_table(fp, codec=GzipCodec())) == 1


def test_writer_rejects_other_records():
    with TableWriter(io.BytesIO()) as w:
        with pytest.raises(TypeError):
            w.write(TraceRecord(0, 0.0, "polyblock", 0, 1.0))


def test_close_is_idempotent():
    fp = io.BytesIO()
    w = TableWriter(fp, codec=ZstandardCodec())
    w.close()
    w.close()
    fp.seek(0)
    assert read_table(fp, codec=ZstandardCodec()) == []


def test_bad_magic():
    with pytest.raises(ValueError):
        read_table(io.BytesIO(b"trial,snr_db\n"))


def test_wrong_schema():
    fp = io.BytesIO()
    with TableWriter(fp, TRACES) as w:
        w.write(TraceRecord(0, 0.0, "polyblock", 0, 1.0, 2.0, 1))
    fp.seek(0)
    with pytest.raises(ValueError):
        read_table(fp, RESULTS)


def test_bad_columns():
    text = "# twrbf-results schema=1\ntrial,value\n"
    with pytest.raises(ValueError):
        read_table(io.BytesIO(text.encode()))


def test_snappy_checksum():
    data = SnappyCodec().encode(b"some table text")
    corrupted = data[:-1] + bytes([data[-1] ^ 0xFF])
    with pytest.raises(ValueError):
        SnappyCodec().decode(corrupted)


def test_traces(tmp_path):
    path = tmp_path / "trace.csv"
    rows = [
        TraceRecord(0, 5.0, "polyblock", k, 1.0 + k, 4.0 - k, 2 * k)
        for k in range(3)
    ]
    write_table(path, rows, TRACES)
    assert read_traces(path) == rows


def test_sort_results():
    rows = [
        ResultRecord(1, 0.0, "b", "m", 1.0),
        ResultRecord(0, 10.0, "a", "m", 1.0),
        ResultRecord(0, 0.0, "b", "m", 1.0),
        ResultRecord(0, 0.0, "a", "m", 1.0),
    ]
    ordered = sort_results(rows, snr_order=[10.0, 0.0], scheme_order=["b", "a"])
    keys = [(r.trial, r.snr_db, r.scheme) for r in ordered]
    assert keys == [(0, 10.0, "a"), (0, 0.0, "b"), (0, 0.0, "a"), (1, 0.0, "b")]
