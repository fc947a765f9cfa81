import csv
import io
import wave

import numpy as np
import pytest
from conftest import placeholder_corpus

from afb.dataset import (
    GSCD_WORDS,
    KEYWORDS,
    LABELS,
    UNKNOWN_INDEX,
    UNKNOWN_WORDS,
    LabelMap,
    build_splits,
    condition_length,
    load_waveform,
    read_manifest,
    write_wav,
)
from afb.errors import ArgumentError, DatasetError, UnsupportedFormatError, WavParseError
from afb.synth import desk_corpus_counts


def raw_wav(path, frames: bytes, rate=16000, channels=1, width=2):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(frames)
    return path


@pytest.fixture(scope="module")
def small_root(tmp_path_factory):
    return placeholder_corpus(tmp_path_factory.mktemp("small"), desk_corpus_counts(200, 800))


def test_label_map():
    assert LABELS == ("yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go", "unknown")
    assert len(LabelMap()) == 11 and UNKNOWN_INDEX == 10
    assert LabelMap().index_of_word("stop") == 8
    assert LabelMap().index_of_word("marvin") == 10
    assert len(GSCD_WORDS) == 35 and len(UNKNOWN_WORDS) == 25


def test_scaling_of_extreme_codes(tmp_path):
    pcm = np.zeros(16000, dtype="<i2")
    pcm[10], pcm[11] = -32768, 32767
    w = load_waveform(raw_wav(tmp_path / "a.wav", pcm.tobytes()))
    assert w.samples.min() == -1.0
    assert w.samples.max() == 32767 / 32768
    assert w.sample_rate_hz == 16000 and w.samples.size == 16000


def test_short_clip_padded_and_long_clip_truncated(tmp_path):
    short = load_waveform(raw_wav(tmp_path / "s.wav", np.full(14500, 1000, dtype="<i2").tobytes()))
    assert short.samples.size == 16000
    assert np.all(short.samples[-1500:] == 0) and np.all(short.samples[:14500] != 0)
    long = load_waveform(raw_wav(tmp_path / "l.wav", np.arange(17000, dtype="<i2").tobytes()))
    np.testing.assert_array_equal(long.samples, np.arange(16000) / 32768)


def test_condition_length_exact():
    assert condition_length(np.ones(16000)).size == 16000


@pytest.mark.parametrize(
    "kwargs",
    [dict(rate=44100, channels=2), dict(rate=8000), dict(width=1), dict(channels=2)],
)
def test_unsupported_formats(tmp_path, kwargs):
    path = raw_wav(tmp_path / "x.wav", b"\x00" * 400, **kwargs)
    with pytest.raises(UnsupportedFormatError):
        load_waveform(path)


def test_float_wav_is_unsupported(tmp_path):
    # RIFF header with format tag 3 (IEEE float)
    fmt = (3).to_bytes(2, "little") + (1).to_bytes(2, "little") + (16000).to_bytes(4, "little")
    fmt += (64000).to_bytes(4, "little") + (4).to_bytes(2, "little") + (32).to_bytes(2, "little")
    body = b"WAVE" + b"fmt " + len(fmt).to_bytes(4, "little") + fmt + b"data" + (8).to_bytes(4, "little") + b"\x00" * 8
    path = tmp_path / "f.wav"
    path.write_bytes(b"RIFF" + len(body).to_bytes(4, "little") + body)
    with pytest.raises(UnsupportedFormatError):
        load_waveform(path)


@pytest.mark.parametrize("data", [b"", b"RIFF", b"OggS" + b"\x00" * 40, b"RIFF\x10\x00\x00\x00WAVEjunk"])
def test_corrupt_headers(tmp_path, data):
    path = tmp_path / "c.wav"
    path.write_bytes(data)
    with pytest.raises(WavParseError):
        load_waveform(path)


def test_write_wav_round_trip(tmp_path):
    x = np.array([0.0, 0.5, -0.25, 1.5, -2.0])
    write_wav(tmp_path / "r.wav", x)
    y = load_waveform(tmp_path / "r.wav").samples[:5]
    np.testing.assert_array_equal(y, [0.0, 0.5, -0.25, 32767 / 32768, -1.0])


def test_small_preset_counts_and_disjointness(small_root):
    s = build_splits(small_root, "small", 0)
    for name in ("train", "validation", "test"):
        items = s.split(name)
        assert len(items) == 2800
        assert s.counts[name] == [200] * 10 + [800]
    paths = [set(p for p, _ in s.split(n)) for n in ("train", "validation", "test")]
    assert not (paths[0] & paths[1]) and not (paths[0] & paths[2]) and not (paths[1] & paths[2])


def test_unknown_words_balanced_within_one(small_root):
    s = build_splits(small_root, "small", 3)
    for name in ("train", "validation", "test"):
        per_word = {}
        for rel, label in s.split(name):
            if label == UNKNOWN_INDEX:
                w = rel.split("/")[0]
                per_word[w] = per_word.get(w, 0) + 1
        assert set(per_word) == set(UNKNOWN_WORDS)
        assert max(per_word.values()) - min(per_word.values()) <= 1


def test_deterministic_and_seed_sensitive(small_root):
    a, b = build_splits(small_root, "small", 0), build_splits(small_root, "small", 0)
    assert a.manifest_csv() == b.manifest_csv()
    c = build_splits(small_root, "small", 1)
    assert a.train != c.train


def test_manifest_format_and_round_trip(small_root, tmp_path):
    s = build_splits(small_root, "desk", 0)
    s.write_manifest(tmp_path / "m.csv")
    rows = list(csv.reader(io.StringIO((tmp_path / "m.csv").read_text())))
    assert rows[0] == ["path", "class_index", "split"]
    assert len(rows) == 1 + 3 * 700
    word, _ = rows[1][0].split("/")
    assert word in GSCD_WORDS
    back = read_manifest(tmp_path / "m.csv", small_root)
    assert (back.train, back.validation, back.test) == (s.train, s.validation, s.test)


def test_bad_manifest(tmp_path):
    (tmp_path / "m.csv").write_text("file,label\n")
    with pytest.raises(DatasetError):
        read_manifest(tmp_path / "m.csv", tmp_path)


def test_missing_word_is_named(tmp_path):
    counts = desk_corpus_counts(1, 25)
    del counts["sheila"]
    root = placeholder_corpus(tmp_path, counts)
    with pytest.raises(DatasetError, match="sheila"):
        build_splits(root, quotas=(1, 25))


def test_insufficient_word_is_named(tmp_path):
    counts = desk_corpus_counts(1, 25)
    counts["left"] = 2
    root = placeholder_corpus(tmp_path, counts)
    with pytest.raises(DatasetError, match="left"):
        build_splits(root, quotas=(1, 25))


def test_bad_preset_and_split_name(small_root):
    with pytest.raises(ArgumentError):
        build_splits(small_root, "huge", 0)
    with pytest.raises(ArgumentError):
        build_splits(small_root, "desk", 0).split("dev")


def test_real_clips_load(mini_root):
    s = build_splits(mini_root, quotas=(1, 25), seed=0)
    for rel, label in s.train[:5]:
        w = load_waveform(s.path(rel))
        assert w.samples.shape == (16000,)
        assert rel.split("/")[0] in KEYWORDS or label == UNKNOWN_INDEX
