import numpy as np
import pytest

from afb import plots
from afb.dataset import CLIP_SAMPLES, GSCD_WORDS, LABELS, load_waveform
from afb.filterbank import TINY, design_filterbank
from afb.synth import TRANSCRIPTIONS, desk_corpus_counts, make_corpus, synthesize_word


def test_every_corpus_word_has_a_transcription():
    assert set(GSCD_WORDS) <= set(TRANSCRIPTIONS)


@pytest.mark.parametrize("word", ["yes", "no", "sheila", "house"])
def test_synthesized_clip_is_bounded_and_seeded(word):
    a = synthesize_word(word, np.random.default_rng(3))
    b = synthesize_word(word, np.random.default_rng(3))
    assert a.shape == (CLIP_SAMPLES,)
    assert np.array_equal(a, b)
    assert 0 < np.max(np.abs(a)) < 1


def test_unknown_word_is_rejected():
    with pytest.raises(KeyError):
        synthesize_word("banana", np.random.default_rng(0))


def test_corpus_layout_and_reproducibility(tmp_path):
    make_corpus(tmp_path / "a", 2, seed=5, words=("yes", "wow"))
    make_corpus(tmp_path / "b", 2, seed=5, words=("yes", "wow"))
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.wav"))
    assert len(files) == 4 and {f.parts[0] for f in files} == {"yes", "wow"}
    assert all("_nohash_" in f.name for f in files)
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        assert load_waveform(tmp_path / "a" / f).samples.shape == (CLIP_SAMPLES,)


def test_desk_counts_fill_three_splits():
    counts = desk_corpus_counts(50, 200)
    assert counts["yes"] == 150
    assert sum(v for w, v in counts.items() if w not in LABELS) >= 600


def _render_all(out):
    rng = np.random.default_rng(0)
    plots.plot_sweep("q", [2, 8, 30], [0.5, 0.7, 0.6], [0.4, 0.6, float("nan")], [0.6, 0.8, float("nan")],
                     out / "sweep.svg", markers={"typical": 8, "tiny": 2})
    plots.plot_spectrogram(rng.standard_normal((10, 99)), out / "spec.svg", centers_hz=np.geomspace(100, 2000, 10))
    plots.plot_confusion(rng.integers(0, 5, (11, 11)), out / "conf.svg")
    plots.plot_frequency_response(design_filterbank(TINY), out / "resp.svg")
    plots.plot_comparison(["typical", "tiny"], [1.344e6, 4e4], [0.8, 0.7], [0.75, 0.6], [0.85, 0.8], out / "cmp.svg")


def test_svg_output_is_byte_identical(tmp_path):
    _render_all(tmp_path / "a")
    _render_all(tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["cmp.svg", "conf.svg", "resp.svg", "spec.svg", "sweep.svg"]
    for name in names:
        data = (tmp_path / "a" / name).read_bytes()
        assert data.startswith(b"<?xml") and data == (tmp_path / "b" / name).read_bytes()


def test_sweep_series_groups_trials():
    rows = [
        {"point_value": 8.0, "accuracy": 0.6, "ci_low": 0.5, "ci_high": 0.7},
        {"point_value": 2.0, "accuracy": 0.4, "ci_low": 0.3, "ci_high": 0.5},
        {"point_value": 8.0, "accuracy": 0.8, "ci_low": 0.5, "ci_high": 0.7},
        {"point_value": 2.0, "accuracy": float("nan"), "ci_low": 0.3, "ci_high": 0.5},
    ]
    values, means, lo, hi = plots.sweep_series(rows)
    assert values.tolist() == [2.0, 8.0]
    np.testing.assert_allclose(means, [0.4, 0.7])
    assert lo.tolist() == [0.3, 0.5] and hi.tolist() == [0.5, 0.7]
