import numpy as np
import pytest

from swipe_pitch.audio_io import read_annotation, read_track, read_wav
from swipe_pitch.cli import main
from swipe_pitch.encoder import load_weights


@pytest.fixture()
def clip(tmp_path):
    wav = tmp_path / "a.wav"
    assert main(["synth", str(wav), "--f0", "220", "--duration", "0.5"]) == 0
    return wav, tmp_path / "a.f0.txt"


def test_help_and_unknown_flags(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "x.wav", "y.csv", "--no-such-flag"])
    assert exc.value.code == 2


def test_synth_constant(clip):
    wav, ann = clip
    a = read_annotation(ann)
    assert np.all(a.f0 == 220) and len(a) == 50
    assert read_wav(wav).sample_rate == 44100


def test_synth_vibrato(tmp_path):
    wav = tmp_path / "v.wav"
    assert main(["synth", str(wav), "--curve", "vibrato", "--f0", "440", "--depth-cents", "50",
                 "--rate", "5", "--duration", "1"]) == 0
    f0 = read_annotation(tmp_path / "v.f0.txt").f0
    assert f0.min() >= 427.47 and f0.max() <= 452.90
    assert f0.max() - f0.min() > 20


def test_synth_corpus_reproducible(tmp_path):
    for d in ("c1", "c2"):
        assert main(["synth", str(tmp_path / d), "--corpus", "3", "--duration", "0.2", "--seed", "5"]) == 0
    names = sorted(p.name for p in (tmp_path / "c1").iterdir())
    assert len(names) == 6
    for n in names:
        assert (tmp_path / "c1" / n).read_bytes() == (tmp_path / "c2" / n).read_bytes()


def test_synth_invalid(tmp_path):
    assert main(["synth", str(tmp_path / "x.wav"), "--f0", "30000"]) == 2
    assert main(["synth", str(tmp_path / "x.wav")]) == 2


def test_analyze_and_eval(clip, tmp_path, capsys):
    wav, ann = clip
    out = tmp_path / "a.csv"
    assert main(["analyze", str(wav), str(out)]) == 0
    assert len(read_track(out)) == 50
    capsys.readouterr()
    assert main(["eval", str(out), str(ann)]) == 0
    captured = capsys.readouterr()
    rows = captured.out.strip().splitlines()
    assert rows[1].startswith("clean,1.000000")
    assert "100.00%" in captured.err


def test_eval_snr_sweep(clip, capsys):
    wav, ann = clip
    assert main(["eval", str(wav), str(ann), "--snr", "5,0,-5,-10", "-q"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert len(rows) == 6
    assert [r.split(",")[0] for r in rows[1:]] == ["clean", "5", "0", "-5", "-10"]


def test_eval_hop_mismatch(clip, tmp_path):
    wav, ann = clip
    out = tmp_path / "b.csv"
    assert main(["analyze", str(wav), str(out), "--hop", "0.02"]) == 0
    assert main(["eval", str(out), str(ann)]) == 2
    assert main(["eval", str(wav), str(ann), "--hop", "0.02"]) == 2


def test_max_window_warning(clip, capsys):
    wav, _ = clip
    assert main(["analyze", str(wav), "-", "--max-window", "2048"]) == 0
    assert "less reliable" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["analyze", str(tmp_path / "nope.wav"), "-"]) == 1


def test_bad_config(clip):
    wav, _ = clip
    assert main(["analyze", str(wav), "-", "--max-window", "3000"]) == 2
    assert main(["analyze", str(wav), "-", "--f-min", "500", "--f-max", "100"]) == 2
    assert main(["analyze", str(wav), "-", "--sample-rate", "16000"]) == 2


def test_kernels_and_scores(clip, tmp_path):
    wav, _ = clip
    k = tmp_path / "k.csv"
    assert main(["kernels", "330", str(k)]) == 0
    lines = k.read_text().splitlines()
    assert lines[0] == "frequency_hz,value" and len(lines) == 1025
    assert main(["kernels", "9000", str(k)]) == 2
    assert main(["kernels", "--index", "400", str(k)]) == 2
    s = tmp_path / "s.csv"
    assert main(["scores", str(wav), "0.25", str(s)]) == 0
    vals = np.loadtxt(s, delimiter=",", skiprows=1)
    assert vals.shape == (295, 2) and np.all(np.abs(vals[:, 1]) <= 1)
    assert main(["scores", str(wav), "3.0", str(s)]) == 2


@pytest.fixture()
def tiny_corpus(tmp_path):
    d = tmp_path / "corpus"
    assert main(["synth", str(d), "--corpus", "2", "--duration", "0.3", "--sr", "16000", "--hop", "0.05",
                 "--f0-range", "100", "400"]) == 0
    return d


TINY = ["--steps", "3", "--batch-size", "2", "--f-min", "55", "--f-max", "2000", "--hop", "0.05"]


def test_train_ssl_writes_weights_and_history(tiny_corpus, tmp_path):
    w = tmp_path / "w.swte"
    assert main(["train", str(tiny_corpus), str(w), *TINY]) == 0
    assert load_weights(w).n_params == 647
    hist = np.loadtxt(tmp_path / "w.loss.csv", delimiter=",", skiprows=1)
    assert hist.shape == (3, 2)


def test_train_lr_zero_constant(tiny_corpus, tmp_path):
    w = tmp_path / "w.swte"
    assert main(["train", str(tiny_corpus), str(w), *TINY, "--mode", "sup", "--lr", "0",
                 "--batch-size", "64"]) == 0
    hist = np.loadtxt(tmp_path / "w.loss.csv", delimiter=",", skiprows=1)[:, 1]
    # a batch of 64 draws from 12 frames; lr 0 keeps the taps fixed
    assert np.ptp(hist) < 0.5 * hist.mean()
    start = load_weights(w).taps
    assert np.argmax(start) == 323


def test_train_sup_needs_annotations(tiny_corpus, tmp_path):
    for p in tiny_corpus.glob("*.f0.txt"):
        p.unlink()
    assert main(["train", str(tiny_corpus), str(tmp_path / "w.swte"), *TINY, "--mode", "sup"]) == 2


def test_analyze_with_weights(clip, tiny_corpus, tmp_path):
    wav, _ = clip
    w = tmp_path / "w.swte"
    assert main(["train", str(tiny_corpus), str(w), "--steps", "2", "--batch-size", "2", "--hop", "0.05",
                 "--mode", "sup", "--lr", "0"]) == 0
    out = tmp_path / "enc.csv"
    assert main(["analyze", str(wav), str(out), "--weights", str(w)]) == 0
    tr = read_track(out)
    assert abs(1200 * np.log2(np.median(tr.f0_hz) / 220)) < 50
