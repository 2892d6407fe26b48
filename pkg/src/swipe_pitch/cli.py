"""Command-line interface.

Exit codes: 0 success, 1 runtime failure (unreadable files, divergence),
2 usage error (bad flags, hop mismatch, out-of-range values).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, TextIO

import numpy as np

from . import default_bank
from .audio_io import (
    AudioBuffer,
    WavFormatError,
    add_noise,
    constant_curve,
    glide_curve,
    read_annotation,
    read_track,
    read_wav,
    synth_signal,
    vibrato_curve,
    write_annotation,
    write_track,
    write_wav,
)
from .encoder import (
    AugmentConfig,
    TrainConfig,
    TrainingDiverged,
    load_weights,
    save_weights,
    track_with_encoder,
    train_self_supervised,
    train_supervised,
)
from .kernels import KernelBank, kernel_for
from .metrics import CSV_HEADER, HOP_TOLERANCE, evaluate, evaluate_with_noise_sweep
from .scorer import ScorerConfig, score_frames
from .tracker import PitchTrack, track

log = logging.getLogger("swipe_pitch")

DEFAULT_HOP = 0.01
ANNOTATION_SUFFIX = ".f0.txt"


class UsageError(Exception):
    """Invalid invocation; mapped to exit code 2."""


# ---------------------------------------------------------------------------
# shared configuration
# ---------------------------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("analysis options")
    g.add_argument("--hop", type=float, default=None,
                   help=f"frame hop in seconds (default {DEFAULT_HOP}; eval defaults to the annotation hop)")
    g.add_argument("--f-min", type=float, default=27.5, help="lowest pitch candidate in Hz")
    g.add_argument("--f-max", type=float, default=8055.0, help="highest pitch candidate in Hz")
    g.add_argument("--bins-per-semitone", type=int, default=3)
    g.add_argument("--scale", choices=["mel", "erb"], default="mel", help="frequency grid warping")
    g.add_argument("--variant", choices=["swipe", "swipe_prime"], default="swipe_prime")
    g.add_argument("--max-window", type=int, default=None, metavar="SAMPLES",
                   help="cap on the analysis window (power of two)")
    g.add_argument("--no-interp", action="store_true", help="use one window per candidate, no blending")
    g.add_argument("--refine", action=argparse.BooleanOptionalAction, default=True,
                   help="parabolic peak refinement")
    g.add_argument("--threshold", type=float, default=0.0, help="voicing score threshold")
    g.add_argument("--sample-rate", type=int, default=None,
                   help="require input audio at this rate")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def _bank(args) -> KernelBank:
    scale = "mel_slaney" if args.scale == "mel" else "erb"
    try:
        return default_bank(args.variant, scale, args.f_min, args.f_max, args.bins_per_semitone)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _scorer_cfg(args, hop: Optional[float] = None) -> ScorerConfig:
    try:
        return ScorerConfig(args.max_window, not args.no_interp,
                            hop if hop is not None else (args.hop or DEFAULT_HOP))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read_audio(path: str, args) -> AudioBuffer:
    buf = read_wav(path)
    if args.sample_rate is not None and buf.sample_rate != args.sample_rate:
        raise UsageError(f"{path}: sample rate {buf.sample_rate} Hz, expected {args.sample_rate} Hz")
    return buf


def _warn_window_cap(args, bank: KernelBank, sample_rate: int) -> None:
    if args.max_window is None:
        return
    ideal = bank.ideal_window_samples(sample_rate)
    limited = bank.grid.candidates[ideal > args.max_window]
    if len(limited):
        print(f"warning: --max-window {args.max_window} is shorter than the ideal window of candidates "
              f"below {limited.max():.1f} Hz; low-pitch estimates are less reliable", file=sys.stderr)


@contextmanager
def _open_out(path: str) -> Iterator[TextIO]:
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _estimate(buf: AudioBuffer, bank: KernelBank, cfg: ScorerConfig, args) -> PitchTrack:
    if getattr(args, "weights", None):
        enc = load_weights(args.weights)
        if enc.in_bins != len(bank.grid):
            raise UsageError(f"{args.weights}: encoder expects {enc.in_bins} candidates, "
                             f"the grid has {len(bank.grid)}")
        return track_with_encoder(buf, bank, cfg, enc, args.refine,
                                  args.entropy_threshold, args.threshold)
    return track(buf, bank, cfg, args.refine, args.threshold)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    bank = _bank(args)
    cfg = _scorer_cfg(args)
    buf = _read_audio(args.wav, args)
    _warn_window_cap(args, bank, buf.sample_rate)
    tr = _estimate(buf, bank, cfg, args)
    with _open_out(args.out) as fh:
        write_track(fh, tr)
    log.info("%d frames, %d voiced", len(tr), int(tr.voiced.sum()))
    return 0


def cmd_eval(args) -> int:
    ann = read_annotation(args.annotation)
    is_wav = Path(args.prediction).suffix.lower() == ".wav"
    if args.hop is not None and abs(args.hop - ann.hop_seconds) > HOP_TOLERANCE * ann.hop_seconds:
        raise UsageError(f"hop mismatch: --hop {args.hop:g} s vs annotation {ann.hop_seconds:g} s")
    snrs = _parse_snrs(args.snr) if args.snr else []

    if is_wav:
        bank = _bank(args)
        cfg = _scorer_cfg(args, ann.hop_seconds)
        buf = _read_audio(args.prediction, args)
        _warn_window_cap(args, bank, buf.sample_rate)

        def estimator(b: AudioBuffer) -> PitchTrack:
            return _estimate(b, bank, cfg, args)

        results = evaluate_with_noise_sweep(buf, ann, estimator, snrs, args.seed)
    else:
        if snrs:
            raise UsageError("--snr needs a WAV input, not a precomputed track")
        tr = read_track(args.prediction)
        if abs(tr.hop_seconds - ann.hop_seconds) > HOP_TOLERANCE * ann.hop_seconds:
            raise UsageError(f"hop mismatch: track {tr.hop_seconds:g} s vs annotation {ann.hop_seconds:g} s")
        results = [(None, evaluate(tr, ann))]

    print(CSV_HEADER)
    for snr, rep in results:
        print(rep.csv_row(snr))
    if not args.quiet:
        for snr, rep in results:
            title = "clean" if snr is None else f"SNR {snr:g} dB"
            print(f"[{title}]\n{rep.describe()}", file=sys.stderr)
    return 0


def _parse_snrs(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--snr expects comma-separated numbers, got {text!r}") from None


def _curve(args, f0: float) -> np.ndarray:
    if args.curve == "constant":
        return constant_curve(f0, args.duration, args.sr)
    if args.curve == "glide":
        return glide_curve(f0, args.f_end, args.duration, args.sr)
    return vibrato_curve(f0, args.depth_cents, args.rate, args.duration, args.sr)


def _write_clip(wav: Path, ann_path: Path, f0: float, args, seed: int) -> None:
    buf, ann = synth_signal(args.kind, _curve(args, f0), args.sr, args.amplitude, args.hop or DEFAULT_HOP)
    if args.snr is not None:
        buf = add_noise(buf, args.snr, seed)
    write_wav(wav, buf, args.encoding)
    write_annotation(ann_path, ann)


def cmd_synth(args) -> int:
    if args.duration <= 0 or args.sr <= 0:
        raise UsageError("--duration and --sr must be positive")
    if args.curve == "glide" and args.f_end is None:
        raise UsageError("--curve glide needs --f-end")
    lo, hi = args.f0_range
    if args.corpus:
        if not 0 < lo < hi < args.sr / 2:
            raise UsageError(f"--f0-range must satisfy 0 < low < high < {args.sr / 2:g}")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(args.seed)
        f0s = np.exp(rng.uniform(math.log(lo), math.log(hi), args.corpus))
        for i, f0 in enumerate(f0s):
            stem = out / f"clip_{i:04d}"
            try:
                _write_clip(stem.with_suffix(".wav"), Path(f"{stem}{ANNOTATION_SUFFIX}"), float(f0), args,
                            args.seed + i)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        print(f"wrote {args.corpus} clips to {out}", file=sys.stderr)
        return 0

    if args.f0 is None:
        raise UsageError("--f0 is required for a single clip (or use --corpus N)")
    wav = Path(args.out)
    ann_path = Path(args.annotation) if args.annotation else wav.with_suffix(ANNOTATION_SUFFIX)
    try:
        _write_clip(wav, ann_path, args.f0, args, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return 0


def _load_corpus(directory: str, need_annotations: bool):
    wavs = sorted(Path(directory).glob("*.wav"))
    if not wavs:
        raise UsageError(f"{directory}: no .wav files")
    bufs = [read_wav(w) for w in wavs]
    if not need_annotations:
        return bufs
    anns = []
    for w in wavs:
        candidates = [w.with_suffix(ANNOTATION_SUFFIX), w.with_suffix(".csv"), w.with_suffix(".txt")]
        found = next((c for c in candidates if c.exists()), None)
        if found is None:
            raise UsageError(f"supervised training needs an annotation next to {w} "
                             f"(expected {w.with_suffix(ANNOTATION_SUFFIX).name})")
        anns.append(read_annotation(found))
    return list(zip(bufs, anns))


def cmd_train(args) -> int:
    bank = _bank(args)
    cfg = _scorer_cfg(args)
    try:
        tcfg = TrainConfig(
            lr=args.lr, batch_size=args.batch_size, steps=args.steps,
            shift_range_semitones=args.shift_range, w_equiv=args.w_equiv, w_sce=args.w_sce,
            w_inv=args.w_inv, sigma_bins=args.sigma_bins, seed=args.seed,
            augment=AugmentConfig(snr_range_db=tuple(args.aug_snr)),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    def progress(step, loss, parts):
        if step % args.log_every == 0 or step == tcfg.steps - 1:
            detail = " ".join(f"{k}={v:.4f}" for k, v in parts.items())
            print(f"step {step:5d} loss {loss:.5f} {detail}", file=sys.stderr)

    corpus = _load_corpus(args.corpus_dir, args.mode == "sup")
    try:
        if args.mode == "ssl":
            enc, history = train_self_supervised(corpus, bank, cfg, tcfg, progress)
        else:
            enc, history = train_supervised(corpus, bank, cfg, tcfg, progress)
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 1
    save_weights(enc, args.out)
    loss_csv = Path(args.loss_csv) if args.loss_csv else Path(args.out).with_suffix(".loss.csv")
    with open(loss_csv, "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for i, v in enumerate(history):
            fh.write(f"{i},{v:.8f}\n")
    print(f"wrote {args.out} and {loss_csv}", file=sys.stderr)
    return 0


def cmd_kernels(args) -> int:
    bank = _bank(args)
    grid = bank.grid
    if args.index:
        if not float(args.candidate).is_integer() or not 0 <= int(args.candidate) < len(grid):
            raise UsageError(f"candidate index must be an integer in [0, {len(grid) - 1}]")
        f_c = float(grid.candidates[int(args.candidate)])
    else:
        f_c = float(args.candidate)
        if not grid.f_min <= f_c <= grid.f_max:
            raise UsageError(f"candidate {f_c:g} Hz is outside the pitch grid "
                             f"[{grid.f_min:g}, {grid.f_max:g}] Hz")
    try:
        k = kernel_for(f_c, bank.freq_grid, bank.variant)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with _open_out(args.out) as fh:
        fh.write("frequency_hz,value\n")
        for f, v in zip(bank.freq_grid.freqs, k):
            fh.write(f"{f:.6f},{v:.9f}\n")
    return 0


def cmd_scores(args) -> int:
    bank = _bank(args)
    cfg = _scorer_cfg(args)
    buf = _read_audio(args.wav, args)
    duration = len(buf) / buf.sample_rate
    if not 0 <= args.time <= duration:
        raise UsageError(f"time {args.time:g} s is outside the file (0 to {duration:g} s)")
    _warn_window_cap(args, bank, buf.sample_rate)
    z = score_frames(buf, [int(round(args.time * buf.sample_rate))], bank, cfg)[0]
    with _open_out(args.out) as fh:
        fh.write("candidate_hz,score\n")
        for f, v in zip(bank.grid.candidates, z):
            fh.write(f"{f:.6f},{v:.9f}\n")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="swipe-pitch", description="SWIPE pitch estimation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="estimate a pitch track from a WAV file")
    p.add_argument("wav")
    p.add_argument("out", help="output CSV ('-' for stdout)")
    p.add_argument("--weights", help="apply a trained encoder before peak picking")
    p.add_argument("--entropy-threshold", type=float, default=None,
                   help="with --weights: voiced iff output entropy (nats) is below this")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("eval", parents=[common], help="score a track (CSV) or a WAV against an annotation")
    p.add_argument("prediction", help="track CSV from 'analyze', or a WAV to analyze first")
    p.add_argument("annotation")
    p.add_argument("--snr", help="comma-separated SNRs in dB for a noise sweep (WAV input only)")
    p.add_argument("--weights")
    p.add_argument("--entropy-threshold", type=float, default=None)
    p.add_argument("-q", "--quiet", action="store_true", help="omit the human-readable report on stderr")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", parents=[common], help="write synthetic test signals with annotations")
    p.add_argument("out", help="WAV path, or a directory with --corpus")
    p.add_argument("--annotation", help="annotation path (default: <out>.f0.txt)")
    p.add_argument("--kind", choices=["sawtooth", "sine"], default="sawtooth")
    p.add_argument("--curve", choices=["constant", "glide", "vibrato"], default="constant")
    p.add_argument("--f0", type=float, help="(start/center) pitch in Hz")
    p.add_argument("--f-end", type=float, help="glide end pitch in Hz")
    p.add_argument("--depth-cents", type=float, default=50.0)
    p.add_argument("--rate", type=float, default=5.0, help="vibrato rate in Hz")
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--sr", type=int, default=44100, help="output sample rate")
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--snr", type=float, default=None, help="add white noise at this SNR (dB)")
    p.add_argument("--encoding", choices=["float32", "pcm16"], default="float32")
    p.add_argument("--corpus", type=int, default=0, metavar="N",
                   help="write N clips with log-uniform pitches instead of one")
    p.add_argument("--f0-range", type=float, nargs=2, default=(55.0, 1760.0), metavar=("LOW", "HIGH"))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train the Toeplitz encoder")
    p.add_argument("corpus_dir")
    p.add_argument("out", help="output weight file")
    p.add_argument("--mode", choices=["ssl", "sup"], default="ssl")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--shift-range", type=int, default=5, help="max pitch shift in semitones")
    p.add_argument("--w-equiv", type=float, default=1.0)
    p.add_argument("--w-sce", type=float, default=1.0)
    p.add_argument("--w-inv", type=float, default=1.0)
    p.add_argument("--sigma-bins", type=float, default=1.0)
    p.add_argument("--aug-snr", type=float, nargs=2, default=(0.0, 30.0), metavar=("LOW", "HIGH"))
    p.add_argument("--loss-csv", help="loss history path (default: <out>.loss.csv)")
    p.add_argument("--log-every", type=int, default=20)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("kernels", parents=[common], help="export one kernel as CSV")
    p.add_argument("candidate", type=float, help="candidate pitch in Hz (or index with --index)")
    p.add_argument("out")
    p.add_argument("--index", action="store_true")
    p.set_defaults(func=cmd_kernels)

    p = sub.add_parser("scores", parents=[common], help="export the scores of one frame as CSV")
    p.add_argument("wav")
    p.add_argument("time", type=float, help="frame center in seconds")
    p.add_argument("out")
    p.set_defaults(func=cmd_scores)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, WavFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
