"""Command-line entry point.

Subcommands: ``diarize``, ``score``, ``sweep``, ``fuse``, ``heatmap`` and
``synth``. Exit status is 0 on success, 1 if any recording failed and 2 on
usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .affinity import check_affinity, fuse_affinities, pairwise_affinity
from .model import (Hyperparams, ParseError, Recording, SpeakerTurn, atomic_write_text,
                    format_rttm, read_embeddings, read_matrix, read_rttm, write_embeddings,
                    write_matrix, write_rttm)
from .pipeline import (DiarizationResult, cluster_matrix, fit_pooled_whitening,
                       labels_to_turns, run_baseline, run_ssa)
from .preprocess import WhiteningTransform
from .scoring import DerReport, aggregate, compute_der
from .synth import SynthSpec, generate_recording

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# flag name -> Hyperparams field
HP_FLAGS = {
    "num-speakers": ("target_speakers", int),
    "init-threshold": ("init_threshold", float),
    "stop-threshold": ("stop_threshold", float),
    "lambda": ("lam", float),
    "gamma": ("gamma", float),
    "eta": ("eta", float),
    "kc": ("k_c", int),
    "lr": ("learning_rate", float),
    "max-epochs": ("max_epochs", int),
    "iterations": ("num_iterations", int),
    "pca-dim": ("pca_dim", int),
    "seed": ("seed", int),
}


def _err(msg: str) -> None:
    print(f"ssahc: {msg}", file=sys.stderr)


def read_config_file(path) -> dict[str, str]:
    """``key=value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("_", "-")] = value
    return out


def build_hyperparams(args) -> Hyperparams:
    """Defaults, overridden by the config file, overridden by flags."""
    values: dict = {}
    config = read_config_file(args.config) if getattr(args, "config", None) else {}
    for flag, (name, conv) in HP_FLAGS.items():
        if flag in config:
            try:
                values[name] = conv(config[flag])
            except ValueError:
                raise UsageError(f"config value for {flag} is not a valid {conv.__name__}")
    unknown = set(config) - set(HP_FLAGS) - {"whitening", "jobs", "collar"}
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for flag, (name, _) in HP_FLAGS.items():
        v = getattr(args, flag.replace("-", "_"), None)
        if v is not None:
            values[name] = v
    try:
        return Hyperparams(**values)
    except ValueError as e:
        raise UsageError(str(e))


def _config_value(args, key, default):
    v = getattr(args, key.replace("-", "_"), None)
    if v is not None:
        return v
    if getattr(args, "config", None):
        config = read_config_file(args.config)
        if key in config:
            return config[key]
    return default


def _collect(paths, suffix: str) -> list[Path]:
    out: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(p.glob(f"*{suffix}")))
        else:
            out.append(p)
    return out


def _load_recordings(paths) -> tuple[list[Recording], int]:
    recs, failures = [], 0
    seen: set[str] = set()
    for p in _collect(paths, ".xvec"):
        try:
            rec = read_embeddings(p)
        except (OSError, ParseError) as e:
            _err(f"{p}: {e}")
            failures += 1
            continue
        if rec.id in seen:
            raise UsageError(f"duplicate recording id {rec.id!r} ({p})")
        seen.add(rec.id)
        recs.append(rec)
    return recs, failures


def _load_turns(paths) -> dict[str, list[SpeakerTurn]]:
    by_rec: dict[str, list[SpeakerTurn]] = {}
    for p in _collect(paths, ".rttm"):
        for t in read_rttm(p):
            by_rec.setdefault(t.recording_id, []).append(t)
    return by_rec


def _whitening(args, recs: list[Recording]) -> WhiteningTransform:
    spec = _config_value(args, "whitening", "pooled")
    if spec == "pooled":
        return fit_pooled_whitening(recs)
    return WhiteningTransform.load(spec)


def _speaker_count(hp: Hyperparams, refs: Optional[dict], rec_id: str) -> Hyperparams:
    if refs is None:
        return hp
    if rec_id not in refs:
        raise ValueError(f"no reference turns for {rec_id}")
    return replace(hp, target_speakers=len({t.speaker for t in refs[rec_id]}))


def _diarize_one(job):
    rec, whitening, hp, baseline = job
    try:
        if baseline:
            return run_baseline(rec, whitening, hp), None
        return run_ssa(rec, whitening, hp), None
    except ValueError as e:
        return None, f"{rec.id}: {e}"


def _run_all(jobs_list, n_jobs: int):
    if n_jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(_diarize_one, jobs_list))
    return [_diarize_one(j) for j in jobs_list]


def _history_csv(result: DiarizationResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "epoch", "loss", "loss_ratio"])
    for row in result.history:
        w.writerow([row[0], row[1], repr(row[2]), repr(row[3])])
    return buf.getvalue()


def _jobs(args) -> int:
    n = int(_config_value(args, "jobs", 1))
    if n < 1:
        raise UsageError("--jobs must be >= 1")
    return n


# ---------------------------------------------------------------------------
# subcommands


def cmd_diarize(args) -> int:
    hp = build_hyperparams(args)
    n_jobs = _jobs(args)
    recs, failures = _load_recordings(args.inputs)
    if not recs:
        _err("no readable recordings")
        return EXIT_FAILED
    refs = _load_turns([args.num_speakers_from]) if args.num_speakers_from else None
    try:
        whitening = _whitening(args, recs)
    except (OSError, ParseError, ValueError) as e:
        raise UsageError(f"whitening: {e}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if _config_value(args, "whitening", "pooled") == "pooled":
        whitening.save(out / "whitening.txt")

    jobs_list = []
    for rec in recs:
        try:
            jobs_list.append((rec, whitening, _speaker_count(hp, refs, rec.id), args.baseline))
        except ValueError as e:
            _err(f"{rec.id}: {e}")
            failures += 1
    for (rec, *_), (result, error) in zip(jobs_list, _run_all(jobs_list, n_jobs)):
        if error is not None:
            _err(error)
            failures += 1
            continue
        write_rttm(result.turns, out / f"{rec.id}.rttm")
        atomic_write_text(out / f"{rec.id}.report.json", result.report())
        if args.trace_merges:
            atomic_write_text(out / f"{rec.id}.merges.txt",
                              "".join(m.format() + "\n" for m in result.merges))
        if args.emit_history:
            atomic_write_text(out / f"{rec.id}.history.csv", _history_csv(result))
        if args.emit_affinity:
            write_matrix(result.affinity, out / f"{rec.id}.affinity.txt")
    return EXIT_FAILED if failures else EXIT_OK


def score_corpus(refs: dict[str, list[SpeakerTurn]], hyps: dict[str, list[SpeakerTurn]],
                 collar: float, ignore_overlap: bool) -> list[tuple[str, DerReport]]:
    return [(rid, compute_der(refs[rid], hyps.get(rid, []), collar, ignore_overlap))
            for rid in sorted(refs)]


def format_scores(rows: list[tuple[str, DerReport]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["recording", "missed", "false_alarm", "confusion", "scored", "der"])
    for rid, r in rows + [("ALL", aggregate(r for _, r in rows))]:
        w.writerow([rid] + [f"{v:.3f}" for v in (r.missed, r.false_alarm, r.confusion,
                                                 r.scored)] + [f"{r.der:.2f}"])
    return buf.getvalue()


def cmd_score(args) -> int:
    collar = float(_config_value(args, "collar", 0.25))
    try:
        refs, hyps = _load_turns(args.ref), _load_turns(args.hyp)
    except (OSError, ParseError) as e:
        _err(str(e))
        return EXIT_FAILED
    if not refs:
        _err("no reference turns")
        return EXIT_FAILED
    for rid in sorted(set(hyps) - set(refs)):
        _err(f"{rid}: hypothesis has no reference, skipped")
    try:
        rows = score_corpus(refs, hyps, collar, not args.score_overlap)
    except ValueError as e:
        _err(str(e))
        return EXIT_FAILED
    text = format_scores(rows)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.thresholds or not args.gammas:
        raise UsageError("sweep needs at least one threshold and one gamma")
    hp = build_hyperparams(args)
    n_jobs = _jobs(args)
    collar = float(_config_value(args, "collar", 0.25))
    recs, failures = _load_recordings(args.inputs)
    if failures or not recs:
        _err("cannot sweep with unreadable recordings")
        return EXIT_FAILED
    refs = _load_turns(args.ref)
    missing = [r.id for r in recs if r.id not in refs]
    if missing:
        _err(f"no reference for: {', '.join(missing)}")
        return EXIT_FAILED
    whitening = _whitening(args, recs)
    counts = refs if args.oracle_speakers else None

    rows = []
    for th, g in sorted({(t, g) for t in args.thresholds for g in args.gammas}):
        point = replace(hp, init_threshold=th, gamma=g)
        jobs_list = [(r, whitening, _speaker_count(point, counts, r.id), False) for r in recs]
        ders = []
        for (rec, *_), (result, error) in zip(jobs_list, _run_all(jobs_list, n_jobs)):
            if error is not None:
                _err(f"threshold={th} gamma={g}: {error}")
                return EXIT_FAILED
            ders.append(compute_der(refs[rec.id], result.turns, collar).der)
        rows.append((th, g, point.lam, float(np.mean(ders))))

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "gamma", "lambda", "mean_der"])
    for th, g, lam, der in rows:
        w.writerow([repr(th), repr(g), repr(lam), f"{der:.4f}"])
    if args.out:
        atomic_write_text(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_fuse(args) -> int:
    try:
        a1 = check_affinity(read_matrix(args.first), tol=1e-9)
        a2 = check_affinity(read_matrix(args.second), tol=1e-9)
        fused = fuse_affinities(a1, a2)
    except (OSError, ValueError) as e:
        _err(str(e))
        return EXIT_FAILED
    write_matrix(fused, args.out)
    if args.recluster:
        hp = build_hyperparams(args)
        try:
            rec = read_embeddings(args.recluster)
            if rec.num_segments != fused.shape[0]:
                raise ValueError(f"{rec.id} has {rec.num_segments} segments, "
                                 f"matrix is {fused.shape[0]}")
            state, _ = cluster_matrix(fused, hp)
        except (OSError, ValueError) as e:
            _err(str(e))
            return EXIT_FAILED
        write_rttm(labels_to_turns(rec, state), args.rttm or Path(args.out).with_suffix(".rttm"))
    return EXIT_OK


def graymap(a: np.ndarray) -> bytes:
    """Binary 8-bit PGM with pixel = round(255 * (a + 1) / 2), halves rounded up."""
    a = np.clip(np.asarray(a, dtype=np.float64), -1.0, 1.0)
    pix = np.floor(255.0 * (a + 1.0) / 2.0 + 0.5).astype(np.uint8)
    h, w = pix.shape
    return f"P5\n{w} {h}\n255\n".encode() + pix.tobytes(order="C")


def _read_heatmap_input(path) -> np.ndarray:
    with open(path) as f:
        first = ""
        for line in f:
            if line.strip():
                first = line
                break
    if len(first.split()) == 1:
        return check_affinity(read_matrix(path), tol=1e-9)
    return pairwise_affinity(read_embeddings(path).embeddings)


def cmd_heatmap(args) -> int:
    try:
        a = _read_heatmap_input(args.input)
    except (OSError, ValueError) as e:
        _err(str(e))
        return EXIT_FAILED
    data = graymap(a)
    tmp = Path(args.out).with_name(f".{Path(args.out).name}.tmp")
    tmp.write_bytes(data)
    tmp.replace(args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        rec_id = args.id if args.count == 1 else f"{args.id}{i:03d}"
        try:
            spec = SynthSpec(num_speakers=args.num_speakers, duration=args.duration,
                             window=args.window, shift=args.shift, mean_turn=args.mean_turn,
                             separation=args.separation, within_noise=args.within_noise,
                             dim=args.dim, seed=args.seed + i, recording_id=rec_id,
                             nuisance_rank=args.nuisance_rank,
                             nuisance_scale=args.nuisance_scale,
                             turn_noise=args.turn_noise)
            rec, turns = generate_recording(spec)
        except ValueError as e:
            raise UsageError(str(e))
        write_embeddings(rec, out / f"{rec_id}.xvec")
        write_rttm(turns, out / f"{rec_id}.rttm")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_hp_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("clustering and training")
    g.add_argument("--num-speakers", type=int, help="known speaker count N*")
    g.add_argument("--init-threshold", type=float, help="AHC threshold for the initial clusters (0.1)")
    g.add_argument("--stop-threshold", type=float, help="final AHC threshold when N* is unknown (0.0)")
    g.add_argument("--lambda", type=float, help="nearest-neighbour merge penalty (0.1)")
    g.add_argument("--gamma", type=float, help="negative-pair weight of the triplet loss (0.5)")
    g.add_argument("--eta", type=float, help="stop training at this loss ratio (0.5)")
    g.add_argument("--kc", type=int, help="neighbour clusters in the merge penalty (1)")
    g.add_argument("--lr", type=float, help="Adam step size (0.001)")
    g.add_argument("--max-epochs", type=int, help="epoch cap per training round (50)")
    g.add_argument("--iterations", type=int, help="train/merge rounds (2)")
    g.add_argument("--pca-dim", type=int, help="representation dimension (10)")
    g.add_argument("--seed", type=int, help="random seed (0)")
    g.add_argument("--jobs", type=int, help="worker processes (1)")
    g.add_argument("--whitening", help="'pooled' or a whitening file (pooled)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssahc", description=(
        "Speaker diarization of embedding sequences by self-supervised "
        "agglomerative clustering."))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key=value file; flags take precedence")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("diarize", help="cluster XVEC recordings and write RTTM")
    p.add_argument("inputs", nargs="+", help="XVEC files or directories of *.xvec")
    p.add_argument("-o", "--out-dir", required=True)
    p.add_argument("--num-speakers-from", metavar="RTTM",
                   help="take N* per recording from reference RTTM file or directory")
    p.add_argument("--baseline", action="store_true",
                   help="plain cosine AHC on the PCA projection, no training")
    p.add_argument("--trace-merges", action="store_true", help="write <id>.merges.txt")
    p.add_argument("--emit-history", action="store_true", help="write <id>.history.csv")
    p.add_argument("--emit-affinity", action="store_true", help="write <id>.affinity.txt")
    _add_hp_flags(p)
    p.set_defaults(func=cmd_diarize)

    p = sub.add_parser("score", help="DER of hypothesis RTTM against reference RTTM")
    p.add_argument("--ref", nargs="+", required=True)
    p.add_argument("--hyp", nargs="+", required=True)
    p.add_argument("--collar", type=float, help="seconds each side of reference boundaries (0.25)")
    p.add_argument("--score-overlap", action="store_true",
                   help="also score regions with overlapping reference speakers")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sweep", help="mean DER over a grid of initial thresholds and gammas")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--ref", nargs="+", required=True, help="reference RTTM files or directories")
    p.add_argument("--thresholds", type=float, nargs="*", required=True)
    p.add_argument("--gammas", type=float, nargs="*", required=True)
    p.add_argument("--oracle-speakers", action="store_true",
                   help="use the reference speaker count as N*")
    p.add_argument("--collar", type=float)
    p.add_argument("-o", "--out")
    _add_hp_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fuse", help="average two affinity matrix files")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--recluster", metavar="XVEC",
                   help="also cluster the fused matrix and write RTTM for this recording")
    p.add_argument("--rttm", help="RTTM path for --recluster (default: OUT with .rttm)")
    _add_hp_flags(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("heatmap", help="render an affinity matrix as a PGM image")
    p.add_argument("input", help="affinity matrix file, or XVEC (cosine of embeddings)")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("synth", help="generate synthetic XVEC + RTTM pairs")
    d = SynthSpec()
    p.add_argument("-o", "--out-dir", required=True)
    p.add_argument("--id", default="synth")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--num-speakers", type=int, default=d.num_speakers)
    p.add_argument("--duration", type=float, default=d.duration)
    p.add_argument("--window", type=float, default=d.window)
    p.add_argument("--shift", type=float, default=d.shift)
    p.add_argument("--mean-turn", type=float, default=d.mean_turn)
    p.add_argument("--separation", type=float, default=d.separation)
    p.add_argument("--within-noise", type=float, default=d.within_noise)
    p.add_argument("--dim", type=int, default=d.dim)
    p.add_argument("--nuisance-rank", type=int, default=d.nuisance_rank)
    p.add_argument("--nuisance-scale", type=float, default=d.nuisance_scale)
    p.add_argument("--turn-noise", type=float, default=d.turn_noise)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        _err(str(e))
        return EXIT_USAGE
    except OSError as e:
        _err(str(e))
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
