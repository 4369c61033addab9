"""Command-line front end: ``train``, ``predict``, ``eval``, ``convert`` and ``synth``.

Every command reads the same flat configuration. Values come from the
optional ``--config`` file and are overridden by ``--key value`` flags; the
effective configuration is printed before the command runs. The
``KINEMOTION_THREADS`` environment variable caps the BLAS thread pool.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import checkpoint, metrics, training
from .codec import WIDTH, PoseCodec, decode_rotations, encode_rotations
from .config import FIELD_TYPES, ConfigError, load_config
from .data import (
    load_expmap_csv,
    load_expmap_dir,
    make_windows,
    parse_rows,
    read_expmap_csv,
    save_expmap_csv,
    synth_pendulum,
)
from .errors import KinemotionError
from .skeleton import SkeletonSpec, preset

COMMANDS = ("train", "predict", "eval", "convert", "synth")
REP_ALIASES = {"expmap": "axis_angle"}
DEFAULT_SKELETON = "human36"


class UsageError(KinemotionError):
    """Bad or missing command-line input."""


def _rep(name):
    return REP_ALIASES.get(name, name)


def resolve_skeleton(value) -> SkeletonSpec:
    if value.endswith(".json") or Path(value).is_file():
        return SkeletonSpec.load(value)
    return preset(value)


def load_dataset(cfg, skeleton=None):
    if cfg.synthetic:
        if cfg.synthetic != "pendulum":
            raise UsageError(f"--synthetic supports 'pendulum', not {cfg.synthetic!r}")
        return synth_pendulum(cfg.bones, cfg.frames, cfg.freq, cfg.amplitude, cfg.seed, cfg.frame_rate)
    if not cfg.dataset:
        raise UsageError("no data: pass --dataset PATH (or --synthetic pendulum)")
    path = Path(cfg.dataset)
    if not path.exists():
        raise UsageError(f"--dataset {cfg.dataset}: no such file or directory")
    skeleton = skeleton or resolve_skeleton(cfg.skeleton or DEFAULT_SKELETON)
    if path.is_dir():
        return load_expmap_dir(path, skeleton, cfg.frame_rate, cfg.step, cfg.pattern)
    return load_expmap_csv(path, skeleton, cfg.frame_rate, cfg.step)


def _require(value, flag):
    if not value:
        raise UsageError(f"missing {flag}")
    return value


def _load_model(path):
    ckpt = checkpoint.load(_require(path, "--checkpoint"))
    skeleton = SkeletonSpec.from_dict(ckpt.extra["skeleton"])
    mask = np.asarray(ckpt.extra["mask"], dtype=bool)
    return ckpt, skeleton, PoseCodec(skeleton, ckpt.hyper.representation, mask)


# --------------------------------------------------------------------------
# commands


def cmd_train(cfg, out):
    dataset = load_dataset(cfg)
    run_dir = Path(cfg.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(cfg.echo())
    result = training.train(dataset, cfg.hyper(), cfg.train_config(), out_dir=run_dir)
    for it, loss, lr in result.curve:
        print(f"iter {it:>7d}  loss {loss:.6g}  lr {lr:.6g}", file=out)
    print(f"best loss {result.best_loss:.6g}", file=out)
    for name, path in result.files.items():
        print(f"{name}: {path}", file=out)


def cmd_predict(cfg, out):
    ckpt, skeleton, codec = _load_model(cfg.checkpoint)
    if not codec.rotational:
        raise UsageError("predict writes rotations; this checkpoint models joint coordinates")
    if cfg.steps < 1:
        raise UsageError("--steps must be >= 1")
    observed = read_expmap_csv(_require(cfg.input, "--input"), skeleton)
    if len(observed) < max(3, ckpt.hyper.input_frames):
        raise UsageError(f"--input needs at least {max(3, ckpt.hyper.input_frames)} frames")
    pred = training.predict(ckpt.params, ckpt.hyper, codec, observed, cfg.steps)
    save_expmap_csv(_require(cfg.output, "--output"), pred)
    print(f"wrote {len(pred)} frames to {cfg.output}", file=out)


def _window_errors(kind, cfg, skeleton, pred, target):
    """Per-frame errors averaged over windows."""
    if kind == "mae":
        per = [metrics.mae(p, t, cfg.include_root, cfg.mae_form, cfg.mae_reduction) for p, t in zip(pred, target)]
    else:
        per = [metrics.mpe(p, t, skeleton) for p, t in zip(pred, target)]
    return np.mean(per, axis=0)


def cmd_eval(cfg, out):
    model = _load_model(cfg.checkpoint) if cfg.checkpoint else None
    skeleton = model[1] if model else None
    dataset = load_dataset(cfg, skeleton)
    skeleton = dataset.skeleton
    hyper = model[0].hyper if model else cfg.hyper()
    t, T = max(3, hyper.input_frames), cfg.steps
    kinds = {"both": ("mae", "mpe"), "mae": ("mae",), "mpe": ("mpe",)}.get(cfg.metric)
    if kinds is None:
        raise UsageError(f"--metric must be mae, mpe or both, not {cfg.metric!r}")
    rows = []
    for name, seq in zip(dataset.names or [str(i) for i in range(len(dataset))], dataset.sequences):
        single = type(dataset)([seq], skeleton, dataset.frame_rate)
        windows = make_windows(single, t, T, cfg.stride)
        if not windows:
            continue
        observed = np.stack([w[0].rotations for w in windows])
        target = np.stack([w[1].rotations for w in windows])
        methods = {"zero_velocity": np.repeat(observed[:, -1:], T, axis=1)}
        if model:
            ckpt, _, codec = model
            vec = training.predict_vectors(ckpt.params, ckpt.hyper, codec, observed, T)
            methods["ahmr"] = vec if not codec.rotational else codec.decode(vec)
        for method, pred in methods.items():
            for kind in kinds:
                if pred.ndim == 3:  # joint coordinates
                    if kind == "mae":
                        continue
                    want = np.stack([codec.positions(r) for r in target])
                    per_frame = np.linalg.norm(pred.reshape(want.shape) - want, axis=-1).mean(axis=(0, 2))
                else:
                    per_frame = _window_errors(kind, cfg, skeleton, pred, target)
                for ms, value in metrics.at_horizons(per_frame, dataset.frame_rate).items():
                    rows.append({"method": method, "metric": kind, "action": name, "horizon_ms": ms, "value": value})
    if not rows:
        raise UsageError(f"no sequence is long enough for {t}+{T} frame windows")
    if cfg.metrics:
        metrics.write_metrics_csv(rows, cfg.metrics)
    out.write(metrics.format_table(rows))


def convert_rows(rows, from_rep, to_rep, skeleton=None):
    """Re-encode ``translation + per-bone parameter`` rows in another representation."""
    from_rep, to_rep = _rep(from_rep), _rep(to_rep)
    for rep in (from_rep, to_rep):
        if rep not in WIDTH:
            raise UsageError(f"unknown representation {rep!r}")
    if from_rep == "coords" and to_rep != "coords":
        raise UsageError("joint coordinates do not determine bone rotations; cannot convert from coords")
    if to_rep == "coords" and from_rep != "coords" and skeleton is None:
        raise UsageError("converting to coords needs --skeleton")
    rows = np.atleast_2d(rows)
    if from_rep == to_rep:
        return rows.copy()
    width = WIDTH[from_rep]
    trans, body = rows[:, :3], rows[:, 3:]
    if body.shape[1] % width:
        raise UsageError(f"row width {rows.shape[1]} is not 3 + {width} * bones")
    rot = decode_rotations(body.reshape(len(rows), -1, width), from_rep)
    if to_rep == "coords":
        if rot.shape[1] != len(skeleton):
            raise UsageError(f"{rot.shape[1]} bones in the input, {len(skeleton)} in the skeleton")
        new = PoseCodec(skeleton, "coords").encode(rot)
    else:
        new = encode_rotations(rot, to_rep).reshape(len(rows), -1)
    return np.concatenate([trans, new], axis=1)


def cmd_convert(cfg, out):
    skeleton = resolve_skeleton(cfg.skeleton) if cfg.skeleton else None
    src = _require(cfg.input, "--input")
    rows = convert_rows(parse_rows(Path(src).read_text(), source=src), cfg.from_rep, cfg.to_rep, skeleton)
    np.savetxt(_require(cfg.output, "--output"), rows, delimiter=",", fmt="%.17g")
    print(f"wrote {len(rows)} rows ({_rep(cfg.from_rep)} -> {_rep(cfg.to_rep)}) to {cfg.output}", file=out)


def cmd_synth(cfg, out):
    dataset = synth_pendulum(cfg.bones, cfg.frames, cfg.freq, cfg.amplitude, cfg.seed, cfg.frame_rate)
    target = Path(_require(cfg.output, "--output"))
    save_expmap_csv(target, dataset.sequences[0])
    skel_path = target.with_suffix(".skeleton.json")
    dataset.skeleton.save(skel_path)
    print(f"wrote {len(dataset.sequences[0])} frames to {target} and the skeleton to {skel_path}", file=out)


HANDLERS = {"train": cmd_train, "predict": cmd_predict, "eval": cmd_eval, "convert": cmd_convert, "synth": cmd_synth}


# --------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="kinemotion", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HANDLERS[name].__doc__ or name)
        p.add_argument("--config", help="flat key = value file")
        for key in FIELD_TYPES:
            flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
            p.add_argument(*flags, dest=key, default=None, metavar="VALUE")
    return parser


def _threads():
    raw = os.environ.get("KINEMOTION_THREADS", "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"KINEMOTION_THREADS must be an integer, not {raw!r}") from None
    if n < 1:
        raise UsageError("KINEMOTION_THREADS must be >= 1")
    return n


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k in FIELD_TYPES and v is not None}
    try:
        cfg = load_config(args.config, overrides)
        out.write(f"# kinemotion {args.command}: effective config\n{cfg.echo()}")
        with threadpool_limits(_threads()):
            HANDLERS[args.command](cfg, out)
    except (UsageError, ConfigError) as exc:
        print(f"kinemotion {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (KinemotionError, ValueError, OSError) as exc:
        print(f"kinemotion {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
