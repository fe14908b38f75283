"""Command-line entry point: ``simulate``, ``inspect`` and ``downsample``.

Exit codes: 0 ok, 2 configuration error, 3 input/parse error,
4 regime error (``simulate --policy compare``).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .controller import ControllerConfig
from .errors import DepthOutOfRange, EmptyCloud, LyapOctError, PlyError, RegimeInvalid
from .octree import QualityModel, WorkloadModel, build_summary, downsample, quality, workload
from .pointcloud_io import read_ply, write_ply
from .queue_model import ServiceModel
from .simulator import FrameSource, Policy, SimConfig, compare_policies, run, summarize_frames

EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_REGIME = 4

SEED_ENV = "LYAPOCT_SEED"

# Every key a config file may set, with its default. The first eight mirror
# command-line flags; the rest are file-only model knobs.
DEFAULTS = {
    "policy": "proposed",
    "horizon": "1000",
    "V": "1000",
    "depths": "5,6,7",
    "service-rate": "8",
    "seed": "0",
    "frames": "synthetic:count=20000,seed=1,distribution=clustered",
    "out": "out",
    "quality-model": "voxel-ratio",
    "workload-model": "voxel-count",
    "workload-scale": "0.001",
    "tie-break": "lowest-depth",
    "max-depth": "",
    "service-kind": "constant",
    "jitter": "0",
}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_CONFIG, message)


def _normalize_key(key):
    key = key.strip().replace("_", "-")
    return "V" if key.lower() == "v" else key


def read_config_file(path) -> dict:
    """Parse a flat ``key=value`` file, or the ``config`` block of a manifest."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(EXIT_CONFIG, f"cannot read config {path}: {exc.strerror}") from None
    if text.lstrip().startswith("{"):
        try:
            items = json.loads(text)["config"].items()
        except (ValueError, KeyError, AttributeError):
            raise CliError(EXIT_CONFIG, f"{path}: JSON config must hold a 'config' object") from None
    else:
        items = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise CliError(EXIT_CONFIG, f"{path}:{lineno}: expected key=value")
            items.append((key, value))
    out = {}
    for key, value in items:
        key = _normalize_key(key)
        if key not in DEFAULTS:
            raise CliError(EXIT_CONFIG, f"{path}: unknown config key {key!r}")
        out[key] = str(value).strip()
    return out


def resolve_settings(args) -> dict:
    """Defaults, then config file, then flags, then the seed env override."""
    settings = dict(DEFAULTS)
    if args.config:
        settings.update(read_config_file(args.config))
    for key, attr in [("policy", "policy"), ("horizon", "horizon"), ("V", "V"),
                      ("depths", "depths"), ("service-rate", "service_rate"),
                      ("seed", "seed"), ("frames", "frames"), ("out", "out")]:
        value = getattr(args, attr)
        if value is not None:
            settings[key] = str(value)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None and env_seed.strip():
        settings["seed"] = env_seed.strip()
    return settings


def _as(kind, key, text):
    try:
        return kind(text)
    except ValueError:
        raise CliError(EXIT_CONFIG, f"bad value for {key}: {text!r}") from None


def build_config(settings: dict) -> SimConfig:
    depths = tuple(_as(int, "depths", d) for d in settings["depths"].split(",") if d.strip())
    policy_text = settings["policy"]
    if policy_text in ("proposed", "compare"):
        policy = Policy()
    elif policy_text.startswith("fixed:"):
        policy = Policy.fixed(_as(int, "policy", policy_text[len("fixed:"):]))
    else:
        raise CliError(EXIT_CONFIG, f"bad policy {policy_text!r}; expected proposed, fixed:<d> or compare")
    max_depth = settings["max-depth"]
    try:
        controller = ControllerConfig(
            V=_as(float, "V", settings["V"]),
            depths=depths,
            quality_model=QualityModel(settings["quality-model"]),
            workload_model=WorkloadModel(settings["workload-model"],
                                         _as(float, "workload-scale", settings["workload-scale"])),
            tie_break=settings["tie-break"],
        )
        seed = _as(int, "seed", settings["seed"])
        service = ServiceModel(
            kind=settings["service-kind"],
            rate=_as(float, "service-rate", settings["service-rate"]),
            jitter=_as(float, "jitter", settings["jitter"]),
            seed=seed,
        )
        return SimConfig(
            horizon=_as(int, "horizon", settings["horizon"]),
            controller=controller,
            service=service,
            frames=FrameSource.parse(settings["frames"]),
            policy=policy,
            seed=seed,
            max_depth=_as(int, "max-depth", max_depth) if max_depth else None,
        )
    except LyapOctError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_summaries(cfg: SimConfig):
    try:
        files = cfg.frames.files()
        return summarize_frames(cfg.frames, cfg.summary_depth), {str(f): _sha256(f) for f in files}
    except (PlyError, OSError, EmptyCloud) as exc:
        raise CliError(EXIT_INPUT, f"cannot load frames {cfg.frames.describe()}: {exc}") from None
    except LyapOctError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    settings = resolve_settings(args)
    cfg = build_config(settings)
    summaries, checksums = _load_summaries(cfg)
    out = Path(settings["out"])

    try:
        if settings["policy"] == "compare":
            result = compare_policies(cfg, summaries)
            traces = {"min": result.fixed_min, "max": result.fixed_max, "proposed": result.proposed}
        else:
            traces = {"": run(cfg, summaries)}
    except RegimeInvalid as exc:
        raise CliError(EXIT_REGIME, str(exc)) from None
    except LyapOctError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None

    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for suffix, trace in traces.items():
            path = out / (f"trace_{suffix}.csv" if suffix else "trace.csv")
            path.write_text(trace.to_csv())
            written.append(str(path))
        if "" in traces:
            summary = traces[""].stats()
        else:
            summary = {k: t.stats() for k, t in traces.items()}
        _write_json(out / "summary.json", summary)
        written.append(str(out / "summary.json"))
        manifest = {
            "tool": "lyapoct",
            "version": __version__,
            "config": settings,
            "input_checksums": checksums,
            "outputs": written + [str(out / "manifest.json")],
            "wall_clock_seconds": time.perf_counter() - started,
        }
        _write_json(out / "manifest.json", manifest)
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot write outputs to {out}: {exc.strerror}") from None

    for path in written:
        print(path)
    return 0


def _read_input(path):
    try:
        return read_ply(path)
    except (PlyError, OSError) as exc:
        raise CliError(EXIT_INPUT, f"cannot read {path}: {exc}") from None


def cmd_inspect(args) -> int:
    cloud = _read_input(args.input)
    try:
        summary = build_summary(cloud, args.max_depth)
    except EmptyCloud as exc:
        raise CliError(EXIT_INPUT, f"{args.input}: {exc}") from None
    except DepthOutOfRange as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    lines = ["d,occupied,quality,workload"]
    for d in range(summary.max_depth + 1):
        lines.append(f"{d},{summary.occupied[d]},{quality(summary, d)!r},{workload(summary, d)!r}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_downsample(args) -> int:
    cloud = _read_input(args.input)
    try:
        reduced = downsample(cloud, args.depth)
    except EmptyCloud as exc:
        raise CliError(EXIT_INPUT, f"{args.input}: {exc}") from None
    except DepthOutOfRange as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    try:
        Path(args.output).write_bytes(write_ply(reduced, args.format))
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot write {args.output}: {exc.strerror}") from None
    print(len(reduced))
    return 0


def build_parser():
    parser = _Parser(prog="lyapoct", description="Queue-aware octree depth control for point-cloud frames.")
    parser.add_argument("--version", action="version", version=f"lyapoct {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the closed-loop simulation and write traces")
    sim.add_argument("--config")
    sim.add_argument("--policy", help="proposed | fixed:<d> | compare")
    sim.add_argument("--horizon", type=int)
    sim.add_argument("--V", type=float)
    sim.add_argument("--depths", help='comma separated, e.g. "5,6,7"')
    sim.add_argument("--service-rate", type=float)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--frames", help="PLY file/directory or synthetic:count=N,seed=S")
    sim.add_argument("--out")
    sim.set_defaults(func=cmd_simulate)

    ins = sub.add_parser("inspect", help="per-depth occupancy table as CSV")
    ins.add_argument("--input", required=True)
    ins.add_argument("--max-depth", type=int, required=True)
    ins.set_defaults(func=cmd_inspect)

    ds = sub.add_parser("downsample", help="write one centroid per occupied voxel")
    ds.add_argument("--input", required=True)
    ds.add_argument("--depth", type=int, required=True)
    ds.add_argument("--output", required=True)
    ds.add_argument("--format", choices=("ascii", "binary"), default="binary")
    ds.set_defaults(func=cmd_downsample)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"lyapoct: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
