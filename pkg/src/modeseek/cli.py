"""Command-line entry point: ``modeseek segment`` and ``modeseek bench``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

import numpy as np
from scipy.spatial import cKDTree

from .core import BandwidthMatrix, DomainError, FeatureSpaceLayout, Partition, PointSet
from .imaging import DOMAIN_NAMES, IMAGE_LAYOUT, PPMError, image_to_features, load_ppm, render_segmentation, save_ppm
from .meanshift import MeanShiftConfig, Variant, group_modes, partition, run_trajectories
from .selection import BandwidthAssignment, BandwidthRange, final_partition, joint_scales, select_iterative, select_joint
from .synthetic import Component, label_accuracy, sample_mixture

log = logging.getLogger("modeseek")

SCHEMA_VERSION = 1
EXIT_CONFIG = 2
EXIT_IO = 3
DEFAULT_RANGE = (10.0, 30.0, 9)


class ConfigError(Exception):
    """Invalid command-line configuration; the message names the field."""


def parse_range(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--range: expected MIN:MAX:COUNT, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"--range: cannot parse {text!r}") from None
    if count < 3:
        raise ConfigError(f"--range: COUNT must be >= 3, got {count}")
    if not 0 < lo < hi:
        raise ConfigError(f"--range: need 0 < MIN < MAX, got {text!r}")
    return lo, hi, count


def parse_order(text: str) -> list[int]:
    names = [t.strip().lower() for t in text.split(",") if t.strip()]
    if sorted(names) != sorted(DOMAIN_NAMES):
        raise ConfigError(f"--order: must list each of {','.join(DOMAIN_NAMES)} once, got {text!r}")
    return [DOMAIN_NAMES.index(name) for name in names]


def _variant(text: str) -> Variant:
    return Variant.SAMPLE_POINT if text == "sample-point" else Variant.PSEUDO_BALLOON


def _subsampled_partition(
    full: PointSet, sample_idx: np.ndarray, assignment: BandwidthAssignment, variant: Variant, config
) -> Partition:
    """Filter every pixel against the subsampled data.

    Pixels outside the sample borrow the bandwidth of their nearest sampled
    pixel in feature space.
    """
    sample = PointSet(full.points[sample_idx], full.layout)
    _, nearest = cKDTree(sample.points).query(full.points)
    per_pixel_h = assignment.composed[nearest]
    if variant is Variant.SAMPLE_POINT:
        res = run_trajectories(full.points, sample, config, data_h=assignment.composed)
    else:
        res = run_trajectories(full.points, sample, config, traj_h=per_pixel_h)
    labels = group_modes(res.modes, per_pixel_h)
    return Partition(labels, res.modes, res.converged, res.iterations, res.ascent_violations, res.isolated)


def cmd_segment(args) -> int:
    started = time.perf_counter()
    ranges = [parse_range(r) for r in args.range] if args.range else [DEFAULT_RANGE]
    if len(ranges) == 1:
        ranges = ranges * IMAGE_LAYOUT.n_domains
    elif len(ranges) != IMAGE_LAYOUT.n_domains:
        raise ConfigError(f"--range: give 1 or {IMAGE_LAYOUT.n_domains} ranges, got {len(ranges)}")
    order = parse_order(args.order)
    if args.subsample < 1:
        raise ConfigError(f"--subsample: must be >= 1, got {args.subsample}")
    try:
        config = MeanShiftConfig(eps=args.eps, max_iters=args.max_iters, variant=Variant.PSEUDO_BALLOON)
    except DomainError as exc:
        raise ConfigError(f"--eps/--max-iters: {exc}") from None
    bw_range = BandwidthRange.from_sqrt(IMAGE_LAYOUT, ranges)
    variant = _variant(args.variant)
    if args.mode == "joint":
        try:
            scales = joint_scales(bw_range)
        except DomainError as exc:
            raise ConfigError(f"--mode joint: {exc}") from None

    try:
        img = load_ppm(args.input)
    except (OSError, PPMError) as exc:
        raise IOError(f"cannot read input {args.input}: {exc}") from exc

    full = image_to_features(img)
    if args.subsample > 1:
        rng = np.random.default_rng(args.seed)
        k = max(3, full.n // args.subsample)
        sample_idx = np.sort(rng.choice(full.n, size=min(k, full.n), replace=False))
    else:
        sample_idx = np.arange(full.n)
    data = PointSet(full.points[sample_idx], full.layout)
    log.info("segmenting %dx%d image, %d points used for selection", img.width, img.height, data.n)

    if args.mode == "joint":
        assignment, counter = select_joint(data, scales, config)
    else:
        assignment, counter = select_iterative(data, bw_range, order, config)
    if args.subsample > 1:
        final = _subsampled_partition(full, sample_idx, assignment, variant, config)
    else:
        final = final_partition(data, assignment, variant, config)
    counter.increment()

    prefix = args.out_prefix
    try:
        save_ppm(render_segmentation(img.width, img.height, final), f"{prefix}.seg.ppm")
        with open(f"{prefix}.labels.csv", "w") as fh:
            fh.write("\n".join(str(v) for v in final.labels.tolist()) + "\n")
        report = {
            "schema_version": SCHEMA_VERSION,
            "input": str(args.input),
            "width": img.width,
            "height": img.height,
            "mode": args.mode,
            "variant": variant.value,
            "order": [DOMAIN_NAMES[r] for r in order],
            "ranges": {DOMAIN_NAMES[r]: list(ranges[r]) for r in range(len(ranges))},
            "eps": args.eps,
            "max_iters": args.max_iters,
            "subsample": args.subsample,
            "seed": args.seed,
            "points_used": data.n,
            "cluster_count": final.cluster_count,
            "selected_scale_histograms": {
                DOMAIN_NAMES[r]: {str(k): v for k, v in hist.items()}
                for r, hist in enumerate(assignment.histograms())
            },
            "partition_runs": counter.partition_runs,
            "selection_passes": assignment.diagnostics["passes"],
            "final": {
                "nonconverged": int((~final.converged).sum()),
                "isolated": int(final.isolated.sum()),
                "ascent_violations": int(final.ascent_violations.sum()),
            },
            "wall_time_s": round(time.perf_counter() - started, 3),
        }
        with open(f"{prefix}.report.json", "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IOError(f"cannot write outputs with prefix {prefix}: {exc}") from exc
    print(f"{final.cluster_count} clusters -> {prefix}.seg.ppm")
    return 0


def _bench_spec(text: str) -> dict:
    if text == "-":
        return json.load(sys.stdin)
    if text.lstrip().startswith("{"):
        return json.loads(text)
    with open(text) as fh:
        return json.load(fh)


def run_bench(spec: dict, seed: int) -> dict:
    """Generate the mixture described by ``spec`` and cluster it."""
    try:
        components = [Component.from_dict(c) for c in spec["components"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"components: {exc}") from None
    points, truth = sample_mixture(components, seed)
    d = points.shape[1]
    if not 1 <= d <= 5:
        raise ConfigError(f"components: dimension must be in 1..5, got {d}")
    layout = FeatureSpaceLayout(tuple(spec.get("layout", [1] * d)))
    if layout.total_dim != d:
        raise ConfigError(f"layout: dims {layout.domain_dims} do not sum to {d}")
    data = PointSet(points, layout)
    method = spec.get("method", "fixed")
    try:
        config = MeanShiftConfig(eps=float(spec.get("eps", 1e-6)), max_iters=int(spec.get("max_iters", 500)))
    except DomainError as exc:
        raise ConfigError(f"eps/max_iters: {exc}") from None

    runs = 1
    parts: list[Partition] = []
    if method in ("fixed", "balloon", "sample-point"):
        if "bandwidth" not in spec:
            raise ConfigError(f"bandwidth: required for method {method!r}")
        try:
            H = BandwidthMatrix(np.broadcast_to(np.asarray(spec["bandwidth"], dtype=float), (d,)))
        except (DomainError, ValueError) as exc:
            raise ConfigError(f"bandwidth: {exc}") from None
        variant = Variant(method)
        bw = H if variant is Variant.FIXED else [H] * data.n
        parts.append(partition(data, bw, variant, config))
    elif method in ("iterative", "joint"):
        try:
            ranges = [tuple(r) for r in spec["ranges"]]
            if len(ranges) == 1:
                ranges = ranges * layout.n_domains
            bw_range = BandwidthRange.from_sqrt(layout, ranges)
        except (KeyError, TypeError, DomainError) as exc:
            raise ConfigError(f"ranges: {exc}") from None
        if method == "joint":
            assignment, counter = select_joint(data, joint_scales(bw_range), config)
        else:
            assignment, counter = select_iterative(data, bw_range, spec.get("order"), config)
        parts.append(final_partition(data, assignment, _variant(spec.get("variant", "balloon")), config))
        runs = counter.partition_runs + 1
    else:
        raise ConfigError(f"method: unknown {method!r}")
    final = parts[-1]
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "method": method,
        "n": int(data.n),
        "dim": int(d),
        "true_clusters": len(components),
        "cluster_count": final.cluster_count,
        "accuracy": label_accuracy(truth, final.labels),
        "ascent_violations": int(final.ascent_violations.sum()),
        "nonconverged": int((~final.converged).sum()),
        "partition_runs": runs,
    }


def cmd_bench(args) -> int:
    try:
        spec = _bench_spec(args.spec)
    except OSError as exc:
        raise IOError(f"cannot read spec {args.spec}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--spec: invalid JSON: {exc}") from None
    report = run_bench(spec, args.seed)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modeseek", description="Adaptive-bandwidth mean shift clustering.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment a binary PPM image")
    seg.add_argument("--input", required=True)
    seg.add_argument("--out-prefix", required=True)
    seg.add_argument("--range", action="append", metavar="MIN:MAX:COUNT",
                     help="sqrt-bandwidth range; once for all domains or once per domain in x,y,r,g,b order")
    seg.add_argument("--order", default="x,y,r,g,b")
    seg.add_argument("--mode", choices=("iterative", "joint"), default="iterative")
    seg.add_argument("--variant", choices=("balloon", "sample-point"), default="balloon")
    seg.add_argument("--eps", type=float, default=1e-6)
    seg.add_argument("--max-iters", type=int, default=500)
    seg.add_argument("--subsample", type=int, default=1)
    seg.add_argument("--seed", type=int, default=0)
    seg.set_defaults(func=cmd_segment)

    bench = sub.add_parser("bench", help="cluster a seeded synthetic Gaussian mixture")
    bench.add_argument("--spec", required=True, help="JSON file, inline JSON object, or '-' for stdin")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"modeseek: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IOError, PPMError) as exc:
        print(f"modeseek: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
