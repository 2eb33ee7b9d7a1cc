"""Command-line pipeline surface.

Exit codes: 0 success, 2 I/O failure (missing/corrupt/unwritable files),
3 validation failure (bad parameters, mismatched inputs). An optional
JSON config (--config) supplies defaults for any flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import codec, dataset, fusion, losses, metrics, meshio
from ._io import atomic_write_text
from .errors import (DimensionMismatch, EmptyCloud, EmptyMesh, InvalidFormat,
                     MissingRgb)
from .geometry import PinholeCamera

EXIT_OK = 0
EXIT_IO = 2
EXIT_VALIDATION = 3


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _load_camera(path) -> PinholeCamera:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as e:
        raise CliError(f"cannot read camera file: {e}", EXIT_IO)
    except json.JSONDecodeError as e:
        raise CliError(f"camera file is not valid JSON: {e}", EXIT_IO)
    try:
        return PinholeCamera.from_dict(data)
    except (KeyError, ValueError) as e:
        raise CliError(f"invalid camera parameters: {e}", EXIT_VALIDATION)


def _load_mesh(path):
    try:
        return meshio.load_mesh(path)
    except OSError as e:
        raise CliError(f"cannot read mesh: {e}", EXIT_IO)
    except InvalidFormat as e:
        raise CliError(str(e), EXIT_IO)
    except ValueError as e:
        raise CliError(f"invalid mesh: {e}", EXIT_VALIDATION)


def _load_peel(path):
    try:
        return codec.read_peel(path)
    except OSError as e:
        raise CliError(f"cannot read peel file: {e}", EXIT_IO)
    except InvalidFormat as e:
        raise CliError(str(e), EXIT_IO)


def _load_rd(path, rd_limit=np.inf):
    try:
        return fusion.read_rd_peel(path, rd_limit=rd_limit)
    except OSError as e:
        raise CliError(f"cannot read RD peel file: {e}", EXIT_IO)
    except InvalidFormat as e:
        raise CliError(str(e), EXIT_IO)


def _parse_yaw(text):
    if not text:
        return []
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise CliError(f"bad yaw list: {e}", EXIT_VALIDATION)


def cmd_encode(args):
    if args.layers < 1:
        raise CliError("--layers must be >= 1", EXIT_VALIDATION)
    mesh = _load_mesh(args.mesh)
    camera = _load_camera(args.camera)
    if args.width or args.height:
        camera = PinholeCamera(camera.fx, camera.fy, camera.cx, camera.cy,
                               args.width or camera.width,
                               args.height or camera.height, camera.pose)
    try:
        stack = codec.encode_peeled(mesh, camera, args.layers)
    except EmptyMesh as e:
        raise CliError(str(e), EXIT_VALIDATION)
    _write(codec.write_peel, args.out, stack)


def cmd_decode(args):
    stack = _load_peel(args.peel)
    cloud = codec.decode_pointcloud(stack)
    _write(meshio.write_ply_points, args.out, cloud.points, cloud.colors)


def cmd_subsample(args):
    if args.target < 1:
        raise CliError("--target must be >= 1", EXIT_VALIDATION)
    try:
        points, colors = meshio.read_ply_points(args.cloud)
    except OSError as e:
        raise CliError(f"cannot read cloud: {e}", EXIT_IO)
    except InvalidFormat as e:
        raise CliError(str(e), EXIT_IO)
    cloud = codec.ColoredPointCloud(points=points, colors=colors)
    out = codec.subsample_uniform(cloud, args.target, seed=args.seed)
    _write(meshio.write_ply_points, args.out, out.points, out.colors)


def cmd_rd_gt(args):
    if args.rd_limit <= 0:
        raise CliError("--rd-limit must be positive", EXIT_VALIDATION)
    smpl = _load_peel(args.smpl_peel)
    clothed = _load_peel(args.clothed_peel)
    try:
        rd = fusion.compute_rd_gt(smpl, clothed, args.rd_limit)
    except DimensionMismatch as e:
        raise CliError(str(e), EXIT_VALIDATION)
    _write(fusion.write_rd_peel, args.out, rd, smpl.camera)


def cmd_fuse(args):
    smpl = _load_peel(args.smpl_peel)
    rd, _cam = _load_rd(args.rd_peel)
    pred = _load_peel(args.pred_peel)
    try:
        fused = fusion.fuse_maps(smpl, rd, pred)
    except DimensionMismatch as e:
        raise CliError(str(e), EXIT_VALIDATION)
    _write(codec.write_peel, args.out, fused)


def cmd_losses(args):
    pred = _load_peel(args.pred_peel)
    gt = _load_peel(args.gt_peel)
    pred_rd, _ = _load_rd(args.pred_rd)
    gt_rd, _ = _load_rd(args.gt_rd)
    smpl = _load_peel(args.smpl_peel)
    weights = losses.LossWeights(args.lambda_rd, args.lambda_rgb, args.lambda_sm)
    try:
        report = losses.total_loss(pred, gt, pred_rd, gt_rd, smpl, weights)
    except (DimensionMismatch, MissingRgb) as e:
        raise CliError(str(e), EXIT_VALIDATION)
    _emit_json(report.to_dict(), args.out)


def cmd_metrics(args):
    path = Path(args.pred)
    if path.suffix.lower() == ".peel":
        cloud = codec.decode_pointcloud(_load_peel(path))
    else:
        try:
            points, colors = meshio.read_ply_points(path)
        except OSError as e:
            raise CliError(f"cannot read prediction: {e}", EXIT_IO)
        except InvalidFormat as e:
            raise CliError(str(e), EXIT_IO)
        cloud = codec.ColoredPointCloud(points=points, colors=colors)
    gt_mesh = _load_mesh(args.gt_mesh)
    try:
        gt_cloud = metrics.sample_surface(gt_mesh, args.gt_samples, seed=args.seed)
        report = metrics.evaluate(cloud, gt_mesh, gt_cloud)
    except (EmptyCloud, EmptyMesh) as e:
        raise CliError(str(e), EXIT_VALIDATION)
    _emit_json(report.to_dict(), args.out)


def cmd_dataset(args):
    body = _load_mesh(args.body_mesh)
    garment = _load_mesh(args.garment_mesh)
    camera = _load_camera(args.camera)
    yaw = _parse_yaw(args.yaw)
    if args.layers < 1:
        raise CliError("--layers must be >= 1", EXIT_VALIDATION)
    try:
        cfg = dataset.SubtractionConfig(
            rays_per_face=args.rays_per_face,
            max_interior_distance=args.max_interior_distance)
    except ValueError as e:
        raise CliError(str(e), EXIT_VALIDATION)
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as e:
        raise CliError(f"output directory not writable: {e}", EXIT_IO)
    try:
        clothed = dataset.subtract_body(body, garment, cfg)
        dataset.make_ground_truth(clothed, body, camera, yaw, out_dir,
                                  layers=args.layers, rd_limit=args.rd_limit)
    except EmptyMesh as e:
        raise CliError(str(e), EXIT_VALIDATION)
    except OSError as e:
        raise CliError(f"write failed: {e}", EXIT_IO)


def _write(writer, out, *payload):
    try:
        writer(out, *payload)
    except OSError as e:
        raise CliError(f"cannot write {out}: {e}", EXIT_IO)


def _emit_json(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        atomic_write_text(out, text)
    except OSError as e:
        raise CliError(f"cannot write {out}: {e}", EXIT_IO)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peelkit",
        description="Peeled depth-map pipelines: encode, decode, fuse, "
                    "evaluate, and build ground-truth datasets.")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap worker threads (default: all cores)")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for any randomized step")
    parser.add_argument("--config", type=str, default=None,
                        help="JSON file supplying flag defaults; flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="Ray-trace a mesh into a PEEL map stack.")
    p.add_argument("mesh", help="OBJ or PLY mesh path")
    p.add_argument("camera", help="camera JSON (fx, fy, cx, cy, width, height, world_to_camera)")
    p.add_argument("out", help="output .peel path")
    p.add_argument("--layers", type=int, default=codec.DEFAULT_LAYERS)
    p.add_argument("--width", type=int, default=None, help="override camera width")
    p.add_argument("--height", type=int, default=None, help="override camera height")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="Back-project a PEEL stack to a PLY point cloud.")
    p.add_argument("peel")
    p.add_argument("out", help="output .ply path")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("subsample", help="Uniformly subsample a PLY point cloud.")
    p.add_argument("cloud")
    p.add_argument("out")
    p.add_argument("--target", type=int, default=20000)
    p.set_defaults(func=cmd_subsample)

    p = sub.add_parser("rd-gt", help="Compute ground-truth residual deformation maps.")
    p.add_argument("smpl_peel")
    p.add_argument("clothed_peel")
    p.add_argument("out")
    p.add_argument("--rd-limit", type=float, default=fusion.RD_LIMIT_DEFAULT)
    p.set_defaults(func=cmd_rd_gt)

    p = sub.add_parser("fuse", help="Fuse prior, RD, and predicted peeled depths.")
    p.add_argument("smpl_peel")
    p.add_argument("rd_peel")
    p.add_argument("pred_peel")
    p.add_argument("out")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("losses", help="Evaluate the map-space objectives.")
    p.add_argument("--pred-peel", required=True)
    p.add_argument("--gt-peel", required=True)
    p.add_argument("--pred-rd", required=True)
    p.add_argument("--gt-rd", required=True)
    p.add_argument("--smpl-peel", required=True)
    p.add_argument("--lambda-rd", type=float, default=1.0)
    p.add_argument("--lambda-rgb", type=float, default=0.1)
    p.add_argument("--lambda-sm", type=float, default=0.001)
    p.add_argument("--out", default=None, help="report JSON path (default stdout)")
    p.set_defaults(func=cmd_losses)

    p = sub.add_parser("metrics", help="Chamfer and point-to-surface against a GT mesh.")
    p.add_argument("pred", help="prediction: .peel stack or .ply cloud")
    p.add_argument("gt_mesh")
    p.add_argument("--gt-samples", type=int, default=20000,
                   help="points sampled from the GT mesh for chamfer")
    p.add_argument("--out", default=None, help="report JSON path (default stdout)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("dataset", help="Subtract body from garment and emit GT stacks.")
    p.add_argument("body_mesh")
    p.add_argument("garment_mesh")
    p.add_argument("camera")
    p.add_argument("out_dir")
    p.add_argument("--yaw", default="", help="comma-separated yaw angles, e.g. 45,60,-45")
    p.add_argument("--layers", type=int, default=codec.DEFAULT_LAYERS)
    p.add_argument("--rd-limit", type=float, default=fusion.RD_LIMIT_DEFAULT)
    p.add_argument("--rays-per-face", type=int, default=4)
    p.add_argument("--max-interior-distance", type=float, default=0.25)
    p.set_defaults(func=cmd_dataset)

    return parser


def _apply_config(parser, argv):
    """Merge --config JSON values as argparse defaults; explicit flags win."""
    ns, _ = parser.parse_known_args(argv)
    if not getattr(ns, "config", None):
        return
    try:
        cfg = json.loads(Path(ns.config).read_text())
    except OSError as e:
        raise CliError(f"cannot read config: {e}", EXIT_IO)
    except json.JSONDecodeError as e:
        raise CliError(f"config is not valid JSON: {e}", EXIT_IO)
    if not isinstance(cfg, dict):
        raise CliError("config must be a JSON object", EXIT_VALIDATION)
    clean = {k.replace("-", "_"): v for k, v in cfg.items()}
    # subcommands parse into their own namespace, so their defaults must be
    # overridden directly; explicit flags still take precedence
    parser.set_defaults(**clean)
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                known = {a.dest for a in sub._actions}
                sub.set_defaults(**{k: v for k, v in clean.items()
                                    if k in known})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if args.threads is not None:
            if args.threads < 1:
                raise CliError("--threads must be >= 1", EXIT_VALIDATION)
            import numba
            numba.set_num_threads(args.threads)
        args.func(args)
    except CliError as e:
        print(f"peelkit: {e}", file=sys.stderr)
        return e.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
