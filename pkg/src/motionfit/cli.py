"""
Command-line front end.

Subcommands: fk, retarget, metrics, correct, schedule, features, synth.
Results go to stdout as JSON, diagnostics to stderr. Exit codes: 0 ok,
1 usage error, 2 bad input, 3 numerical failure.
"""

import argparse
import logging
import sys

import numpy as np

from . import control, correct, formats, metrics, retarget, skeleton
from .config import load_config
from .errors import DegenerateFrameError, InvalidInputError, MotionError

log = logging.getLogger("motionfit")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _emit(obj, out=None):
    text = formats.dumps(obj)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args):
    return load_config(
        getattr(args, "config", None),
        up=getattr(args, "up", None),
        units=getattr(args, "units", None),
        lam=getattr(args, "lam", None),
        beta=getattr(args, "beta", None),
        eps_pen=getattr(args, "eps_pen", None),
        s_init=getattr(args, "s_init", None),
        i_start=getattr(args, "i_start", None),
        i_end=getattr(args, "i_end", None),
        rate=getattr(args, "rate", None),
        joint_limits=getattr(args, "joint_limits", None),
        seed=getattr(args, "seed", None),
    )


def _load_skeleton(path, cfg):
    """``(tree, motion, contacts)`` in meters, +z up."""
    tree, motion, contacts = formats.load_motion_with_contacts(path)
    tree, motion = formats.rescale(tree, motion, cfg.scale)
    return tree, formats.convert_up_axis(motion, cfg.up), contacts


def _tree_for(path, cfg):
    if path is None:
        return skeleton.canonical_tree()
    return _load_skeleton(path, cfg)[0]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_fk(args, cfg):
    tree, motion, _ = _load_skeleton(args.inp, cfg)
    pos = skeleton.forward_kinematics(tree, motion)
    _emit({"fps": motion.fps, "joints": list(tree.names), "positions": pos.tolist()}, args.out)


def cmd_retarget(args, cfg):
    tree, motion, _ = _load_skeleton(args.inp, cfg)
    limits = retarget.load_joint_limits(cfg.joint_limits)
    h = retarget.retarget_sequence(tree, motion, lam=cfg.lam, limits=limits)
    n_viol = int(h.limit_violations().sum())
    if n_viol:
        log.warning("%d joint angles outside the limit table", n_viol)
    if args.out is None:
        _emit(formats.humanoid_to_dict(h))
    else:
        formats.save_humanoid_json(args.out, h)
        _emit({"out": args.out, "frames": h.n_frames, "joints": len(h.joint_names),
               "limit_violations": n_viol})


def _load_any(path, cfg, tree=None):
    """Positions, root, global quaternions and contacts of a skeleton or
    humanoid file. Humanoid files need ``tree``."""
    if formats.is_humanoid_file(path):
        h = formats.load_humanoid_json(path)
        tree = tree or skeleton.canonical_tree()
        return dict(kind="humanoid", tree=tree, pos=retarget.humanoid_fk(tree, h), root=h.root,
                    humanoid=h, contacts=None)
    tree, motion, contacts = _load_skeleton(path, cfg)
    return dict(kind="skeleton", tree=tree, pos=skeleton.positions_of(tree, motion),
                root=motion.root, motion=motion, contacts=contacts)


def _quats(item, tree, mixed):
    if item["kind"] == "skeleton" and not mixed:
        return skeleton.global_quats(tree, item["motion"])
    if item["kind"] == "humanoid":
        return retarget.humanoid_global_quats(tree, item["humanoid"])
    return retarget.positional_global_quats(tree, item["pos"])


def cmd_metrics(args, cfg):
    tree = None
    gt = None
    if args.tree is not None:
        tree = _tree_for(args.tree, cfg)
    if args.gt is not None:
        gt = _load_any(args.gt, cfg, tree)
        tree = tree or gt["tree"]
    pred = _load_any(args.pred, cfg, tree)
    tree = pred["tree"]
    if args.contacts is not None:
        contacts = formats.load_contacts(args.contacts)
    else:
        contacts = pred["contacts"] if pred["contacts"] is not None else (gt or {}).get("contacts")
    pq = gq = None
    gt_pos = None
    if gt is not None:
        gt_pos = gt["pos"]
        mixed = pred["kind"] != gt["kind"] or pred["kind"] == "humanoid"
        try:
            pq, gq = _quats(pred, tree, mixed), _quats(gt, tree, mixed)
        except InvalidInputError as exc:
            log.warning("skipping l2q: %s", exc)
    rep = metrics.evaluate(pred["pos"], tree.foot_set, root=pred["root"], gt_positions=gt_pos,
                           pred_quats=pq, gt_quats=gq, contacts=contacts,
                           eps_pen=cfg.eps_pen, beta=cfg.beta)
    _emit(rep.to_dict())


def cmd_correct(args, cfg):
    tree, motion, contacts = _load_skeleton(args.inp, cfg)
    if args.contacts is not None:
        contacts = formats.load_contacts(args.contacts)
    if contacts is None:
        raise InvalidInputError("no contacts: pass --contacts or embed them in the motion file")
    conf = correct.CorrectionConfig(beta=cfg.beta, steps=args.steps, targets=args.targets)
    res = correct.optimize(tree, motion, contacts, conf)
    if args.refit_ik:
        h = retarget.retarget_positions(tree, res.positions, root=res.motion.root, fps=motion.fps,
                                        lam=cfg.lam, limits=retarget.load_joint_limits(cfg.joint_limits))
        formats.save_humanoid_json(args.out, h)
    else:
        formats.save_skeleton_json(args.out, tree, res.motion, contacts)
    _emit({"out": args.out, "initial_loss": res.trace[0], "final_loss": res.trace[-1],
           "iterations": len(res.trace) - 1, "converged": res.converged})


def cmd_schedule(args, cfg):
    params = control.CurriculumParams(cfg.s_init, cfg.i_start, cfg.i_end, cfg.rate)
    _emit(float(control.curriculum_scale(args.i, params)))


def cmd_features(args, cfg):
    tree = _tree_for(args.tree, cfg)
    h = formats.load_humanoid_json(args.motion)
    _emit(control.features_at(tree, h, args.t).tolist())


def cmd_synth(args, cfg):
    tree, motion, contacts = skeleton.synthesize_test_motion(args.kind, args.frames, seed=cfg.seed,
                                                            fps=args.fps)
    _emit(formats.skeleton_to_dict(tree, motion, contacts), args.out)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value config file (else $MOTIONFIT_CONFIG)")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    space = _Parser(add_help=False)
    space.add_argument("--up", choices=["z", "y"], help="up axis of the input files")
    space.add_argument("--units", choices=["m", "cm", "mm"], help="length unit of the input files")

    p = _Parser(prog="motionfit", description="Skeleton-to-humanoid motion tools.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("fk", parents=[common, space], help="joint positions of a motion")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_fk)

    s = sub.add_parser("retarget", parents=[common, space], help="skeleton motion to humanoid angles")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out")
    s.add_argument("--lambda", dest="lam", type=float, help="flip threshold, radians")
    s.add_argument("--joint-limits", help="limit table JSON (degrees)")
    s.set_defaults(func=cmd_retarget)

    s = sub.add_parser("metrics", parents=[common, space], help="plausibility and accuracy metrics")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt")
    s.add_argument("--contacts")
    s.add_argument("--tree", help="skeleton file supplying the tree for humanoid inputs")
    s.add_argument("--eps-pen", type=float)
    s.add_argument("--beta", type=float)
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("correct", parents=[common, space], help="test-time trajectory correction")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--contacts")
    s.add_argument("--beta", type=float)
    s.add_argument("--steps", type=int, default=200)
    s.add_argument("--targets", choices=correct.TARGETS, default="root")
    s.add_argument("--refit-ik", action="store_true", help="write humanoid angles instead")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_correct)

    s = sub.add_parser("schedule", parents=[common], help="residual force scale at an iteration")
    s.add_argument("--i", type=int, required=True)
    s.add_argument("--s-init", type=float)
    s.add_argument("--i-start", type=int)
    s.add_argument("--i-end", type=int)
    s.add_argument("--rate", type=float)
    s.set_defaults(func=cmd_schedule)

    s = sub.add_parser("features", parents=[common, space], help="policy state features at a frame")
    s.add_argument("--motion", required=True)
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--tree")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("synth", parents=[common], help="seeded procedural motion")
    s.add_argument("--kind", choices=["walk", "crawl", "static"], default="walk")
    s.add_argument("--frames", type=int, default=60)
    s.add_argument("--seed", type=int)
    s.add_argument("--fps", type=float, default=30.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_synth)
    return p


def run(argv=None):
    """Run one subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(stream=sys.stderr, level=args.log_level, force=True,
                        format="level=%(levelname)s logger=%(name)s msg=%(message)s")
    try:
        cfg = _config(args)
        with np.errstate(all="raise"):
            args.func(args, cfg)
    except DegenerateFrameError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except FloatingPointError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (MotionError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    return EXIT_OK


def main():
    sys.exit(run())
