"""
Command Line Interface

Subcommands: gen-data, train, sample, inpaint, reconstruct, bench, eval.

Every subcommand accepts ``--config FILE``, a flat ``key = value`` file whose
keys are the subcommand's flag names (dashes or underscores). Values from
the file replace the flag defaults; flags given on the command line win.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import ConfigurationError
from app.core.logging import get_logger, log_duration
from app.core.settings import read_flat_config, settings
from app.modules.denoiser import Denoiser, DenoiserConfig
from app.modules.diffusion import load_checkpoint, make_schedule, sample_chain, train
from app.modules.harness.metrics import table_psnr
from app.modules.harness.schemas import BenchmarkSpec, Report
from app.modules.harness.service import evaluate_maps, run_benchmark
from app.modules.inpaint import ALGORITHMS, InpaintConfig, Observation, VisibilityMask, inpaint
from app.modules.ndtensor.random import make_rng
from app.modules.synthdata import ChannelLayout, LightSpec, ReflectanceQuad, load_dataset, make_dataset, random_light
from app.modules.uvgeom import layout_of, reconstruct, synthetic_model
from app.utils.images import load_mask, load_png, save_png

logger = get_logger(__name__)

Handler = Callable[[argparse.Namespace], int]
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}
BENCHMARK_FIRST_SEED = 1000


def _add_inpaint_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--checkpoint", type=Path, required=True, help="Trained checkpoint (.ndt)")
    parser.add_argument("--algorithm", choices=ALGORITHMS, default=settings.inpaint.ALGORITHM)
    parser.add_argument("--steps", type=int, default=settings.inpaint.STEPS, help="DDIM subsequence length (mcg_ddim)")
    parser.add_argument("--repaint-n", type=int, default=settings.inpaint.REPAINT_N)
    parser.add_argument("--mcg-scale", type=float, default=settings.inpaint.MCG_SCALE)
    parser.add_argument("--eta", type=float, default=settings.inpaint.DDIM_ETA)
    parser.add_argument("--out-dir", type=Path, default=Path("outputs"))


def _inpaint_config(args: argparse.Namespace) -> InpaintConfig:
    return InpaintConfig(
        algorithm=args.algorithm,
        steps=args.steps,
        repaint_n=args.repaint_n,
        mcg_scale=args.mcg_scale,
        ddim_eta=args.eta,
        seed=args.seed,
    )


def _write_quad(out_dir: Path, quad: ReflectanceQuad) -> None:
    for name, values in quad.encoded_maps().items():
        save_png(out_dir / f"{name}.png", values)


def load_quad(directory: Path, layout: ChannelLayout = ChannelLayout()) -> ReflectanceQuad:
    """Read T/A_d/A_s/N PNGs as written by `_write_quad`."""
    maps = {name: np.moveaxis(load_png(directory / f"{name}.png"), -1, 0) for name in ("T", "A_d", "A_s", "N")}
    maps["A_s"] = maps["A_s"][: layout.specular]
    normals = 2.0 * maps["N"] - 1.0
    normals[2] = np.maximum(normals[2], 1e-3)
    maps["N"] = normals / np.linalg.norm(normals, axis=0, keepdims=True)
    return ReflectanceQuad(**maps)


def cmd_gen_data(args: argparse.Namespace) -> int:
    path = make_dataset(
        count=args.count,
        R=args.resolution,
        seed=args.seed,
        path=args.out,
        relight=settings.data.RELIGHT and not args.no_relight,
        histogram_match_prob=args.histogram_match_prob,
        layout=ChannelLayout(specular=args.specular),
        workers=args.workers,
    )
    print(path)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    data = load_dataset(args.data, limit=args.limit)
    config = DenoiserConfig(
        in_channels=data.header.layout.total,
        base_width=args.base_width,
        depth=args.depth,
        time_dim=args.time_dim,
    )
    schedule = make_schedule(args.T, args.beta_start, args.beta_end)
    model = Denoiser.initialise(config, make_rng(args.seed, "init"))
    checkpoint = train(
        model,
        data.stacks,
        steps=args.steps,
        batch=args.batch,
        lr=args.lr,
        rng=make_rng(args.seed, "train"),
        schedule=schedule,
        checkpoint_dir=args.out_dir,
        checkpoint_every=args.checkpoint_every,
        seed=args.seed,
        channel_split=data.header.channel_split,
    )
    print(args.out_dir / "final.ndt")
    logger.info("Training complete", extra={"step": checkpoint.step})
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    layout = layout_of(checkpoint)
    model = checkpoint.to_model(label="sample")
    shape = (args.count, layout.total, args.resolution, args.resolution)
    with log_duration(logger, "sample", count=args.count):
        x = sample_chain(model, shape, checkpoint.schedule(), make_rng(args.seed, "sample"), steps=args.steps, eta=args.eta)
    for i, stack in enumerate(x.data):
        _write_quad(args.out_dir / f"sample_{i:03d}", ReflectanceQuad.from_stack(stack, layout))
    print(args.out_dir)
    return 0


def cmd_inpaint(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    layout = layout_of(checkpoint)
    texture = np.moveaxis(load_png(args.texture), -1, 0)
    mask = VisibilityMask(load_mask(args.mask).astype(np.uint8))
    obs = Observation.from_texture(texture, mask, layout)
    result = inpaint(checkpoint.to_model(label=args.algorithm), obs, checkpoint.schedule(), _inpaint_config(args))
    _write_quad(args.out_dir, result.quad)
    print(json.dumps({
        "algorithm": result.algorithm,
        "steps": result.steps,
        "forward_calls": result.forward_calls,
        "backward_calls": result.backward_calls,
        "seconds": round(result.seconds, 3),
    }))
    return 0


def cmd_reconstruct(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    image = load_png(args.image)
    landmarks = np.loadtxt(args.landmarks, ndmin=2)
    rng = make_rng(args.seed, "relight")
    lights: List[LightSpec] = [random_light(rng) for _ in range(args.relight)]
    recon = reconstruct(
        image,
        landmarks,
        synthetic_model(seed=args.model_seed),
        checkpoint,
        _inpaint_config(args),
        resolution=args.resolution,
        output_dir=args.out_dir if args.verbose else None,
        lights=lights,
    )
    if not args.verbose:
        _write_quad(args.out_dir, recon.quad)
    print(json.dumps({"fit_residual": recon.fit.residual, "mask_fraction": recon.observation.mask.fraction}))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    spec = BenchmarkSpec(
        seeds=list(range(BENCHMARK_FIRST_SEED + args.seed, BENCHMARK_FIRST_SEED + args.seed + args.num_seeds)),
        algorithms=args.algorithms,
        resolution=args.resolution,
        repaint_n=args.repaint_n,
        ddim_steps=args.steps,
        workers=args.workers,
        report_path=args.report,
    )
    report = run_benchmark(spec, load_checkpoint(args.checkpoint))
    sys.stdout.write(report.to_text())
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if args.report is not None:
        sys.stdout.write(Report.read(args.report).to_text())
        return 0
    if args.truth is None or args.estimate is None:
        raise ConfigurationError("eval needs --truth and --estimate directories, or --report")
    layout = ChannelLayout(specular=args.specular)
    table = evaluate_maps(load_quad(args.truth, layout), load_quad(args.estimate, layout))
    for name, row in table.items():
        print(f"{name:<4} PSNR {table_psnr(row['psnr']):6.2f} dB  SSIM {row['ssim']:.4f}")
    return 0


def build_parser() -> Tuple[argparse.ArgumentParser, Dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Flat key = value file mirroring the flags")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--log-level", default=None)

    parser = argparse.ArgumentParser(prog="texinpaint", description="Diffusion-guided texture and reflectance completion")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="Generate a synthetic reflectance dataset")
    p.add_argument("--count", type=int, default=settings.data.COUNT)
    p.add_argument("--resolution", type=int, default=settings.data.RESOLUTION)
    p.add_argument("--out", type=Path, default=settings.data.DATASET_PATH)
    p.add_argument("--no-relight", action="store_true", help="Shade every item under the canonical light")
    p.add_argument("--histogram-match-prob", type=float, default=settings.data.HISTOGRAM_MATCH_PROB)
    p.add_argument("--specular", type=int, choices=(1, 3), default=1)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=cmd_gen_data, seed=settings.data.SEED)

    p = sub.add_parser("train", parents=[common], help="Train the denoiser")
    p.add_argument("--data", type=Path, default=settings.data.DATASET_PATH)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--steps", type=int, default=settings.diffusion.TRAIN_STEPS)
    p.add_argument("--batch", type=int, default=settings.diffusion.BATCH_SIZE)
    p.add_argument("--lr", type=float, default=settings.diffusion.LR)
    p.add_argument("--T", type=int, default=settings.diffusion.T)
    p.add_argument("--beta-start", type=float, default=settings.diffusion.BETA_START)
    p.add_argument("--beta-end", type=float, default=settings.diffusion.BETA_END)
    p.add_argument("--base-width", type=int, default=settings.denoiser.BASE_WIDTH)
    p.add_argument("--depth", type=int, default=settings.denoiser.DEPTH)
    p.add_argument("--time-dim", type=int, default=settings.denoiser.TIME_DIM)
    p.add_argument("--checkpoint-every", type=int, default=settings.diffusion.CHECKPOINT_EVERY)
    p.add_argument("--out-dir", type=Path, default=settings.diffusion.CHECKPOINT_DIR)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("sample", parents=[common], help="Unconditional samples from a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--resolution", type=int, default=settings.data.RESOLUTION)
    p.add_argument("--steps", type=int, default=None, help="DDIM subsequence length; omit for the full chain")
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--out-dir", type=Path, default=Path("outputs/samples"))
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("inpaint", parents=[common], help="Complete a partial UV texture")
    _add_inpaint_flags(p)
    p.add_argument("--texture", type=Path, required=True)
    p.add_argument("--mask", type=Path, required=True)
    p.set_defaults(handler=cmd_inpaint, seed=settings.inpaint.SEED)

    p = sub.add_parser("reconstruct", parents=[common], help="Photo and landmarks to a completed quad")
    _add_inpaint_flags(p)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--landmarks", type=Path, required=True, help="Text file with one 'x y' row per landmark")
    p.add_argument("--resolution", type=int, default=settings.data.RESOLUTION)
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--relight", type=int, default=0, help="Number of novel lights to render")
    p.add_argument("--verbose", action="store_true", help="Write every intermediate artifact")
    p.set_defaults(handler=cmd_reconstruct, seed=settings.inpaint.SEED)

    p = sub.add_parser("bench", parents=[common], help="Run the frozen comparison benchmark")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--num-seeds", type=int, default=20)
    p.add_argument("--algorithms", nargs="+", choices=ALGORITHMS, default=list(ALGORITHMS))
    p.add_argument("--resolution", type=int, default=settings.data.RESOLUTION)
    p.add_argument("--repaint-n", type=int, default=settings.inpaint.REPAINT_N)
    p.add_argument("--steps", type=int, default=None, help="DDIM subsequence length for mcg_ddim")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--report", type=Path, default=Path("reports/benchmark"))
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("eval", parents=[common], help="Score maps against ground truth or print a report")
    p.add_argument("--truth", type=Path, default=None)
    p.add_argument("--estimate", type=Path, default=None)
    p.add_argument("--specular", type=int, choices=(1, 3), default=1)
    p.add_argument("--report", type=Path, default=None, help="JSON report written by bench")
    p.set_defaults(handler=cmd_eval)
    return parser, dict(sub.choices)


def config_tokens(parser: argparse.ArgumentParser, path: Path) -> List[str]:
    """
    Translate a flat config file into flag tokens for `parser`.

    Raises:
        ConfigurationError: On keys that name no flag of the subcommand or
            non-boolean values for switches
    """
    actions = {
        a.dest.lower(): a
        for a in parser._actions
        if a.option_strings and a.dest not in ("help", "config")
    }
    tokens: List[str] = []
    for key, value in read_flat_config(path).items():
        action = actions.get(key)
        if action is None:
            raise ConfigurationError(
                f"Unknown key '{key}' in {path}",
                details={"command": parser.prog, "known": sorted(actions)},
            )
        flag = action.option_strings[-1]
        if isinstance(action, argparse._StoreTrueAction):
            lowered = value.lower()
            if lowered not in _TRUE | _FALSE:
                raise ConfigurationError(f"'{key}' expects a boolean, got '{value}'")
            tokens += [flag] if lowered in _TRUE else []
        elif action.nargs in ("+", "*"):
            tokens += [flag, *value.split()]
        else:
            tokens += [flag, value]
    return tokens


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """
    Parse the command line, splicing config-file values in front of the
    explicit flags so that the latter take precedence.
    """
    parser, commands = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] in commands:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config", type=Path)
        known, _ = pre.parse_known_args(argv[1:])
        if known.config is not None:
            argv = [argv[0], *config_tokens(commands[argv[0]], known.config), *argv[1:]]
    return parser.parse_args(argv)
