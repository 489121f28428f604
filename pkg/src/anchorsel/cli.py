"""Command-line entry point: bundle generation, runs, ablations, gradcheck.

Exit codes: 0 success, 2 configuration error, 3 I/O or format error,
4 numerical failure. The ANCHORSEL_THREADS environment variable caps
the linear-algebra thread pools (it must be honored before numpy loads,
which is why the heavy imports live inside the command functions).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _cap_threads() -> None:
    cap = os.environ.get("ANCHORSEL_THREADS")
    if cap:
        for var in _THREAD_VARS:
            os.environ.setdefault(var, cap)


def _pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anchorsel",
        description="Anchor-guided view selection and test-time prompt adaptation "
        "over embedding bundles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic feature bundle")
    gen.add_argument("--preset", choices=["default"], help="start from the pinned benchmark spec")
    gen.add_argument("--C", type=int, help="number of classes")
    gen.add_argument("--N", type=int, help="descriptions per class")
    gen.add_argument("--D", type=int, help="embedding dimension")
    gen.add_argument("--B", type=int, help="views per sample")
    gen.add_argument("--samples", type=int, help="number of test samples")
    gen.add_argument("--informative-fraction", type=float, dest="informative_fraction")
    gen.add_argument("--boost", type=float, help="background confidence boost magnitude")
    gen.add_argument("--confusion", type=float, dest="confusion_strength",
                     help="classifier leakage onto the next class's direction")
    gen.add_argument("--hard-fraction", type=float, dest="hard_view_fraction",
                     help="share of informative views with extra noise")
    gen.add_argument("--shift-angle", type=float, dest="shift_angle")
    gen.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", required=True, help="bundle output directory")
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="run one method over a bundle")
    _add_config_flags(run)
    run.add_argument("--method", help="method name (see docs)")
    run.add_argument("--out", help="run directory for logs, summary, manifest")
    run.set_defaults(func=cmd_run)

    ablate = sub.add_parser("ablate", help="run the component/loss ablation grid")
    _add_config_flags(ablate)
    ablate.add_argument("--out", help="directory for the ablation table")
    ablate.set_defaults(func=cmd_ablate)

    grad = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    grad.add_argument("--seed", type=int, default=0)
    grad.add_argument("--instances", type=int, default=50)
    grad.add_argument("--h", type=float, default=1e-5, help="central-difference step")
    grad.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    grad.set_defaults(func=cmd_gradcheck)

    return parser


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--bundle", required=True, help="bundle directory")
    sub.add_argument("--config", help="JSON file with config fields")
    sub.add_argument("--q", type=float, help="text-filter keep fraction")
    sub.add_argument("--p", type=float, help="image-filter keep fraction")
    sub.add_argument("--alpha", type=_pair, help="text score weights, e.g. 1,2")
    sub.add_argument("--beta", type=_pair, help="image score weights, e.g. 2,1")
    sub.add_argument("--K", type=int, help="prototype classes per image")
    sub.add_argument("--T", type=float, help="target sharpening temperature")
    sub.add_argument("--tau", type=float, help="logit scale")
    sub.add_argument("--lr", type=float, help="optimizer learning rate")
    sub.add_argument("--steps", type=int, help="adaptation steps per sample")
    sub.add_argument("--seed", type=int)


def resolve_config(args: argparse.Namespace):
    """Precedence: command-line flags > config file > built-in defaults."""
    from .config import AdaptationConfig

    data: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        data = json.loads(path.read_text())
        if not isinstance(data, dict):
            from .core import InvalidConfigError

            raise InvalidConfigError(f"{path}: config file must hold a JSON object")
    base = AdaptationConfig.from_dict(data)
    overrides = {
        name: getattr(args, name)
        for name in ("q", "p", "alpha", "beta", "K", "T", "tau", "lr", "steps", "seed", "method")
        if getattr(args, name, None) is not None
    }
    return base.replace(**overrides) if overrides else base


def cmd_gen(args: argparse.Namespace) -> int:
    from .bundle import bundle_checksum
    from .synth import DEFAULT_SPEC, SyntheticSpec, generate_and_write

    spec = DEFAULT_SPEC if args.preset == "default" else SyntheticSpec()
    overrides = {
        name: getattr(args, flag)
        for name, flag in (
            ("C", "C"), ("N", "N"), ("D", "D"), ("B", "B"),
            ("num_samples", "samples"),
            ("informative_fraction", "informative_fraction"),
            ("background_confidence_boost", "boost"),
            ("confusion_strength", "confusion_strength"),
            ("hard_view_fraction", "hard_view_fraction"),
            ("shift_angle", "shift_angle"),
            ("noise_sigma", "noise_sigma"),
            ("seed", "seed"),
        )
        if getattr(args, flag, None) is not None
    }
    if overrides:
        spec = spec.replace(**overrides)
    generate_and_write(spec, args.out)
    print(f"bundle written to {args.out}")
    print(f"checksum {bundle_checksum(args.out)}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    from .bundle import read_bundle
    from .engine import run_stream
    from .runio import (
        format_summary_table,
        write_result_log,
        write_run_manifest,
        write_summary,
    )

    config = resolve_config(args)
    bundle = read_bundle(args.bundle)
    summary, results, bank = run_stream(config, bundle)
    print(format_summary_table([summary]))
    if args.out:
        out = Path(args.out)
        write_result_log(out, results)
        write_summary(out, summary)
        write_run_manifest(out, config, args.bundle)
        bank.save(out)
        print(f"run artifacts in {out}")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    from .bundle import read_bundle
    from .config import ablation_variants
    from .engine import run_stream

    config = resolve_config(args)
    bundle = read_bundle(args.bundle)
    rows = []
    for variant in ablation_variants(config):
        summary, _, _ = run_stream(config, bundle, plan=variant.plan)
        rows.append(
            {
                "label": variant.label,
                "toggles": list(variant.toggles) if variant.toggles else None,
                "accuracy": summary.accuracy,
                "zero_shot_accuracy": summary.zero_shot_accuracy,
                "selection_precision": summary.selection_precision,
                "selection_recall": summary.selection_recall,
                "mean_loss": summary.mean_loss,
            }
        )
    width = max(len(r["label"]) for r in rows)
    print(f"{'variant'.ljust(width)}  accuracy  precision")
    for r in rows:
        acc = "n/a" if r["accuracy"] is None else f"{r['accuracy']:.4f}"
        prec = "n/a" if r["selection_precision"] is None else f"{r['selection_precision']:.4f}"
        print(f"{r['label'].ljust(width)}  {acc:>8}  {prec:>9}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "ablation.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
        print(f"table written to {out / 'ablation.json'}")
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    import numpy as np

    from .core import NonFiniteError
    from .encoder import (
        PromptParams,
        SurrogateEncoder,
        entropy_loss_and_grad,
        finite_difference_grad,
        loss_and_grad,
        relative_grad_error,
    )
    from .ensemble import sharpen

    rng = np.random.default_rng(args.seed)
    worst_loss = 0.0
    worst_encode = 0.0
    for i in range(args.instances):
        c = int(rng.integers(3, 9))
        d = int(rng.integers(8, 25))
        d_p = int(rng.integers(4, 13))
        v = int(rng.integers(2, 7))
        tau = float(rng.uniform(1.0, 30.0))
        mode = "shared-offset" if i % 2 == 0 else "linear"
        base = rng.standard_normal((c, d))
        views = rng.standard_normal((v, d))
        views /= np.linalg.norm(views, axis=1)[:, None]
        enc = SurrogateEncoder(base, prompt_dim=d_p, mode=mode, seed=int(rng.integers(1 << 31)))
        theta = 0.1 * rng.standard_normal(d_p)
        params = PromptParams(theta=theta.copy())

        if i % 3 != 2:
            raw = rng.random(c) + 1e-3
            q_tilde = sharpen(raw / raw.sum(), 0.5)
            _, analytic = loss_and_grad(enc, params, views, q_tilde, tau)
            fd = finite_difference_grad(
                lambda th: loss_and_grad(enc, PromptParams(th.copy()), views, q_tilde, tau)[0],
                theta, args.h,
            )
        else:
            weights = rng.uniform(0.2, 1.0, size=v)
            fixed = rng.standard_normal((v, c))
            _, analytic = entropy_loss_and_grad(
                enc, params, views, tau, prompt_weights=weights, fixed_logits=fixed
            )
            fd = finite_difference_grad(
                lambda th: entropy_loss_and_grad(
                    enc, PromptParams(th.copy()), views, tau,
                    prompt_weights=weights, fixed_logits=fixed,
                )[0],
                theta, args.h,
            )
        if args.corrupt and i == 0:
            analytic = analytic + 1e-3
        worst_loss = max(worst_loss, relative_grad_error(analytic, fd))

        direction = rng.standard_normal(d_p)
        direction /= np.linalg.norm(direction)
        jac = enc.encode_jacobian(theta)
        analytic_dir = np.einsum("cdp,p->cd", jac, direction)
        fd_dir = (enc.encode(theta + args.h * direction) - enc.encode(theta - args.h * direction)) / (2 * args.h)
        worst_encode = max(worst_encode, relative_grad_error(analytic_dir, fd_dir))

    threshold = 1e-5
    ok = worst_loss < threshold and worst_encode < threshold
    status = "PASS" if ok else "FAIL"
    print(f"{status}: max relative error over {args.instances} instances")
    print(f"  loss gradients:    {worst_loss:.3e}")
    print(f"  encoder jacobian:  {worst_encode:.3e}")
    print(f"  threshold:         {threshold:.1e}")
    if not ok:
        raise NonFiniteError(f"gradient check failed (max rel err {max(worst_loss, worst_encode):.3e})")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    _cap_threads()
    parser = build_parser()
    args = parser.parse_args(argv)

    from .bundle import ChecksumMismatch, ShapeMismatch, TruncatedRecord, VersionUnsupported
    from .core import AnchorselError, InvalidConfigError

    try:
        return args.func(args)
    except InvalidConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (VersionUnsupported, ShapeMismatch, ChecksumMismatch, TruncatedRecord) as exc:
        print(f"bundle error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AnchorselError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
