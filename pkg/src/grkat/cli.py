"""Command-line surface.

Subcommands: fit, gain, gradcheck, varcheck, flops, bench, train, eval,
transfer, dumpfn.  All outputs are plain CSV/JSON so downstream checks
can parse them without importing the library.  Every subcommand is
deterministic given --seed; exit codes: 0 ok, 1 usage error, 2 numeric
check failure, 3 I/O or format error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import checkpoint as ckpt
from . import checks
from . import flops as flops_mod
from .config import dump_effective, load_run_config
from .data import load_dataset
from .errors import ConfigError, DivergenceError, DomainError, FitError, \
    FormatError, ShapeError
from .initfit import RationalCoeffs, estimate_gain, fit_rational, \
    kan_default_variance, transfer_from_mlp
from .model import KatModel, OptimizerCfg, build, train
from .rational import eval_batch

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


def _write_json(path, payload):
    if path in (None, "-"):
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)


def _load_coeffs(path) -> RationalCoeffs:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        return RationalCoeffs(np.asarray(doc["a"], dtype=np.float64),
                              np.asarray(doc["b"], dtype=np.float64))
    except KeyError as exc:
        raise FormatError(f"coefficient file missing key {exc}") from exc


def cmd_fit(args) -> int:
    result = fit_rational(args.target, m=args.m, n=args.n,
                          grid=(args.lo, args.hi), seed=args.seed)
    _write_json(args.out, {
        "target": args.target,
        "a": result.coeffs.a.tolist(),
        "b": result.coeffs.b.tolist(),
        "max_abs_err": result.max_abs_err,
        "final_cost": result.cost_history[-1],
    })
    return EXIT_OK


def cmd_gain(args) -> int:
    fn = _load_coeffs(args.target) if args.target.endswith(".json") else args.target
    est = estimate_gain(fn, nsamples=args.nsamples, seed=args.seed)
    print(f"alpha {est.alpha:.6f} +- {est.stderr:.6f}  (E[F^2] = {est.mean_sq:.6f})")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    reports = checks.run_gradcheck(seed=args.seed, tol=args.tol)
    ok = True
    for rep in reports:
        status = "PASS" if rep.passed else "FAIL"
        print(f"{status} {rep.name}: {rep.cases} cases, "
              f"max relative error {rep.max_rel_err:.3e} (tol {rep.tol:g})")
        ok = ok and rep.passed
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_varcheck(args) -> int:
    e_sq, var = kan_default_variance(1.0, seed=args.seed)
    print(f"E[silu^2] {e_sq:.4f}  default-edge output variance {var:.4f}")
    profile = checks.depth_variance_probe(depth=args.depth, d=args.dim,
                                          seed=args.seed + 100)
    control = checks.depth_variance_probe(depth=args.depth, d=args.dim,
                                          seed=args.seed + 100,
                                          gain_scaled=False)
    writer = csv.writer(sys.stdout if args.out in (None, "-")
                        else open(args.out, "w", newline=""))
    writer.writerow(["depth", "variance_gain_scaled", "variance_alpha1"])
    for i, (v, c) in enumerate(zip(profile, control), start=1):
        writer.writerow([i, f"{v:.6f}", f"{c:.6f}"])
    in_band = all(0.5 <= v <= 2.0 for v in profile)
    return EXIT_OK if in_band else EXIT_NUMERIC


def cmd_flops(args) -> int:
    report = flops_mod.audit(args.variant, args.d_in, args.d_out, m=args.m,
                             n=args.n, g=args.g, G=args.grid, K=args.order,
                             nonlinear_flops=args.nonlinear_flops)
    _write_json(args.out, report)
    return EXIT_OK


def cmd_bench(args) -> int:
    rows = bench_mod.run_bench(
        g_list=args.g, d_list=args.dim, batch=args.batch, tokens=args.tokens,
        repeats=args.repeats, threads=args.threads, seed=args.seed)
    bench_mod.write_report(args.out, rows)
    by_cfg = {}
    for r in rows:
        by_cfg.setdefault((r.g, r.D), set()).add(r.checksum)
    mismatched = [k for k, v in by_cfg.items() if len(v) != 1]
    if mismatched:
        print(f"checksum mismatch at (g, D) = {mismatched}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"wrote {len(rows)} rows to {args.out}; checksums agree")
    return EXIT_OK


def _prepare_run(args):
    run = load_run_config(args.config)
    model_cfg = run.model_config()
    opt = OptimizerCfg(**{**{"seed": run.seed}, **run.optimizer})
    out_dir = Path(args.out_dir or run.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_effective(out_dir / "effective-config.yaml", run, opt, model_cfg)
    return run, model_cfg, opt, out_dir


def cmd_train(args) -> int:
    run, model_cfg, opt, out_dir = _prepare_run(args)
    dataset = load_dataset(run.dataset)
    model = build(model_cfg, seed=run.seed)
    trace = train(model, dataset, opt)
    with open(out_dir / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "grad_norm", "block_variances"])
        for row in trace:
            writer.writerow([row.step, f"{row.loss:.8f}", f"{row.grad_norm:.6f}",
                             " ".join(f"{v:.4f}" for v in row.block_variances)])
    model.save(out_dir / "model.grkn")
    print(f"final loss {trace[-1].loss:.6f}; artifacts in {out_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    run, _, _, out_dir = _prepare_run(args)
    dataset = load_dataset(run.dataset)
    model = KatModel.load(args.checkpoint)
    outputs = model.forward_inference(dataset.tokens)
    if dataset.task == "classify":
        acc = float((outputs.argmax(axis=1) == dataset.targets).mean())
        metrics = {"accuracy": acc, "n": len(dataset)}
    else:
        target = np.asarray(dataset.targets, dtype=np.float64).reshape(outputs.shape)
        metrics = {"mse": float(np.mean((outputs - target) ** 2)),
                   "n": len(dataset)}
    _write_json(out_dir / "eval.json", metrics)
    print(json.dumps(metrics))
    return EXIT_OK


def cmd_transfer(args) -> int:
    tensors, _ = ckpt.load(args.checkpoint)
    try:
        linear1 = (tensors["w1"], tensors["b1"])
        linear2 = (tensors["w2"], tensors["b2"])
    except KeyError as exc:
        raise FormatError(
            f"source checkpoint needs tensors w1/b1/w2/b2; missing {exc}"
        ) from exc
    layer1, layer2 = transfer_from_mlp(linear1, args.act, linear2, g=args.g)
    ckpt.save(args.out, {
        "layer1.numer": layer1.numer.data, "layer1.denom": layer1.denom.data,
        "layer1.W": layer1.W.data, "layer1.bias": layer1.bias.data,
        "layer2.numer": layer2.numer.data, "layer2.denom": layer2.denom.data,
        "layer2.W": layer2.W.data, "layer2.bias": layer2.bias.data,
    }, meta={"source_activation": args.act, "groups": args.g})
    # fidelity probe on a seeded batch
    rng = np.random.default_rng(args.seed)
    x = rng.standard_normal((1000, linear1[0].shape[1]))
    from .initfit import get_target
    act = get_target(args.act)
    reference = act(x @ linear1[0].T + linear1[1]) @ linear2[0].T + linear2[1]
    out = layer2.forward_vectorized(layer1.forward_vectorized(x))
    dev = float(np.abs(out - reference).max())
    corr = float(np.corrcoef(out.ravel(), reference.ravel())[0, 1])
    print(f"max output deviation {dev:.6f}  correlation {corr:.6f}")
    return EXIT_OK if dev < args.tol else EXIT_NUMERIC


def cmd_dumpfn(args) -> int:
    tensors, meta = ckpt.load(args.checkpoint)
    xs = np.linspace(args.lo, args.hi, args.npoints)
    pairs = sorted(name[: -len(".numer")] for name in tensors
                   if name.endswith(".numer"))
    if not pairs:
        raise FormatError("checkpoint holds no rational coefficient tensors")
    writer = csv.writer(sys.stdout if args.out in (None, "-")
                        else open(args.out, "w", newline=""))
    writer.writerow(["function", "group", "x", "f"])
    for stem in pairs:
        numer = np.atleast_2d(tensors[stem + ".numer"])
        denom = tensors[stem + ".denom"]
        for k in range(numer.shape[0]):
            den = denom if denom.ndim == 1 else denom[k]
            fs = eval_batch(RationalCoeffs(numer[k], den), xs)
            for x, f in zip(xs, fs):
                writer.writerow([stem, k, f"{x:.6f}", f"{f:.8f}"])
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grkat",
        description="Group-rational KAN layers, a desk-scale transformer, "
                    "and their numeric audit tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a rational to a reference activation")
    p.add_argument("target")
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--lo", type=float, default=-4.0)
    p.add_argument("--hi", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("gain", help="Monte-Carlo variance gain of an activation")
    p.add_argument("target", help="activation name or coefficient JSON file")
    p.add_argument("--nsamples", type=int, default=4_000_000)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(fn=cmd_gain)

    p = sub.add_parser("gradcheck", help="finite-difference gradient sweep")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("varcheck", help="depth-variance probe")
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_varcheck)

    p = sub.add_parser("flops", help="per-layer FLOPs/parameter audit")
    p.add_argument("variant", choices=["mlp", "kan", "grkan"])
    p.add_argument("--d-in", type=int, default=512)
    p.add_argument("--d-out", type=int, default=512)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--g", type=int, default=8)
    p.add_argument("--grid", type=int, default=3, help="spline grid size G")
    p.add_argument("--order", type=int, default=3, help="spline order K")
    p.add_argument("--nonlinear-flops", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_flops)

    p = sub.add_parser("bench", help="kernel throughput/memory benchmark")
    p.add_argument("--g", type=_int_list, default=[8])
    p.add_argument("--dim", type=_int_list, default=[512])
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--tokens", type=int, default=1000)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="bench.csv")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("train", help="train from a run config")
    p.add_argument("config")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("config")
    p.add_argument("checkpoint")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("transfer",
                       help="map a stored 2-linear MLP block onto rational layers")
    p.add_argument("checkpoint", help="GRKN file with tensors w1, b1, w2, b2")
    p.add_argument("--act", default="gelu")
    p.add_argument("--g", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=0.1)
    p.add_argument("--out", default="transferred.grkn")
    p.set_defaults(fn=cmd_transfer)

    p = sub.add_parser("dumpfn",
                       help="sample every stored rational function on a grid")
    p.add_argument("checkpoint")
    p.add_argument("--lo", type=float, default=-4.0)
    p.add_argument("--hi", type=float, default=4.0)
    p.add_argument("--npoints", type=int, default=201)
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_dumpfn)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ConfigError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, DivergenceError, FitError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
