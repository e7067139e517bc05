"""Command-line front end: ``quadmani generate|fit|eval|diagnose|sweep``.

Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .baselines import AmConfig, am_encode, am_fit, leading_fit, linear_manifold
from .datagen import DATASETS, Dataset, load_dataset
from .diagnostics import (
    EvalReport,
    UnsupportedManifoldError,
    correlation_matrix,
    relative_error,
    singular_value_report,
)
from .encoders import GnConfig, GnInit
from .greedy import (
    DEFAULT_GAMMA_GRID,
    GreedyConfig,
    greedy_fit,
    pick_gamma,
    score_gammas,
)
from .manifold import QuadraticManifold, read_manifold, write_manifold
from .matrixio import (
    MatrixIOError,
    apply_shift,
    center_columns,
    read_matrix,
    write_csv,
    write_matrix,
    zero_shift,
)
from .ridge import SingularSystemError
from .svdcore import SvdError, thin_svd

log = logging.getLogger("quadmani")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
METHODS = ("pca", "leading", "greedy", "am")
ENCODERS = ("linear", "gn", "am")


class ConfigError(ValueError):
    pass


def _gamma_grid(text: str | None):
    if text is None:
        return None
    if text == "default":
        return list(DEFAULT_GAMMA_GRID)
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise ConfigError(f"bad gamma grid {text!r}") from None


def _r_list(text: str) -> list[int]:
    """``"10"``, ``"2,4,8"`` or ``"start:step:stop"`` (inclusive)."""
    try:
        if ":" in text:
            start, step, stop = (int(v) for v in text.split(":"))
            if step < 1:
                raise ValueError
            return list(range(start, stop + 1, step))
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise ConfigError(f"bad r specification {text!r}") from None


def _add_data_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--dataset", choices=sorted(DATASETS), help="built-in dataset")
    g.add_argument("--train", type=Path, help="QMX1 training matrix")
    g.add_argument("--val", type=Path, help="QMX1 validation matrix")
    g.add_argument("--test", type=Path, help="QMX1 test matrix")
    c = g.add_mutually_exclusive_group()
    c.add_argument("--center", dest="center", action="store_true", default=None,
                   help="subtract the training row mean (default for built-in PDE datasets and files)")
    c.add_argument("--no-center", dest="center", action="store_false")


def _add_fit_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("fit")
    g.add_argument("--m", type=int, default=None, help="candidate window (default 10 * max r)")
    g.add_argument("--no-grow-window", dest="grow_window", action="store_false",
                   help="scan 1..m at every iteration instead of 1..m+i")
    g.add_argument("--gamma", type=float, default=1e-8)
    g.add_argument("--gamma-grid", default=None,
                   help="comma list or 'default' (1e-8..1e-2); picks gamma on validation data")
    g.add_argument("--svd-rank", type=int, default=None, help="truncate the SVD (default: complete)")
    g.add_argument("--dense", action="store_true", help="score candidates with n-row residuals")
    g.add_argument("--am-qbar", type=int, default=None, help="AM correction columns (default m)")
    g.add_argument("--am-max-outer", type=int, default=None, help="default 15 * r")
    g.add_argument("--am-tol", type=float, default=1e-12)
    g.add_argument("--am-lm-evals", type=int, default=1600)


def _add_encoder_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("encoder")
    g.add_argument("--encoder", default="linear",
                   help="comma list of linear, gn, am (am = Levenberg-Marquardt on the reconstruction error)")
    g.add_argument("--gn-iters", type=int, default=20)
    g.add_argument("--gn-tol", type=float, default=1e-12)
    g.add_argument("--gn-damping", type=float, default=0.0)
    g.add_argument("--gn-init", choices=[e.value for e in GnInit], default=GnInit.LinearEncode.value)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=Path("qm_out"), help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker threads (env QM_THREADS)")
    p.add_argument("--figures", action="store_true", help="also render PNG figures next to the CSVs")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quadmani", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a built-in dataset as QMX1 train/val/test files")
    p.add_argument("--dataset", choices=sorted(DATASETS), required=True)
    _add_common(p)

    p = sub.add_parser("fit", help="fit one manifold and evaluate it")
    _add_data_args(p)
    p.add_argument("--method", choices=METHODS, default="greedy")
    p.add_argument("--r", type=int, required=True)
    _add_fit_args(p)
    _add_encoder_args(p)
    p.add_argument("--correlations", type=int, default=None, metavar="ROWS",
                   help="write the correlation report capped at ROWS rows (0 = p)")
    _add_common(p)

    p = sub.add_parser("eval", help="relative error of a stored manifold on a stored matrix")
    p.add_argument("--manifold", type=Path, required=True)
    p.add_argument("--test", type=Path, required=True, help="raw (unshifted) QMX1 matrix")
    _add_encoder_args(p)
    _add_common(p)

    p = sub.add_parser("diagnose", help="singular values and correlation report")
    p.add_argument("--manifold", type=Path, required=True)
    p.add_argument("--train", type=Path, required=True, help="raw training QMX1 matrix")
    p.add_argument("--rows", type=int, default=0, help="correlation row cap (0 = p)")
    _add_common(p)

    p = sub.add_parser("sweep", help="fit and evaluate several methods over several r")
    _add_data_args(p)
    p.add_argument("--method", default="leading,greedy", help="comma list of " + ",".join(METHODS))
    p.add_argument("--r", required=True, help="e.g. 10, 2,4,8 or 2:2:20")
    _add_fit_args(p)
    _add_encoder_args(p)
    _add_common(p)
    return ap


# ---------------------------------------------------------------- helpers


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        try:
            n = int(os.environ.get("QM_THREADS", "1"))
        except ValueError:
            raise ConfigError("QM_THREADS must be an integer") from None
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n


def _available_cores() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


def _thread_limit(n: int):
    """Limit BLAS threads to ``n``, never above the usable core count.

    Some OpenBLAS builds crash when their pool is grown past the cores they
    initialized for; oversubscribing BLAS gains nothing anyway. Candidate
    scoring in the greedy loop still uses ``n`` worker threads.
    """
    blas = min(n, _available_cores())
    if blas < n:
        log.info("BLAS threads capped at %d (usable cores)", blas)
    return threadpool_limits(limits=blas)


def _load_data(args) -> tuple[Dataset, bool]:
    if args.dataset:
        if args.train or args.val or args.test:
            raise ConfigError("give either --dataset or --train/--val/--test, not both")
        ds = load_dataset(args.dataset)
    else:
        if not (args.train and args.test):
            raise ConfigError("--train and --test are required without --dataset")
        train = read_matrix(args.train)
        test = read_matrix(args.test)
        val = read_matrix(args.val) if args.val else None
        ds = Dataset(args.train.stem, train, val, test, True, {
            "train": str(args.train), "val": str(args.val) if args.val else None, "test": str(args.test)
        })
    center = ds.center if args.center is None else args.center
    for name in ("val", "test"):
        m = getattr(ds, name)
        if m is not None and m.shape[0] != ds.train.shape[0]:
            raise ConfigError(f"{name} has {m.shape[0]} rows, train has {ds.train.shape[0]}")
    return ds, center


def _gn_config(args) -> GnConfig:
    return GnConfig(max_iter=args.gn_iters, change_tol=args.gn_tol, damping=args.gn_damping,
                    init=GnInit(args.gn_init))


def _encoders(args) -> list[str]:
    encs = [e.strip() for e in args.encoder.split(",") if e.strip()]
    bad = [e for e in encs if e not in ENCODERS]
    if bad or not encs:
        raise ConfigError(f"unknown encoder(s) {bad or args.encoder!r}")
    return encs


class _Prepared:
    """Centered splits and the training SVD, shared across fits."""

    def __init__(self, ds: Dataset, center: bool, svd_rank):
        self.ds = ds
        if center:
            self.train, self.shift = center_columns(ds.train)
        else:
            self.train, self.shift = ds.train, zero_shift(ds.train.shape[0])
        self.val = apply_shift(ds.val, self.shift) if ds.val is not None else None
        self.test = apply_shift(ds.test, self.shift)
        t0 = time.perf_counter()
        self.svd = thin_svd(self.train, svd_rank)
        self.svd_seconds = time.perf_counter() - t0
        self._test_sigma = None

    @property
    def test_sigma(self):
        if self._test_sigma is None:
            self._test_sigma = np.linalg.svd(self.test, compute_uv=False)
        return self._test_sigma


def _fit_one(prep: _Prepared, method: str, r: int, gamma: float, args, m: int, threads: int):
    """Returns (manifold, trace-or-None, am-state-or-None, seconds)."""
    t0 = time.perf_counter()
    trace = state = None
    if method == "pca":
        mani = linear_manifold(prep.svd.U[:, :r].copy(), prep.shift)
    elif method == "leading":
        mani = leading_fit(prep.train, r, gamma, prep.shift, prep.svd)
    elif method == "greedy":
        cfg = GreedyConfig(r=r, m=m, grow_window=args.grow_window, gamma=gamma,
                           svd_rank=args.svd_rank, dense=args.dense, threads=threads)
        mani, trace = greedy_fit(prep.train, cfg, prep.shift, prep.svd)
    elif method == "am":
        cfg = AmConfig(qbar=args.am_qbar or m, gamma=gamma, max_outer=args.am_max_outer,
                       tol=args.am_tol, lm_max_evals=args.am_lm_evals)
        state, mani = am_fit(prep.train, r, cfg, prep.shift, prep.svd)
    else:
        raise ConfigError(f"unknown method {method!r}")
    return mani, trace, state, time.perf_counter() - t0


def _choose_gamma(prep: _Prepared, method: str, r: int, args, m: int, threads: int):
    grid = _gamma_grid(args.gamma_grid)
    if grid is None or method == "pca":
        return args.gamma, None
    if prep.val is None:
        raise ConfigError("--gamma-grid needs validation data (--val)")
    scores = score_gammas(lambda g: _fit_one(prep, method, r, g, args, m, threads)[0], prep.val, grid)
    best = pick_gamma(scores)
    log.info("%s r=%d: selected gamma %.1e", method, r, best)
    return best, scores


def _evaluate_one(mani: QuadraticManifold, enc: str, S, gn: GnConfig, sigma=None) -> EvalReport:
    if enc == "am":
        return relative_error(mani, "am", S, sigma=sigma, Z=am_encode(mani, S))
    return relative_error(mani, enc, S, gn=gn, sigma=sigma)


def _evaluate(prep: _Prepared, mani: QuadraticManifold, encoders, gn: GnConfig,
              fit_seconds: float) -> list[EvalReport]:
    reports = []
    for enc in encoders:
        rep = _evaluate_one(mani, enc, prep.test, gn, prep.test_sigma)
        rep.runtime_seconds = fit_seconds
        reports.append(rep)
    return reports


def _write_manifest(out: Path, args, extra: dict) -> None:
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    manifest = {
        "quadmani": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "command": cfg,
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    ds = load_dataset(args.dataset)
    elapsed = time.perf_counter() - t0
    for name in ("train", "val", "test"):
        write_matrix(getattr(ds, name), out / f"{name}.qmx")
    lines = [f"dataset = {ds.name}", f"center = {ds.center}"]
    lines += [f"{k} = {v}" for k, v in ds.config.items()]
    lines += [f"{name}_shape = {getattr(ds, name).shape[0]}x{getattr(ds, name).shape[1]}"
              for name in ("train", "val", "test")]
    lines.append(f"generation_seconds = {elapsed:.3f}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")
    print(f"wrote {out}/train.qmx val.qmx test.qmx ({ds.train.shape[0]} rows)")
    return EXIT_OK


def cmd_fit(args) -> int:
    threads = _threads(args)
    encoders = _encoders(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    ds, center = _load_data(args)
    m = args.m if args.m is not None else 10 * args.r
    with _thread_limit(threads):
        prep = _Prepared(ds, center, args.svd_rank)
        gamma, scores = _choose_gamma(prep, args.method, args.r, args, m, threads)
        mani, trace, state, secs = _fit_one(prep, args.method, args.r, gamma, args, m, threads)
        reports = _evaluate(prep, mani, encoders, _gn_config(args), secs)
        write_manifold(mani, out / "manifold.qmn")
        write_csv(out / "eval.csv", EvalReport.header(), [rep.row() for rep in reports])
        sv_rows = singular_value_report(prep.svd)
        write_csv(out / "singular_values.csv", ["index", "sigma", "cumulative_energy"], sv_rows)
        if trace is not None:
            write_csv(out / "trace.csv", ["iteration", "chosen", "objective", "candidates"], trace.rows())
        if scores is not None:
            write_csv(out / "gamma_scores.csv", ["gamma", "validation_objective"], scores)
        if state is not None:
            write_csv(out / "am_history.csv", ["outer_iteration", "objective", "misfit"],
                      [(i, o, f) for i, (o, f) in
                       enumerate(zip(state.objective_history, state.misfit_history))])
        corr = None
        if args.correlations is not None and args.method in ("leading", "greedy", "pca"):
            corr = correlation_matrix(mani, prep.train, prep.svd, args.correlations or None)
            _write_correlation(out, corr)
        if args.figures:
            from . import plots

            plots.singular_values(sv_rows, out / "singular_values.png")
            if corr is not None:
                plots.correlations(corr, out / "correlations.png", title=args.method)
            if state is not None:
                plots.am_convergence(state.objective_history, out / "am_history.png")
    _write_manifest(out, args, {
        "dataset_config": ds.config,
        "centered": center,
        "gamma": gamma,
        "selected": list(mani.selected),
        "timings": {"svd_seconds": prep.svd_seconds, "fit_seconds": secs},
        "am": None if state is None else {
            "outer_iterations": state.outer_iter,
            "stop_reason": state.stop_reason,
            "convergence_criterion": "relative change of the regularized outer objective",
            "unconverged_columns_last_sweep": state.unconverged_columns,
        },
    })
    for rep in reports:
        print(f"{rep.method} r={rep.r} encoder={rep.encoder} gamma={rep.gamma:.1e} "
              f"E_rel={rep.E_rel:.6e} bound={rep.lower_bound:.3e} time={rep.runtime_seconds:.2f}s")
    return EXIT_OK


def _write_correlation(out: Path, corr) -> None:
    header = ["row"] + corr.col_labels
    write_csv(out / "correlations.csv", header,
              ([q] + list(row) for q, row in zip(corr.row_index, corr.Ctilde)))
    write_csv(out / "correlations_pearson.csv", header,
              ([q] + list(row) for q, row in zip(corr.row_index, corr.pearson)))


def cmd_eval(args) -> int:
    threads = _threads(args)
    mani = read_manifold(args.manifold)
    raw = read_matrix(args.test)
    if raw.shape[0] != mani.n:
        raise ConfigError(f"test matrix has {raw.shape[0]} rows, manifold has n = {mani.n}")
    S = apply_shift(raw, mani.mean)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    with _thread_limit(threads):
        reports = [_evaluate_one(mani, enc, S, _gn_config(args)) for enc in _encoders(args)]
    for rep in reports:
        rep.runtime_seconds = 0.0
    write_csv(out / "eval.csv", EvalReport.header(), [rep.row() for rep in reports])
    for rep in reports:
        print(",".join(str(v) for v in rep.row()))
    return EXIT_OK


def cmd_diagnose(args) -> int:
    threads = _threads(args)
    mani = read_manifold(args.manifold)
    S = apply_shift(read_matrix(args.train), mani.mean)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    with _thread_limit(threads):
        svd = thin_svd(S, mani.svd_rank or None)
        sv_rows = singular_value_report(svd)
        write_csv(out / "singular_values.csv", ["index", "sigma", "cumulative_energy"], sv_rows)
        corr = correlation_matrix(mani, S, svd, args.rows or None)
        _write_correlation(out, corr)
    if args.figures:
        from . import plots

        plots.singular_values(sv_rows, out / "singular_values.png")
        plots.correlations(corr, out / "correlations.png")
    print(f"mean |C| = {corr.mean_abs():.4f} over {len(corr.row_index)} rows x {len(corr.col_labels)} features")
    return EXIT_OK


def cmd_sweep(args) -> int:
    threads = _threads(args)
    encoders = _encoders(args)
    methods = [s.strip() for s in args.method.split(",") if s.strip()]
    bad = [s for s in methods if s not in METHODS]
    if bad or not methods:
        raise ConfigError(f"unknown method(s) {bad}")
    rs = _r_list(args.r)
    if not rs or min(rs) < 1:
        raise ConfigError("r values must be positive")
    m = args.m if args.m is not None else 10 * max(rs)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    ds, center = _load_data(args)
    reports, timings = [], []
    with _thread_limit(threads):
        prep = _Prepared(ds, center, args.svd_rank)
        for method in methods:
            for r in rs:
                gamma, _ = _choose_gamma(prep, method, r, args, m, threads)
                mani, _, _, secs = _fit_one(prep, method, r, gamma, args, m, threads)
                reports += _evaluate(prep, mani, encoders if method != "pca" else ["linear"],
                                     _gn_config(args), secs)
                timings.append({"method": method, "r": r, "seconds": secs})
                log.info("%s r=%d done in %.2fs", method, r, secs)
    write_csv(out / "sweep.csv", EvalReport.header(), [rep.row() for rep in reports])
    if args.figures:
        from . import plots

        plots.error_sweep(reports, out / "sweep.png")
    _write_manifest(out, args, {"dataset_config": ds.config, "centered": center,
                                "m": m, "timings": timings, "svd_seconds": prep.svd_seconds})
    for rep in reports:
        print(f"{rep.method},{rep.r},{rep.encoder},{rep.E_rel:.6e}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "eval": cmd_eval,
    "diagnose": cmd_diagnose,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UnsupportedManifoldError) as exc:
        print(f"quadmani: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MatrixIOError, OSError) as exc:
        print(f"quadmani: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SingularSystemError, SvdError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"quadmani: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"quadmani: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
