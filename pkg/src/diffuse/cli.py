"""Command-line interface.

Exit codes: 0 success, 1 input or validation error, 2 no convergence within
the step budget. ``DIFFUSE_LOG=quiet|info|debug`` sets the diagnostic level
on standard error.
"""

from __future__ import annotations

import argparse
import logging
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import kernels
from .io import (
    FIXTURES,
    Normalization,
    ParseError,
    make_fixture,
    matrix_to_edge_list,
    read_edge_list,
    read_matrix_market,
    read_vector,
    to_matrix,
    write_edge_list,
    write_matrix_market,
    write_trace_csv,
    write_vector,
)
from .scheduling import read_schedule
from .solvers import (
    DENSE_CAP,
    ColumnSumError,
    SolveConfig,
    emulate_power_iteration,
    jacobi_baseline,
    power_iteration_linear,
    snake_oscillation_demo,
    solve_eigen_diplus,
    solve_linear,
)

log = logging.getLogger("diffuse")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_BUDGET = 2

BENCH_METHODS = ("diffusion-greedy", "diffusion-cyclic", "power", "jacobi")


class InputError(Exception):
    """Bad flag or input file; reported with exit code 1."""


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors (exit 1); 2 is reserved for non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _setup_logging():
    level = {
        "quiet": logging.WARNING,
        "info": logging.INFO,
        "debug": logging.DEBUG,
    }.get(os.environ.get("DIFFUSE_LOG", "quiet").strip().lower(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


# -- input helpers -------------------------------------------------------------------------


def _detect_format(path):
    suffix = Path(path).suffix.lower()
    if suffix == ".mtx":
        return "mtx"
    if suffix in (".edges", ".el", ".txt", ".edgelist"):
        return "edges"
    try:
        with open(path) as fh:
            first = fh.readline()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if first.startswith("%%MatrixMarket"):
        return "mtx"
    raise InputError(f"cannot detect the format of {path}; pass --format mtx|edges")


def _normalization(args):
    damping = getattr(args, "damping", None)
    patch = getattr(args, "patch_dangling", None)
    if damping is not None:
        if not 0 < damping < 1:
            raise InputError(f"--damping must lie in (0, 1), got {damping}")
        return Normalization.damped(damping, patch)
    if getattr(args, "normalize", "none") == "stochastic":
        return Normalization("stochastic", None, patch)
    return Normalization()


def load_matrix(source, fmt="auto", mode=Normalization()):
    """Load ``source`` (a path or ``fixture:NAME``); returns ``(matrix, b, dangling)``."""
    b = None
    if source.startswith("fixture:"):
        try:
            m, b = make_fixture(source[len("fixture:"):])
        except ValueError as exc:
            raise InputError(f"--matrix: {exc}") from None
        el = None
    else:
        if not os.path.exists(source):
            raise InputError(f"--matrix: no such file: {source}")
        fmt = _detect_format(source) if fmt == "auto" else fmt
        try:
            if fmt == "mtx":
                m, el = read_matrix_market(source), None
            else:
                el = read_edge_list(source)
                m = None
        except ParseError as exc:
            raise InputError(str(exc)) from None
        except OSError as exc:
            raise InputError(f"cannot read {source}: {exc.strerror}") from None
    if el is None:
        if mode.kind == "none":
            return m, b, [int(i) for i in np.flatnonzero(m.col_sums == 0)]
        el = matrix_to_edge_list(m)
    m, dangling = to_matrix(el, mode)
    return m, b, dangling


def _vector_arg(value, n, flag, damping=None):
    if value == "uniform":
        if damping is not None:
            return np.full(n, (1.0 - damping) / n)
        return np.full(n, 1.0 / n)
    if value.startswith("file:"):
        path = value[len("file:"):]
        try:
            return read_vector(path, n)
        except ParseError as exc:
            raise InputError(f"{flag}: {exc}") from None
        except OSError as exc:
            raise InputError(f"{flag}: cannot read {path}: {exc.strerror}") from None
    raise InputError(f"{flag} must be 'uniform' or 'file:<path>', got {value!r}")


def _fmt_norms(state):
    f = state.fluid
    linf = float(np.max(np.abs(f))) if f.size else 0.0
    return f"|F|_1={state.fluid_l1:.6e}  |F|_inf={linf:.6e}  sigma_v(F)={float(state.acc[1]):.6e}"


# -- commands ----------------------------------------------------------------------------------


def cmd_solve(args):
    mode = _normalization(args)
    m, fixture_b, dangling = load_matrix(args.matrix, args.format, mode)
    if dangling:
        log.info("%d dangling column(s) left as zeros", len(dangling))
    if args.b == "fixture":
        if fixture_b is None:
            raise InputError("--b fixture: this fixture has no right-hand side")
        b = fixture_b
    else:
        b = _vector_arg(args.b, m.n, "--b", args.damping)
    if np.any(b < 0):
        raise InputError("--b must be nonnegative")
    script = None
    scheduler = args.scheduler
    if args.schedule:
        if args.scheduler not in (None, "scripted"):
            raise InputError("--schedule conflicts with --scheduler " + args.scheduler)
        try:
            script = read_schedule(args.schedule)
        except (OSError, ValueError) as exc:
            raise InputError(f"--schedule: {exc}") from None
        scheduler = "scripted"
    scheduler = scheduler or "greedy"
    try:
        cfg = SolveConfig(epsilon=args.eps, norm=args.norm, max_steps=args.max_steps, scheduler=scheduler,
                          invariant_check_every=args.check_invariant_every, trace_every=args.trace_every,
                          seed=args.seed, script=script, backend=args.backend)
        report = solve_linear(m, b, cfg)
    except (ValueError, IndexError) as exc:
        raise InputError(str(exc)) from None
    print(f"n={m.n} nnz={m.nnz} scheduler={cfg.scheduler.value} backend={kernels.get_backend(args.backend).BACKEND}")
    print(f"steps used: {report.steps_used}  status: {report.status}")
    print(f"final fluid: {_fmt_norms(report.state)}")
    print(f"backward residual |X - P X - B|_inf: {report.backward_residual:.6e}")
    if args.out:
        write_vector(report.solution, args.out)
    if args.trace:
        write_trace_csv(report.trace, args.trace)
    return EXIT_OK if report.converged else EXIT_BUDGET


def cmd_eigen(args):
    m, _, _ = load_matrix(args.matrix, args.format)
    experimental = args.scheduler == "positive-experimental"
    if experimental:
        print("warning: positive-only DI+ is experimental; its convergence is only conjectured",
              file=sys.stderr)
    try:
        cfg = SolveConfig(epsilon=args.eps, max_steps=args.max_steps, scheduler=args.scheduler,
                          experimental=experimental, trace_every=args.trace_every, backend=args.backend)
        report = solve_eigen_diplus(m, cfg)
    except ColumnSumError as exc:
        lines = [f"  column {i}: sum = {exc.col_sums[i]:.17g}" for i in exc.bad_columns]
        raise InputError("column sums must equal 1 (within 1e-9):\n" + "\n".join(lines)) from None
    x = report.solution
    amounts = report.trace.column("diffused_amount")
    print(f"n={m.n} nnz={m.nnz} scheduler={cfg.scheduler.value}")
    print(f"steps used: {report.steps_used}  status: {report.status}"
          f"  oscillation: {'yes' if report.oscillation_detected else 'no'}")
    print(f"final fluid: {_fmt_norms(report.state)}")
    if amounts.size:
        print(f"sampled diffusions: {amounts.size}  min amount {amounts.min():.3e}  max amount {amounts.max():.3e}")
    print(f"eigen residual |P x - x|_inf: {report.backward_residual:.6e}")
    top = np.argsort(-x, kind="stable")[:10]
    print("largest entries (L1-normalized):")
    for i in top:
        print(f"  {i:>8d}  {x[i]:.17g}")
    if args.out:
        write_vector(x, args.out)
    if args.trace:
        write_trace_csv(report.trace, args.trace)
    return EXIT_OK if report.converged else EXIT_BUDGET


def cmd_emulate(args):
    m, _, _ = load_matrix(args.matrix, args.format)
    if m.n > DENSE_CAP:
        raise InputError(f"emulate compares against a dense oracle capped at n <= {DENSE_CAP}; got n = {m.n}")
    if args.cycles < 0:
        raise InputError("--cycles must be nonnegative")
    x0 = _vector_arg(args.x0, m.n, "--x0")
    if np.any(x0 < 0):
        raise InputError("--x0 must be nonnegative")
    try:
        result = emulate_power_iteration(m, x0, args.cycles)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    dense = m.to_dense()
    expected = x0.copy()
    worst = 0.0
    for k, vec in enumerate(result.vectors):
        scale = max(float(np.max(np.abs(expected))), np.finfo(float).tiny) if expected.size else 1.0
        dev = float(np.max(np.abs(vec - expected))) / scale if expected.size else 0.0
        worst = max(worst, dev)
        alpha_max = float(np.max(result.alphas[k - 1])) if k and m.n else 0.0
        print(f"cycle {k:>4d}  max relative deviation {dev:.3e}  max alpha {alpha_max:.6f}")
        expected = dense @ expected
    ok = worst <= 1e-10
    print(f"{'OK' if ok else 'FAIL'}: worst deviation {worst:.3e} (limit 1e-10)")
    return EXIT_OK if ok else EXIT_INPUT


def _bench_once(method, m, b, eps, backend):
    t0 = time.perf_counter()
    if method == "diffusion-greedy" or method == "diffusion-cyclic":
        kind = "greedy" if method == "diffusion-greedy" else "cyclic"
        cfg = SolveConfig(epsilon=eps, scheduler=kind, trace_every=0, detect_oscillation=False, backend=backend)
        r = solve_linear(m, b, cfg)
        count, touches, ok = r.steps_used, r.column_touches, r.converged
    elif method == "power":
        r = power_iteration_linear(m, b, tol=eps)
        count, touches, ok = r.iterations, r.column_touches, r.converged
    else:
        r = jacobi_baseline(m, b, tol=eps)
        count, touches, ok = r.iterations, r.column_touches, r.converged
    return count, touches, ok, time.perf_counter() - t0


def cmd_bench(args):
    methods = [s.strip() for s in args.methods.split(",") if s.strip()]
    unknown = [s for s in methods if s not in BENCH_METHODS]
    if unknown or not methods:
        raise InputError(f"--methods: unknown method(s) {unknown}; choose from {', '.join(BENCH_METHODS)}")
    if args.repeat < 1:
        raise InputError("--repeat must be at least 1")
    m, _, _ = load_matrix(args.matrix, args.format, _normalization(args))
    b = _vector_arg(args.b, m.n, "--b", args.damping)
    rows = []
    for method in methods:
        if args.parallel and args.repeat > 1:
            with ThreadPoolExecutor() as pool:
                runs = list(pool.map(lambda _: _bench_once(method, m, b, args.eps, args.backend),
                                     range(args.repeat)))
        else:
            runs = [_bench_once(method, m, b, args.eps, args.backend) for _ in range(args.repeat)]
        count, touches, ok, _ = runs[0]
        rows.append((method, count, touches, ok, statistics.median(r[3] for r in runs)))
    print(f"n={m.n} nnz={m.nnz} eps={args.eps:g} repeats={args.repeat}")
    print(f"{'method':<18} {'steps/iters':>12} {'column touches':>15} {'converged':>10} {'median time [s]':>16}")
    for method, count, touches, ok, t in rows:
        print(f"{method:<18} {count:>12d} {touches:>15d} {str(ok):>10} {t:>16.6f}")
    print("note: wall times are machine-dependent; column touches are the portable measure")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("method,steps_or_iterations,column_touches,converged,median_wall_time_s\n")
            for method, count, touches, ok, t in rows:
                fh.write(f"{method},{count},{touches},{ok},{t:.17g}\n")
    return EXIT_OK


def cmd_snake_demo(args):
    report = snake_oscillation_demo(max_steps=args.max_steps, backend=args.backend)
    mixed, neg = report.mixed, report.negative
    print("snake configuration: 0->1, 0->2 (0.5 each); 1->3, 2->4, 3->0, 4->0 (1.0)")
    print(f"mixed-sign sweep (order 4,3,2,1,0): steps {mixed.steps_used}, |F|_1 {report.mixed_initial_norm:.6g}"
          f" -> {mixed.final_fluid_norm:.6g}, oscillation {'detected' if report.oscillation_detected else 'not detected'}")
    print(f"negative-only: steps {neg.steps_used}, status {neg.status}, H monotone "
          f"{'yes' if report.negative_history_monotone else 'no'}")
    print("eigenvector: " + " ".join(f"{v:.12g}" for v in neg.solution))
    out = Path(args.trace_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(mixed.trace, out / "snake_mixed.csv")
    write_trace_csv(neg.trace, out / "snake_negative.csv")
    if report.succeeded:
        return EXIT_OK
    print("inconclusive: oscillation not detected or negative-only run unfinished within --max-steps",
          file=sys.stderr)
    return EXIT_BUDGET


def _guess_out_format(path, flag):
    suffix = Path(path).suffix.lower()
    if suffix == ".mtx":
        return "mtx"
    if suffix in (".edges", ".el", ".txt", ".edgelist"):
        return "edges"
    raise InputError(f"{flag}: cannot tell the format of {path} from its extension (.mtx or .edges)")


def cmd_convert(args):
    out_fmt = args.out_format or _guess_out_format(args.out, "--out")
    in_fmt = args.in_format
    m, _, dangling = load_matrix(args.inp, in_fmt, _normalization(args))
    if Path(args.inp).resolve() == Path(args.out).resolve():
        raise InputError("--out must differ from --in")
    if out_fmt == "mtx":
        write_matrix_market(m, args.out)
    else:
        write_edge_list(matrix_to_edge_list(m), args.out)
    print(f"wrote {args.out}: n={m.n} nnz={m.nnz} dangling={len(dangling)}")
    return EXIT_OK


def cmd_fixtures(args):
    if args.list or not args.name:
        for name in sorted(FIXTURES):
            print(name)
        return EXIT_OK
    m, b, _ = load_matrix("fixture:" + args.name)
    if not args.out:
        print(m.to_dense() if m.n <= 20 else m)
        return EXIT_OK
    fmt = args.out_format or _guess_out_format(args.out, "--out")
    if fmt == "mtx":
        write_matrix_market(m, args.out)
    else:
        write_edge_list(matrix_to_edge_list(m), args.out)
    if args.b_out and b is not None:
        write_vector(b, args.b_out)
    print(f"wrote {args.out}: n={m.n} nnz={m.nnz}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------------------------


def _matrix_flags(p):
    p.add_argument("--matrix", required=True, help="path to .mtx/edge list, or fixture:NAME")
    p.add_argument("--format", choices=("auto", "mtx", "edges"), default="auto")


def _backend_flag(p):
    p.add_argument("--backend", choices=("compiled", "python"), default=None,
                   help="kernel backend (default: compiled when available)")


def build_parser():
    parser = _Parser(prog="diffuse", description="Diffusion-operator fixed-point solvers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve X = P X + B")
    _matrix_flags(p)
    p.add_argument("--damping", type=float, help="column-normalize, then scale by d (B uniform = (1-d) e)")
    p.add_argument("--normalize", choices=("none", "stochastic"), default="none")
    p.add_argument("--patch-dangling", choices=("uniform",), default=None)
    p.add_argument("--b", default="uniform", help="uniform | file:<path> | fixture")
    p.add_argument("--scheduler", choices=("cyclic", "greedy", "threshold", "random", "scripted"))
    p.add_argument("--schedule", help="scripted schedule file ('node alpha' per line)")
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--norm", choices=("l1", "linf", "sigma_v"), default="l1")
    p.add_argument("--max-steps", type=int, default=10_000_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--check-invariant-every", type=int, default=0)
    p.add_argument("--trace", help="write the convergence trace CSV here")
    p.add_argument("--trace-every", type=int, default=100)
    p.add_argument("--out", help="write the solution, one value per line")
    _backend_flag(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eigen", help="dominant eigenvector by DI+")
    _matrix_flags(p)
    p.add_argument("--scheduler", choices=("negative", "positive-experimental"), default="negative")
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--max-steps", type=int, default=10_000_000)
    p.add_argument("--trace")
    p.add_argument("--trace-every", type=int, default=100)
    p.add_argument("--out")
    _backend_flag(p)
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("emulate", help="reproduce power iteration with partial diffusions")
    _matrix_flags(p)
    p.add_argument("--x0", default="uniform", help="uniform | file:<path>")
    p.add_argument("--cycles", type=int, required=True)
    p.set_defaults(func=cmd_emulate)

    p = sub.add_parser("bench", help="compare diffusion against power iteration / Jacobi")
    _matrix_flags(p)
    p.add_argument("--methods", default=",".join(BENCH_METHODS))
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--damping", type=float)
    p.add_argument("--normalize", choices=("none", "stochastic"), default="none")
    p.add_argument("--patch-dangling", choices=("uniform",), default=None)
    p.add_argument("--b", default="uniform")
    p.add_argument("--csv")
    p.add_argument("--parallel", action="store_true", help="run repeats concurrently")
    _backend_flag(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("snake-demo", help="oscillation vs negative-only convergence on the snake graph")
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--trace-dir", default=".")
    _backend_flag(p)
    p.set_defaults(func=cmd_snake_demo)

    p = sub.add_parser("convert", help="convert between edge lists and Matrix Market")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--in-format", choices=("auto", "mtx", "edges"), default="auto")
    p.add_argument("--out-format", choices=("mtx", "edges"))
    p.add_argument("--normalize", choices=("none", "stochastic"), default="none")
    p.add_argument("--damping", type=float)
    p.add_argument("--patch-dangling", choices=("uniform",), default=None)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("fixtures", help="list or export built-in fixtures")
    p.add_argument("--list", action="store_true")
    p.add_argument("--name", help="e.g. snake, rank1, 'random_ergodic(50,7)'")
    p.add_argument("--out")
    p.add_argument("--out-format", choices=("mtx", "edges"))
    p.add_argument("--b-out", help="also write the fixture's right-hand side")
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None):
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
