# LCP Modulus Solver: command-line benchmark harness (solve / table / certify / gen)
import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from convergence_certifier import certify_problem
from lcp_errors import ConfigError, LcpError
from lcp_problem import LcpProblem, export_problem, generate, load_problem
from modulus_solver_engine import SolveReport, SolverConfig, StartPolicy, Status, solve
from sparse_matrix import read_vector
from splitting_methods import SplittingSpec, Variant, make_spec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MAX_ITERS = 2
EXIT_DIVERGED = 3
EXIT_NOT_CERTIFIED = 4

STATUS_EXIT = {Status.CONVERGED: EXIT_OK, Status.MAX_ITERS: EXIT_MAX_ITERS,
               Status.DIVERGED: EXIT_DIVERGED}

FAILED_CELL = "—"

DEFAULT_RUN = {
    "title": "Modulus method benchmark",
    "example": None,
    "matrix": None,
    "q": None,
    "m": None,
    "n": None,
    "delta": 4.0,
    "method": "namgs",
    "alpha": None,
    "beta": None,
    "omega": "diag",
    "r": None,
    "epsilon": 1e-5,
    "max_iters": 10000,
    "repeats": 3,
    "format": "md",
    "seed": 0,
    "history": False,
    "start": "alternating",
    "initial": None,
    "methods": [],
    "sizes": [],
    "ms": [],
    "xlsx": None,
    "pdf": None,
    "out": ".",
    "p_limit": 12,
    "dense_limit": 400,
}


@dataclass
class RunConfig:
    """Merged run configuration (flags over --config file over DEFAULT_RUN)"""

    title: str = DEFAULT_RUN["title"]
    example: Optional[int] = None
    matrix: Optional[str] = None
    q: Optional[str] = None
    m: Optional[int] = None
    n: Optional[int] = None
    delta: float = 4.0
    method: str = "namgs"
    alpha: Optional[float] = None
    beta: Optional[float] = None
    omega: str = "diag"
    r: Optional[float] = None
    epsilon: float = 1e-5
    max_iters: int = 10000
    repeats: int = 3
    format: str = "md"
    seed: int = 0
    history: bool = False
    start: str = "alternating"
    initial: Optional[str] = None
    methods: List[str] = field(default_factory=list)
    sizes: List[int] = field(default_factory=list)
    ms: List[int] = field(default_factory=list)
    xlsx: Optional[str] = None
    pdf: Optional[str] = None
    out: str = "."
    p_limit: int = 12
    dense_limit: int = 400

    def validate(self):
        if self.matrix or self.q:
            if self.example is not None:
                raise ConfigError("give either --example or --matrix/--q, not both")
            if not (self.matrix and self.q):
                raise ConfigError("--matrix and --q must be given together")
        elif self.example is None:
            self.example = 1
        if self.example is not None and int(self.example) not in (1, 2):
            raise ConfigError(f"--example must be 1 or 2, got {self.example}")
        if self.format not in ("csv", "md", "json"):
            raise ConfigError(f"--format must be csv, md or json, got {self.format}")
        if int(self.repeats) < 1:
            raise ConfigError(f"--repeats must be at least 1, got {self.repeats}")
        if self.start not in ("alternating", "zero"):
            raise ConfigError(f"--start must be alternating or zero, got {self.start}")
        return self

    def solver_config(self, n: int) -> SolverConfig:
        initial = None
        if self.initial:
            initial = read_vector(self.initial)
        return SolverConfig(epsilon=float(self.epsilon), max_iters=int(self.max_iters),
                            s0=StartPolicy(self.start), initial=initial,
                            record_history=bool(self.history))


class HarnessArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; 2 is reserved for MAX_ITERS here"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (flags override it)")
    common.add_argument("--example", type=int, choices=[1, 2], default=None)
    common.add_argument("--matrix", default=None, help="Matrix Market file for A")
    common.add_argument("--q", default=None, help="vector file for q")
    common.add_argument("--m", type=int, default=None, help="block size (n = m*m)")
    common.add_argument("--n", type=int, default=None, help="problem size, a perfect square")
    common.add_argument("--delta", type=float, default=None)
    common.add_argument("--method", default=None, help=", ".join(v.value for v in Variant))
    common.add_argument("--alpha", type=float, default=None)
    common.add_argument("--beta", type=float, default=None)
    common.add_argument("--omega", default=None,
                        help="diag[:C] | mdiag:C | bench | identity | scalar:V | file:PATH")
    common.add_argument("--r", type=float, default=None)
    common.add_argument("--eps", dest="epsilon", type=float, default=None)
    common.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    common.add_argument("--repeats", type=int, default=None)
    common.add_argument("--format", choices=["csv", "md", "json"], default=None)
    common.add_argument("--start", choices=["alternating", "zero"], default=None)
    common.add_argument("--initial", default=None, help="vector file with the starting s")
    common.add_argument("--history", action="store_true", default=None)
    common.add_argument("--verbose", "-v", action="store_true", default=False)

    parser = HarnessArgumentParser(description="Modulus-based LCP solver benchmark harness")
    sub = parser.add_subparsers(dest="command", parser_class=HarnessArgumentParser)
    sub.required = True

    sub.add_parser("solve", parents=[common], help="run one solve and print its row")

    table = sub.add_parser("table", parents=[common], help="method x size sweep")
    table.add_argument("--methods", default=None,
                       help="comma list, e.g. mgs,namgs,msor:0.85,namaor:0.9:0.8")
    table.add_argument("--sizes", default=None, help="comma list of n (perfect squares)")
    table.add_argument("--ms", default=None, help="comma list of m")
    table.add_argument("--title", default=None)
    table.add_argument("--xlsx", default=None, help="also write the table to this workbook")
    table.add_argument("--pdf", default=None, help="also write the table to this PDF")

    cert = sub.add_parser("certify", parents=[common], help="print the certification report")
    cert.add_argument("--p-limit", dest="p_limit", type=int, default=None)
    cert.add_argument("--dense-limit", dest="dense_limit", type=int, default=None)

    gen = sub.add_parser("gen", parents=[common], help="write an example problem as .mtx files")
    gen.add_argument("--out", default=None, help="output directory")
    return parser


def load_config(path: str) -> Dict:
    try:
        with open(path, "r") as f:
            obj = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}")
    if not isinstance(obj, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
    return obj


def _split_list(text, cast=str) -> list:
    if text is None:
        return []
    if isinstance(text, (list, tuple)):
        items = list(text)
    else:
        items = [t for t in str(text).split(",") if t.strip()]
    try:
        return [cast(t.strip()) if isinstance(t, str) else cast(t) for t in items]
    except ValueError as exc:
        raise ConfigError(f"bad list entry: {exc}")


def merge_config(args: argparse.Namespace) -> RunConfig:
    """DEFAULT_RUN, then the --config file, then explicit flags"""
    merged = dict(DEFAULT_RUN)
    if getattr(args, "config", None):
        merged.update(load_config(args.config))
    flags = vars(args)
    # a problem source named on the command line replaces the file's source
    if flags.get("matrix") is not None or flags.get("q") is not None:
        merged["example"] = None
    if flags.get("example") is not None:
        merged["matrix"] = merged["q"] = None
    for key, value in flags.items():
        if key in merged and value is not None:
            merged[key] = value
    merged["methods"] = _split_list(merged["methods"])
    merged["sizes"] = _split_list(merged["sizes"], int)
    merged["ms"] = _split_list(merged["ms"], int)
    return RunConfig(**merged).validate()


# -- problem and splitting ----------------------------------------------------

def block_size(m: Optional[int], n: Optional[int]) -> int:
    if n is not None:
        root = math.isqrt(int(n))
        if root * root != int(n):
            raise ConfigError(f"--n must be a perfect square for the example families, got {n}")
        if m is not None and int(m) != root:
            raise ConfigError(f"--m {m} and --n {n} disagree")
        return root
    return int(m) if m is not None else 10


def build_problem(cfg: RunConfig, m: Optional[int] = None) -> LcpProblem:
    if cfg.matrix:
        return load_problem(cfg.matrix, cfg.q)
    return generate(int(cfg.example), m if m is not None else block_size(cfg.m, cfg.n), cfg.delta)


def parse_method_entry(entry) -> Tuple[Variant, Optional[float], Optional[float]]:
    """'namsor:0.88' -> (NAMSOR, 0.88, None); dicts with method/alpha/beta also accepted"""
    if isinstance(entry, dict):
        return (Variant.parse(entry.get("method", "")), entry.get("alpha"), entry.get("beta"))
    parts = str(entry).split(":")
    variant = Variant.parse(parts[0])
    try:
        alpha = float(parts[1]) if len(parts) > 1 and parts[1] else None
        beta = float(parts[2]) if len(parts) > 2 and parts[2] else None
    except ValueError:
        raise ConfigError(f"bad method entry '{entry}'")
    return variant, alpha, beta


def method_label(variant: Variant, alpha: Optional[float], beta: Optional[float]) -> str:
    if variant.needs_beta:
        return f"{variant.value.upper()}({alpha:g},{beta:g})"
    if variant.needs_alpha:
        return f"{variant.value.upper()}({alpha:g})"
    return variant.value.upper()


def build_spec(problem: LcpProblem, variant: Variant, alpha, beta, cfg: RunConfig) -> SplittingSpec:
    if variant.needs_alpha and alpha is None:
        raise ConfigError(f"{variant.value} requires --alpha")
    if variant.needs_beta and beta is None:
        raise ConfigError(f"{variant.value} requires --beta")
    return make_spec(variant, problem.A, omega=cfg.omega, alpha=alpha, beta=beta, r=cfg.r)


def timed_solve(problem: LcpProblem, spec: SplittingSpec, cfg: RunConfig) -> Tuple[SolveReport, float]:
    """First report plus the median wall time over cfg.repeats runs"""
    solver_cfg = cfg.solver_config(problem.n)
    report = solve(problem, spec, solver_cfg)
    times = [report.wall_time]
    for _ in range(int(cfg.repeats) - 1):
        times.append(solve(problem, spec, solver_cfg).wall_time)
    return report, float(np.median(times))


# -- formatting ---------------------------------------------------------------

def format_residual(value: float) -> str:
    """Two significant digits in e-notation, e.g. 9.7e-06"""
    return f"{value:.1e}"


def render_markdown(df: pd.DataFrame) -> str:
    header = [str(c) for c in df.columns]
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    for row in df.itertuples(index=False):
        lines.append("| " + " | ".join(str(v) for v in row) + " |")
    return "\n".join(lines)


def emit(df: pd.DataFrame, fmt: str, md_df: Optional[pd.DataFrame] = None) -> str:
    if fmt == "csv":
        return df.to_csv(index=False).rstrip("\n")
    if fmt == "json":
        return json.dumps(df.to_dict(orient="records"), indent=2)
    return render_markdown(md_df if md_df is not None else df)


def export_table(title: str, df: pd.DataFrame, xlsx_path: Optional[str] = None,
                 pdf_path: Optional[str] = None):
    """Workbook and/or PDF copy of a benchmark table"""
    if xlsx_path:
        from openpyxl import Workbook
        from openpyxl.styles import Alignment, Font

        wb = Workbook(); ws = wb.active; ws.title = "Benchmark"
        ws.append([str(c) for c in df.columns])
        for c in range(1, len(df.columns) + 1):
            cell = ws.cell(row=1, column=c)
            cell.font = Font(bold=True); cell.alignment = Alignment(horizontal="center", vertical="center")
        for row in df.itertuples(index=False):
            ws.append([v.item() if isinstance(v, np.generic) else v for v in row])
        wb.save(xlsx_path)
        print(f"[OK] wrote {xlsx_path}", file=sys.stderr)
    if pdf_path:
        from reportlab.lib.pagesizes import landscape, letter
        from reportlab.lib.styles import getSampleStyleSheet
        from reportlab.platypus import Paragraph, SimpleDocTemplate, Table

        styles = getSampleStyleSheet()
        data = [[str(c) for c in df.columns]] + [[str(v) for v in row] for row in df.itertuples(index=False)]
        pdf = SimpleDocTemplate(pdf_path, pagesize=landscape(letter))
        pdf.build([Paragraph(title, styles["Title"]), Table(data)])
        print(f"[OK] wrote {pdf_path}", file=sys.stderr)


# -- subcommands --------------------------------------------------------------

def cmd_solve(cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    variant = Variant.parse(cfg.method)
    spec = build_spec(problem, variant, cfg.alpha, cfg.beta, cfg)
    report, cpu = timed_solve(problem, spec, cfg)

    row = {"method": variant.value, "n": problem.n, "alpha": cfg.alpha,
           "IT": report.iterations, "CPU": cpu, "Res": report.final_residual,
           "status": report.status.value}
    if cfg.format == "json":
        payload = dict(row)
        payload.update({k: v for k, v in report.to_dict().items() if k == "residual_history"})
        print(json.dumps(payload, indent=2))
    else:
        df = pd.DataFrame([row])
        md = df.copy()
        md["CPU"] = md["CPU"].map(lambda t: f"{t:.4f}")
        md["Res"] = md["Res"].map(format_residual)
        md["alpha"] = md["alpha"].map(lambda a: "" if a is None or pd.isna(a) else f"{a:g}")
        print(emit(df, cfg.format, md))
        if cfg.history and report.residual_history is not None:
            for k, res in enumerate(report.residual_history):
                print(f"{k}\t{res!r}")

    tag = "[OK]" if report.converged else "[ERROR]"
    print(f"{tag} {variant.value} on {problem.name}: {report.status.value} "
          f"after {report.iterations} iterations", file=sys.stderr)
    return STATUS_EXIT[report.status]


def sweep_sizes(cfg: RunConfig) -> List[int]:
    if cfg.matrix:
        return [None]
    ms = [block_size(None, n) for n in cfg.sizes] + [int(m) for m in cfg.ms]
    if not ms and (cfg.m is not None or cfg.n is not None):
        ms = [block_size(cfg.m, cfg.n)]
    return ms


def resolve_entries(cfg: RunConfig) -> List[Tuple[Variant, Optional[float], Optional[float]]]:
    """Method entries with missing alpha/beta taken from --alpha/--beta"""
    resolved = []
    for entry in cfg.methods:
        variant, alpha, beta = parse_method_entry(entry)
        if variant.needs_alpha and alpha is None:
            alpha = cfg.alpha
        if variant.needs_beta and beta is None:
            beta = cfg.beta
        if variant.needs_alpha and alpha is None:
            raise ConfigError(f"{variant.value} requires --alpha (or method:alpha)")
        if variant.needs_beta and beta is None:
            raise ConfigError(f"{variant.value} requires --beta (or method:alpha:beta)")
        resolved.append((variant, alpha, beta))
    return resolved


def run_table(cfg: RunConfig) -> pd.DataFrame:
    """Rows method x (IT, CPU, Res), one column per problem size"""
    entries = resolve_entries(cfg)
    ms = sweep_sizes(cfg)
    if not entries or not ms:
        raise ConfigError("table needs at least one method and one size")

    problems = {m: build_problem(cfg, m) for m in ms}
    columns = [f"n={problems[m].n}" for m in ms]
    rows = []
    for variant, alpha, beta in entries:
        label = method_label(variant, alpha, beta)
        cells = {"IT": {}, "CPU": {}, "Res": {}}
        for m, col in zip(ms, columns):
            problem = problems[m]
            try:
                spec = build_spec(problem, variant, alpha, beta, cfg)
                report, cpu = timed_solve(problem, spec, cfg)
                status = report.status
            except LcpError as exc:
                logger.warning("%s on %s failed: %s", label, problem.name, exc)
                report, cpu, status = None, None, None
            if status is Status.CONVERGED:
                cells["IT"][col] = report.iterations
                cells["CPU"][col] = cpu
                cells["Res"][col] = report.final_residual
            else:
                marker = f"{FAILED_CELL}({status.value if status else 'ERROR'})"
                for metric in cells:
                    cells[metric][col] = marker
        for metric in ("IT", "CPU", "Res"):
            row = {"Method": label, "Metric": metric}
            row.update(cells[metric])
            rows.append(row)
    return pd.DataFrame(rows, columns=["Method", "Metric"] + columns)


def _markdown_cells(df: pd.DataFrame) -> pd.DataFrame:
    md = df.copy().astype(object)
    for idx, metric in md["Metric"].items():
        for col in md.columns[2:]:
            value = md.at[idx, col]
            if isinstance(value, str):
                continue
            if metric == "CPU":
                md.at[idx, col] = f"{value:.4f}"
            elif metric == "Res":
                md.at[idx, col] = format_residual(value)
            else:
                md.at[idx, col] = str(int(value))
    return md


def cmd_table(cfg: RunConfig) -> int:
    df = run_table(cfg)
    print(emit(df, cfg.format, _markdown_cells(df)))
    if cfg.xlsx or cfg.pdf:
        export_table(cfg.title, _markdown_cells(df), cfg.xlsx, cfg.pdf)
    return EXIT_OK


def cmd_certify(cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    variant = Variant.parse(cfg.method)
    spec = build_spec(problem, variant, cfg.alpha, cfg.beta, cfg)
    report = certify_problem(problem.A, spec, p_limit=int(cfg.p_limit),
                             dense_limit=int(cfg.dense_limit))
    payload = report.to_dict()
    payload.update({"problem": problem.name, "splitting": spec.describe()})
    print(json.dumps(payload, indent=2))
    if report.certified:
        print(f"[OK] {variant.value} on {problem.name}: convergence certified", file=sys.stderr)
        return EXIT_OK
    print(f"[ERROR] {variant.value} on {problem.name}: not certified", file=sys.stderr)
    return EXIT_NOT_CERTIFIED


def cmd_gen(cfg: RunConfig) -> int:
    if cfg.matrix:
        raise ConfigError("gen writes the example families; use --example, not --matrix")
    problem = build_problem(cfg)
    a_path, q_path = export_problem(problem, cfg.out, stem=problem.name)
    print(f"[OK] wrote {a_path} and {q_path}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "table": cmd_table, "certify": cmd_certify, "gen": cmd_gen}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"[ERROR] {exc}", file=sys.stderr)
        return EXIT_CONFIG

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = merge_config(args)
        return COMMANDS[args.command](cfg)
    except (LcpError, OSError) as exc:
        print(f"[ERROR] {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
