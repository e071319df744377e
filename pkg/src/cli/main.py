"""
mazyalab command line.

Every subcommand reads a YAML run configuration, writes its outputs under
--out (default: output.directory of the config) and exits with 0 when
done, 2 when any report FAILs and 1 on errors.
"""

import functools
import json
import logging
import math
from collections import Counter
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import click
from rich.console import Console
from rich.table import Table

from src.engine import __version__
from src.engine.audit.audit_logger import AuditLogger
from src.engine.config import (RunConfig, build_band_range, build_grid, build_kernel, build_options, build_phi,
                               build_plan, build_quadrature, build_settings, config_digest, get_config_summary,
                               load_config, with_seed)
from src.engine.errors import MazyaLabError
from src.engine.extremize import FamilySpec, constant_table, search
from src.engine.gridfn import l1_norm, load_grid_function, save_grid_function
from src.engine.kernel import convolve, effective_lo
from src.engine.phi import check_cancellation
from src.engine.report.export import ReportExporter
from src.engine.report.plots import plot_reports
from src.engine.verify.probe import cancellation_necessity_probe
from src.engine.verify.report import InequalityReport, Verdict
from src.engine.verify.suite import SuiteRunner

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2


# ============================================================================
# HELPERS
# ============================================================================

def _handle_errors(command: Callable) -> Callable:
    """Turn domain and file errors into click errors (exit code 1)."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (MazyaLabError, FileNotFoundError) as e:
            logger.error(f"{type(e).__name__}: {e}")
            raise click.ClickException(f"{type(e).__name__}: {e}")
    return wrapper


def run_options(command: Callable) -> Callable:
    options = [
        click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
                     help="YAML run configuration."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                     help="Output directory (default: output.directory)."),
        click.option("--seed", type=int, default=None, help="Replace every seed of the configuration."),
        click.option("--threads", type=click.IntRange(min=1), default=None, envvar="MAZYALAB_THREADS",
                     help="Worker threads (default: suite.threads)."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


class RunContext:
    """Loaded configuration plus everything derived from it for one command."""

    def __init__(self, command: str, config_path: str, out_dir: Optional[str], seed: Optional[int],
                 threads: Optional[int]):
        self.command = command
        self.config: RunConfig = with_seed(load_config(config_path), seed)
        self.digest = config_digest(self.config)
        self.out = Path(out_dir or self.config.output.directory)
        self.threads = threads or self.config.suite.threads
        self.audit = AuditLogger(log_dir=str(self.out / "audit"))
        self.audit.log_run_start(self.digest, command, self.digest)
        summary = get_config_summary(self.config)
        logger.info(f"{command}: " + ", ".join(f"{k}={v}" for k, v in summary.items()))

    def wants(self, fmt: str) -> bool:
        return fmt in self.config.output.formats

    def finish(self, reports: Sequence[InequalityReport]) -> int:
        verdicts = Counter(r.verdict.value for r in reports)
        failed = verdicts.get(Verdict.FAIL.value, 0) > 0
        self.audit.log_run_complete(len(reports), "failed" if failed else "completed", dict(sorted(verdicts.items())))
        if self.config.output.audit:
            self.audit.save_to_file()
        return EXIT_FAIL if failed else EXIT_OK


def _console() -> Console:
    return Console(highlight=False)


def _print_summary(title: str, reports: Sequence[InequalityReport]) -> None:
    """Verdict counts and the largest finite ratio per statement."""
    table = Table(title=title)
    table.add_column("statement")
    for verdict in Verdict:
        table.add_column(verdict.value, justify="right")
    table.add_column("max ratio", justify="right")
    by_statement = {}
    for r in reports:
        by_statement.setdefault(r.statement_id, []).append(r)
    for statement in sorted(by_statement):
        rows = by_statement[statement]
        counts = Counter(r.verdict for r in rows)
        finite = [r.ratio for r in rows if math.isfinite(r.ratio)]
        table.add_row(statement, *(str(counts.get(v, 0)) for v in Verdict),
                      f"{max(finite):.6g}" if finite else "-")
    _console().print(table)


def _write_reports(ctx: RunContext, reports: List[InequalityReport], name: str) -> None:
    df = ReportExporter.reports_frame(reports, ctx.digest)
    if ctx.wants("csv"):
        ReportExporter.to_csv(df, ctx.out / name)
    if ctx.wants("svg"):
        plot_reports(df, ctx.out)


# ============================================================================
# COMMANDS
# ============================================================================

@click.group()
@click.version_option(__version__, prog_name="mazyalab")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging.")
def cli(verbose: bool):
    """Numerical lab for cancellation inequalities of homogeneous kernels."""
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


@cli.command("check-cancellation")
@run_options
@click.pass_context
@_handle_errors
def check_cancellation_command(click_ctx, config_path, out_dir, seed, threads):
    """Quadrature of Phi(K~) and Phi(-K~) over the unit sphere."""
    ctx = RunContext("check-cancellation", config_path, out_dir, seed, threads)
    spec, phi = build_kernel(ctx.config), build_phi(ctx.config)
    tol = ctx.config.tolerances.cancellation
    result = check_cancellation(phi, spec, build_quadrature(ctx.config))
    df = ReportExporter.cancellation_frame(result, spec.kernel_id, phi.phi_id, tol, ctx.digest)
    if ctx.wants("csv"):
        ReportExporter.to_csv(df, ctx.out / "cancellation.csv")

    table = Table(title=f"Cancellation {phi.phi_id} / {spec.kernel_id}")
    for column in ("sign", "residual", "threshold", "verdict"):
        table.add_column(column)
    for row in df.itertuples(index=False):
        table.add_row(row.sign, f"{row.residual:.6g}", f"{row.threshold:.3g}", row.verdict)
    _console().print(table)

    cancels = result.cancels(tol)
    ctx.audit.log_run_complete(len(df), "completed" if cancels else "failed", dict(Counter(df["verdict"])))
    if ctx.config.output.audit:
        ctx.audit.save_to_file()
    click_ctx.exit(EXIT_OK if cancels else EXIT_FAIL)


@cli.command("convolve")
@run_options
@click.argument("f_file", type=click.Path(dir_okay=False))
@click.option("--lo", type=int, default=None, help="Outermost band (default: bands.lo, null is the far field).")
@click.option("--hi", type=int, default=None, help="Finest band (default: bands.hi).")
@click.option("--method", type=click.Choice(["fast", "direct"]), default=None)
@click.pass_context
@_handle_errors
def convolve_command(click_ctx, config_path, out_dir, seed, threads, f_file, lo, hi, method):
    """K_range * f for a stored grid function."""
    ctx = RunContext("convolve", config_path, out_dir, seed, threads)
    spec, settings = build_kernel(ctx.config), build_settings(ctx.config)
    f = load_grid_function(f_file)
    band_range = build_band_range(ctx.config, lo, hi)
    out = convolve(spec, band_range, f, method or ctx.config.bands.method, settings)
    target = save_grid_function(out, ctx.out / (Path(f_file).name + ".conv"))

    cut = effective_lo(band_range, settings)
    radius = math.ldexp(1.0, -cut)
    # bands below the cut only see |x - y| >= radius, where |K| <= sup|K~| radius^{alpha - d}
    omitted = spec.sup_norm() * radius ** (spec.alpha - spec.d) * l1_norm(f) if band_range.lo is None else 0.0
    record = {
        "band_range": str(band_range),
        "config_digest": ctx.digest,
        "effective_lo": cut,
        "omitted_radius": radius,
        "output": str(target),
        "pointwise_tail_bound": float(omitted),
    }
    click.echo(json.dumps(record, sort_keys=True))
    click_ctx.exit(ctx.finish([]))


@cli.command("verify")
@run_options
@click.pass_context
@_handle_errors
def verify_command(click_ctx, config_path, out_dir, seed, threads):
    """Run the configured suite of inequality checks over the test family."""
    ctx = RunContext("verify", config_path, out_dir, seed, threads)
    c = ctx.config
    runner = SuiteRunner(build_kernel(c), build_phi(c), build_grid(c), build_plan(c), build_options(c),
                         audit=ctx.audit, threads=ctx.threads, growth=c.tolerances.growth,
                         growth_floor=c.tolerances.growth_floor)
    reports = runner.run()
    _write_reports(ctx, reports, "verify.csv")
    _print_summary(f"verify ({ctx.digest})", reports)
    click_ctx.exit(ctx.finish(reports))


@cli.command("probe-necessity")
@run_options
@click.option("--force", is_flag=True, help="Run even when Phi cancels.")
@click.pass_context
@_handle_errors
def probe_command(click_ctx, config_path, out_dir, seed, threads, force):
    """Main ratios of shrinking dipoles; they must blow up when Phi does not cancel."""
    ctx = RunContext("probe-necessity", config_path, out_dir, seed, threads)
    c = ctx.config
    result = cancellation_necessity_probe(build_kernel(c), build_phi(c), build_grid(c),
                                          widths=c.family.probe_widths, options=build_options(c),
                                          quad=build_quadrature(c), force=force, growth=c.tolerances.growth,
                                          cancellation_tol=c.tolerances.cancellation, threads=ctx.threads)
    _write_reports(ctx, result.reports, "probe.csv")
    _print_summary(f"probe-necessity ({'cancelling' if result.cancelling else 'non-cancelling'})", result.reports)
    click_ctx.exit(ctx.finish(result.reports))


@cli.command("extremize")
@run_options
@click.option("--force", is_flag=True, help="Search even when Phi does not cancel.")
@click.pass_context
@_handle_errors
def extremize_command(click_ctx, config_path, out_dir, seed, threads, force):
    """Nelder-Mead search for the largest main ratio over sums of bumps."""
    ctx = RunContext("extremize", config_path, out_dir, seed, threads)
    c, e = ctx.config, ctx.config.extremize
    spec, options = build_kernel(c), build_options(c)
    family = FamilySpec(e.bump_count, build_grid(c), seed=c.family.seed,
                        min_width=e.min_width, max_width=e.max_width)
    result = search(spec, build_phi(c), family, e.budget, options=options, quad=build_quadrature(c),
                    force=force, cancellation_tol=c.tolerances.cancellation, threads=ctx.threads,
                    max_restarts=e.restarts)
    reports = [result.best_report] if result.best_report else []
    if ctx.wants("csv"):
        ReportExporter.write_reports(reports, ctx.out / "extremize.csv", ctx.digest)
    if ctx.wants("json"):
        ReportExporter.to_json({**result.to_trace(), "config_digest": ctx.digest}, ctx.out / "extremize_trace.json")

    if e.phi_variants:
        entries = [(spec, build_phi(c, variant)) for variant in e.phi_variants]
        table = constant_table(entries, family, e.budget, options=options, force=force, threads=ctx.threads)
        if ctx.wants("csv"):
            ReportExporter.to_csv(table.assign(config_digest=ctx.digest), ctx.out / "constants.csv")

    _print_summary(f"extremize (best ratio {result.best_ratio:.6g}, {result.evaluations} evaluations)", reports)
    click_ctx.exit(ctx.finish(reports))


@cli.command("plot")
@click.argument("report_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Directory for the SVG files (default: next to the CSV).")
@_handle_errors
def plot_command(report_csv, out_dir):
    """ratio_vs_n.svg and ratio_vs_width.svg from a report CSV."""
    df = ReportExporter.read_reports(report_csv)
    paths = plot_reports(df, Path(out_dir) if out_dir else Path(report_csv).parent)
    for path in paths:
        click.echo(str(path))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="mazyalab",
                          standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_ERROR
    except click.Abort:
        return EXIT_ERROR
    return result if isinstance(result, int) else EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
