#!/usr/bin/env python3
"""
Command-line interface for cascade-fourier.

Subcommands:
- profile: closed-form multifractal quantities of a weight model
- simulate: seeded realizations written as binary mass files
- fourier: sup-magnitude decay profiles and Fourier-dimension fits
- spherical: spherical L^p average profiles
- dim2: correlation-dimension regression
- verify: acceptance suites with a JSON report
"""

import math
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Dict, Iterator, List, Optional, Sequence

import polars as pl
import typer
from eliot import start_action, to_file
from pycomfort.logging import to_nice_file
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from cascade_fourier.cascade import CascadeRealization, generate, is_extinct
from cascade_fourier.config import RunConfig, build_config
from cascade_fourier.errors import CascadeError
from cascade_fourier.estimation.ensemble import ensemble_dim2, ensemble_profiles, summarize_profiles
from cascade_fourier.fourier import DecaySampleSet, decay_profile
from cascade_fourier.storage import RunManifest, dumps, read_masses, write_csv, write_json, write_masses
from cascade_fourier.structure import (
    MultifractalProfile,
    check_subcritical,
    order_label,
    predicted_dims,
    spherical_exponent,
    tau_table,
)
from cascade_fourier.verification import VerificationReport, run_suite
from cascade_fourier.weights import WeightFamily, WeightModel

app = typer.Typer(
    name="cascade-fourier",
    help="Mandelbrot cascades on b-adic cubes and planar curves: structure functions and Fourier decay.",
    add_completion=False,
    no_args_is_help=True,
)
console = Console()
err_console = Console(stderr=True)


class Support(str, Enum):
    flat = "flat"
    circle = "circle"
    parabola = "parabola"


class Suite(str, Enum):
    trivial = "trivial"
    analytic = "analytic"
    statistical = "statistical"
    full = "full"


ModelOpt = Annotated[Optional[WeightFamily], typer.Option("--model", help="Weight family [default: lognormal]")]
LambdaOpt = Annotated[Optional[float], typer.Option("--lambda", help="Lognormal intermittency [default: 0.09]")]
WPlusOpt = Annotated[Optional[float], typer.Option("--w-plus", help="Two-point upper weight [default: 1.5]")]
WMinusOpt = Annotated[Optional[float], typer.Option("--w-minus", help="Two-point lower weight [default: 0.5]")]
ProbOpt = Annotated[Optional[float], typer.Option("--prob", help="Two-point probability of w_plus [default: 0.5]")]
BaseOpt = Annotated[Optional[int], typer.Option("--b", help="Grid base b [default: 2]")]
DimOpt = Annotated[Optional[int], typer.Option("--d", help="Spatial dimension d [default: 1]")]
CurveOpt = Annotated[Optional[Support], typer.Option("--curve", help="Support of the measure [default: circle]")]
CurvatureOpt = Annotated[Optional[float], typer.Option("--curvature", help="Circle curvature [default: 2 pi]")]
DepthOpt = Annotated[Optional[int], typer.Option("--depth", help="Cascade depth n [default: 14]")]
SeedOpt = Annotated[
    Optional[List[int]], typer.Option("--seed", "--seeds", help="Realization seed; repeat for an ensemble [default: 0]")
]
K0Opt = Annotated[Optional[int], typer.Option("--k0", help="Smallest radius b^k0 [default: 4]")]
K1Opt = Annotated[Optional[int], typer.Option("--k1", help="Largest radius b^k1 [default: 11]")]
NThetaOpt = Annotated[Optional[int], typer.Option("--n-theta", help="Directions per radius [default: 256]")]
NShellOpt = Annotated[Optional[int], typer.Option("--n-shell", help="Radii per shell [default: 4]")]
POpt = Annotated[Optional[List[float]], typer.Option("--p", help="Spherical L^p order; repeatable [default: 1 2 4]")]
TolOpt = Annotated[Optional[float], typer.Option("--tol", help="Quadrature tolerance per unit length [default: 1e-9]")]
NormalsOpt = Annotated[
    Optional[bool], typer.Option("--normals/--no-normals", help="Add curve normal directions [default: on]")
]
NMinOpt = Annotated[Optional[int], typer.Option("--n-min", help="First regression depth [default: 8]")]
NMaxOpt = Annotated[Optional[int], typer.Option("--n-max", help="Last regression depth [default: 16]")]
SuiteOpt = Annotated[Optional[Suite], typer.Option("--suite", help="Verification suite [default: trivial]")]
OutputOpt = Annotated[Optional[Path], typer.Option("--output-dir", "-o", help="Output directory [default: results]")]
ConfigOpt = Annotated[
    Optional[Path], typer.Option("--config", exists=True, dir_okay=False, help="JSON config (RunConfig schema)")
]
LogDirOpt = Annotated[Optional[Path], typer.Option("--log-dir", help="Directory for eliot logs [default: logs]")]
ThreadsOpt = Annotated[Optional[int], typer.Option("--threads", help="Worker threads [default: $THREADS or CPUs]")]
MassesOpt = Annotated[
    Optional[Path], typer.Option("--masses", exists=True, dir_okay=False, help="Mass file written by simulate")
]


def setup_logging(log_file_name: str, log_dir: Path) -> None:
    """
    Set up Eliot logging with file destinations.

    Args:
        log_file_name: Base name for log files (without extension)
        log_dir: Directory receiving the JSON and rendered logs
    """
    log_dir.mkdir(parents=True, exist_ok=True)
    json_log = log_dir / f"{log_file_name}.json"
    rendered_log = log_dir / f"{log_file_name}.log"
    to_file(open(str(json_log), "w"))
    to_nice_file(json_log, rendered_log)


@contextmanager
def command_errors() -> Iterator[None]:
    """Configuration errors exit 2, library failures exit 1."""
    try:
        yield
    except ValidationError as e:
        err_console.print(f"[red]Invalid configuration:[/red] {e}")
        raise typer.Exit(2)
    except CascadeError as e:
        err_console.print(f"[red]Error ({type(e).__name__}):[/red] {e}")
        raise typer.Exit(1)


def _value(option: Optional[Enum]) -> Optional[str]:
    return option.value if option is not None else None


def load_run_config(
    command: str,
    config: Optional[Path] = None,
    model: Optional[WeightFamily] = None,
    lam: Optional[float] = None,
    w_plus: Optional[float] = None,
    w_minus: Optional[float] = None,
    prob: Optional[float] = None,
    b: Optional[int] = None,
    d: Optional[int] = None,
    curve: Optional[Support] = None,
    curvature: Optional[float] = None,
    seeds: Optional[Sequence[int]] = None,
    p_list: Optional[Sequence[float]] = None,
    suite: Optional[Suite] = None,
    **flags: Any,
) -> RunConfig:
    """Flags on top of the config file on top of defaults; then logging."""
    params = {
        name: value
        for name, value in (("lambda", lam), ("w_plus", w_plus), ("w_minus", w_minus), ("p", prob))
        if value is not None
    }
    cfg = build_config(
        config,
        command=command,
        model={"family": _value(model), "params": params or None, "b": b, "d": d},
        curve={"family": _value(curve), "curvature": curvature},
        seeds=list(seeds) if seeds else None,
        p_list=list(p_list) if p_list else None,
        suite=_value(suite),
        **flags,
    )
    setup_logging(command, cfg.log_dir)
    return cfg


def _manifest(cfg: RunConfig, config_path: Optional[Path]) -> RunManifest:
    manifest = RunManifest(cfg.command, cfg.model_dump(mode="json"))
    if config_path is not None:
        manifest.add_input("config", config_path)
    return manifest


def _profile_table(profile: MultifractalProfile) -> Table:
    m = profile.model
    table = Table(title=f"{m.family.value} {m.named_params()} (b={m.b}, d={m.d})")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="white", justify="right")
    rows = [
        ("q_max", profile.q_max),
        ("alpha_min", profile.alpha_min),
        ("tau(2)", profile.tau_at_2),
        ("tau~(2)", profile.tau_tilde_at_2),
        ("dim_2 predicted", profile.dim2_predicted),
        ("dim_F flat predicted", profile.dimF_flat_predicted),
        ("dim_F curve predicted", profile.dimF_curve_predicted),
    ]
    rows += [(f"sigma_{label} exponent", value) for label, value in profile.spherical_predicted.items()]
    for name, value in rows:
        table.add_row(name, "inf" if math.isinf(value) else f"{value:.10g}")
    return table


@app.command()
def profile(
    model: ModelOpt = None,
    lam: LambdaOpt = None,
    w_plus: WPlusOpt = None,
    w_minus: WMinusOpt = None,
    prob: ProbOpt = None,
    b: BaseOpt = None,
    d: DimOpt = None,
    output_dir: OutputOpt = None,
    config: ConfigOpt = None,
    log_dir: LogDirOpt = None,
) -> None:
    """
    Print q_max, alpha_min, tau(2) and the predicted dimensions as JSON and
    as a table; write tau, tau' and tau~ on the q-grid to tau.csv.

    Example:
        cascade-fourier profile --model lognormal --lambda 0.09
    """
    with command_errors():
        cfg = load_run_config(
            "profile", config, model, lam, w_plus, w_minus, prob, b, d, output_dir=output_dir, log_dir=log_dir
        )
        weight_model = cfg.model.build()
        with start_action(action_type="cli_profile", model=weight_model.to_dict()):
            result = predicted_dims(weight_model)
            manifest = _manifest(cfg, config)
            tau_path = write_csv(cfg.output_dir / "tau.csv", pl.DataFrame(tau_table(weight_model, cfg.q_grid)))
            profile_path = write_json(cfg.output_dir / "profile.json", result.to_dict())
            manifest.add_output("tau.csv", tau_path)
            manifest.add_output("profile.json", profile_path)
            manifest.write(cfg.output_dir)
    typer.echo(dumps(result.to_dict()), nl=False)
    console.print(_profile_table(result))


@app.command()
def simulate(
    model: ModelOpt = None,
    lam: LambdaOpt = None,
    w_plus: WPlusOpt = None,
    w_minus: WMinusOpt = None,
    prob: ProbOpt = None,
    b: BaseOpt = None,
    d: DimOpt = None,
    depth: DepthOpt = None,
    seed: SeedOpt = None,
    output_dir: OutputOpt = None,
    config: ConfigOpt = None,
    log_dir: LogDirOpt = None,
    threads: ThreadsOpt = None,
) -> None:
    """
    Generate realizations and write masses_seed<seed>.bin with a JSON sidecar.

    Example:
        cascade-fourier simulate --depth 12 --seed 0 --seed 1 -o runs/sim
    """
    with command_errors():
        cfg = load_run_config(
            "simulate", config, model, lam, w_plus, w_minus, prob, b, d, seeds=seed,
            depth=depth, output_dir=output_dir, log_dir=log_dir, threads=threads,
        )
        weight_model = cfg.model.build()
        manifest = _manifest(cfg, config)
        cells = 0
        with start_action(action_type="cli_simulate", seeds=cfg.seeds, depth=cfg.depth):
            for s in cfg.seeds:
                r = generate(weight_model, cfg.depth, s, threads=cfg.workers)
                path = write_masses(cfg.output_dir / f"masses_seed{s}.bin", r)
                manifest.add_output(path.name, path)
                manifest.add_output(path.with_suffix(".json").name, path.with_suffix(".json"))
                cells = r.cell_count
            manifest.write(cfg.output_dir)
    console.print(f"wrote {len(cfg.seeds)} realization(s) of depth {cfg.depth}, {cells} cells each -> {cfg.output_dir}")


def _collect_profiles(
    cfg: RunConfig, masses: Optional[Path], enrich: bool, manifest: RunManifest
) -> Dict[int, Optional[DecaySampleSet]]:
    curve = cfg.curve.build()
    options = dict(
        n_theta=cfg.n_theta, p_list=cfg.p_list, enrich_normals=enrich, n_shell=cfg.n_shell, tol=cfg.tol
    )

    def single(r: CascadeRealization) -> Dict[int, Optional[DecaySampleSet]]:
        if is_extinct(r):
            return {r.seed: None}
        return {r.seed: decay_profile(r, curve, cfg.k0, cfg.k1, threads=cfg.workers, **options)}

    if masses is not None:
        manifest.add_input("masses", masses)
        return single(read_masses(masses))
    weight_model = cfg.model.build()
    if len(cfg.seeds) == 1:
        return single(generate(weight_model, cfg.depth, cfg.seeds[0], threads=cfg.workers))
    return ensemble_profiles(
        weight_model, curve, cfg.depth, cfg.seeds, k0=cfg.k0, k1=cfg.k1, threads=cfg.workers, **options
    )


def _decay_command(cfg: RunConfig, config: Optional[Path], masses: Optional[Path], stem: str, spherical: bool) -> None:
    manifest = _manifest(cfg, config)
    with start_action(action_type=f"cli_{stem}", seeds=cfg.seeds, depth=cfg.depth, curve=cfg.curve.family):
        enrich = cfg.enrich_normals and not spherical and not cfg.curve.is_flat
        profiles = _collect_profiles(cfg, masses, enrich, manifest)
        for s, prof in profiles.items():
            if prof is not None:
                path = write_csv(cfg.output_dir / f"{stem}_seed{s}.csv", prof.to_frame())
                manifest.add_output(path.name, path)
        first = next((prof for prof in profiles.values() if prof is not None), None)
        model = cfg.model.build() if first is None else WeightModel.from_dict(first.metadata["model"])
        columns = [f"sigma_{order_label(p)}" for p in cfg.p_list] if spherical else ["sup"]
        result = summarize_profiles(profiles, columns, base=model.b)
        predicted: Dict[str, float] = {}
        if check_subcritical(model):
            if spherical:
                predicted = {f"sigma_{order_label(p)}": spherical_exponent(model, p) for p in cfg.p_list}
            else:
                dims = predicted_dims(model)
                predicted = {"sup": dims.dimF_flat_predicted if cfg.curve.is_flat else dims.dimF_curve_predicted}
        fits_path = write_json(
            cfg.output_dir / f"{stem}_fits.json",
            {
                "ensemble": result.to_dict(),
                "fits": {column: [fit.to_dict() for fit in fits] for column, fits in result.fits.items()},
                "predicted": predicted,
            },
        )
        manifest.add_output(fits_path.name, fits_path)
        manifest.write(cfg.output_dir, extra={"discarded": len(result.discarded)})
    console.print(
        f"{stem}: {len(result.kept)} realization(s), estimate {result.mean:.4f} +/- {result.std:.4f}"
        f" ({len(result.discarded)} extinct discarded) -> {cfg.output_dir}"
    )


@app.command()
def fourier(
    model: ModelOpt = None,
    lam: LambdaOpt = None,
    w_plus: WPlusOpt = None,
    w_minus: WMinusOpt = None,
    prob: ProbOpt = None,
    b: BaseOpt = None,
    d: DimOpt = None,
    curve: CurveOpt = None,
    curvature: CurvatureOpt = None,
    depth: DepthOpt = None,
    seed: SeedOpt = None,
    k0: K0Opt = None,
    k1: K1Opt = None,
    n_theta: NThetaOpt = None,
    n_shell: NShellOpt = None,
    p: POpt = None,
    tol: TolOpt = None,
    normals: NormalsOpt = None,
    masses: MassesOpt = None,
    output_dir: OutputOpt = None,
    config: ConfigOpt = None,
    log_dir: LogDirOpt = None,
    threads: ThreadsOpt = None,
) -> None:
    """
    Sup-magnitude decay profile at radii b^k0..b^k1 per seed (CSV columns
    r, sup, sigma_1, sigma_2, sigma_4, n_theta) and Fourier-dimension fits.

    Example:
        cascade-fourier fourier --curve circle --depth 14 --seed 0 --seed 1
    """
    with command_errors():
        cfg = load_run_config(
            "fourier", config, model, lam, w_plus, w_minus, prob, b, d, curve, curvature, seeds=seed, p_list=p,
            depth=depth, k0=k0, k1=k1, n_theta=n_theta, n_shell=n_shell, tol=tol, enrich_normals=normals,
            output_dir=output_dir, log_dir=log_dir, threads=threads,
        )
        _decay_command(cfg, config, masses, "fourier", spherical=False)


@app.command()
def spherical(
    model: ModelOpt = None,
    lam: LambdaOpt = None,
    w_plus: WPlusOpt = None,
    w_minus: WMinusOpt = None,
    prob: ProbOpt = None,
    b: BaseOpt = None,
    d: DimOpt = None,
    curve: CurveOpt = None,
    curvature: CurvatureOpt = None,
    depth: DepthOpt = None,
    seed: SeedOpt = None,
    k0: K0Opt = None,
    k1: K1Opt = None,
    n_theta: NThetaOpt = None,
    n_shell: NShellOpt = None,
    p: POpt = None,
    tol: TolOpt = None,
    masses: MassesOpt = None,
    output_dir: OutputOpt = None,
    config: ConfigOpt = None,
    log_dir: LogDirOpt = None,
    threads: ThreadsOpt = None,
) -> None:
    """
    Spherical L^p averages over uniform directions only, with a decay fit per
    order next to the predicted exponent.

    Example:
        cascade-fourier spherical --curve circle --p 1 --p 2 --p 4
    """
    with command_errors():
        cfg = load_run_config(
            "spherical", config, model, lam, w_plus, w_minus, prob, b, d, curve, curvature, seeds=seed, p_list=p,
            depth=depth, k0=k0, k1=k1, n_theta=n_theta, n_shell=n_shell, tol=tol,
            output_dir=output_dir, log_dir=log_dir, threads=threads,
        )
        _decay_command(cfg, config, masses, "spherical", spherical=True)


@app.command()
def dim2(
    model: ModelOpt = None,
    lam: LambdaOpt = None,
    w_plus: WPlusOpt = None,
    w_minus: WMinusOpt = None,
    prob: ProbOpt = None,
    b: BaseOpt = None,
    d: DimOpt = None,
    seed: SeedOpt = None,
    n_min: NMinOpt = None,
    n_max: NMaxOpt = None,
    output_dir: OutputOpt = None,
    config: ConfigOpt = None,
    log_dir: LogDirOpt = None,
    threads: ThreadsOpt = None,
) -> None:
    """
    Correlation-dimension slope of -log_b sum nu_n^2 over n_min..n_max per seed.

    Example:
        cascade-fourier dim2 --model two_point --seed 0 --seed 1 --n-min 8 --n-max 14
    """
    with command_errors():
        cfg = load_run_config(
            "dim2", config, model, lam, w_plus, w_minus, prob, b, d, seeds=seed,
            n_min=n_min, n_max=n_max, output_dir=output_dir, log_dir=log_dir, threads=threads,
        )
        weight_model = cfg.model.build()
        manifest = _manifest(cfg, config)
        with start_action(action_type="cli_dim2", seeds=cfg.seeds, n_min=cfg.n_min, n_max=cfg.n_max):
            fits = ensemble_dim2(weight_model, cfg.seeds, cfg.n_min, cfg.n_max, threads=cfg.workers)
            frame = pl.DataFrame(
                {
                    "seed": cfg.seeds,
                    "slope": [fit.slope for fit in fits],
                    "intercept": [fit.intercept for fit in fits],
                    "stderr": [fit.stderr for fit in fits],
                }
            )
            csv_path = write_csv(cfg.output_dir / "dim2.csv", frame)
            slopes = frame["slope"]
            summary = {
                "mean": float(slopes.mean()),
                "std": float(slopes.std()) if len(fits) > 1 else 0.0,
                "predicted": predicted_dims(weight_model).dim2_predicted if check_subcritical(weight_model) else None,
            }
            summary_path = write_json(cfg.output_dir / "dim2_summary.json", summary)
            manifest.add_output(csv_path.name, csv_path)
            manifest.add_output(summary_path.name, summary_path)
            manifest.write(cfg.output_dir)
    console.print(f"dim2: mean slope {summary['mean']:.4f} over {len(fits)} seed(s) -> {cfg.output_dir}")


def _report_table(report: VerificationReport) -> Table:
    table = Table(title=f"verify --suite {report.suite}")
    table.add_column("Check", style="cyan")
    table.add_column("Predicted", justify="right")
    table.add_column("Observed", justify="right")
    table.add_column("Tolerance", justify="right")
    table.add_column("Result")
    for check in report.checks:
        table.add_row(
            check.name,
            f"{check.predicted:.6g}",
            f"{check.observed:.6g}",
            f"{check.tolerance:.3g}",
            "[green]pass[/green]" if check.passed else "[red]FAIL[/red]",
        )
    return table


@app.command()
def verify(
    suite: SuiteOpt = None,
    depth: DepthOpt = None,
    seed: SeedOpt = None,
    k0: K0Opt = None,
    k1: K1Opt = None,
    n_theta: NThetaOpt = None,
    n_shell: NShellOpt = None,
    tol: TolOpt = None,
    n_min: NMinOpt = None,
    n_max: NMaxOpt = None,
    output_dir: OutputOpt = None,
    config: ConfigOpt = None,
    log_dir: LogDirOpt = None,
    threads: ThreadsOpt = None,
) -> None:
    """
    Run an acceptance suite and write verify.json; exit 1 if any check fails.

    Example:
        cascade-fourier verify --suite trivial
    """
    with command_errors():
        cfg = load_run_config(
            "verify", config, seeds=seed, suite=suite, depth=depth, k0=k0, k1=k1, n_theta=n_theta,
            n_shell=n_shell, tol=tol, n_min=n_min, n_max=n_max, output_dir=output_dir, log_dir=log_dir,
            threads=threads,
        )
        manifest = _manifest(cfg, config)
        report = run_suite(cfg.suite, cfg)
        report_path = write_json(cfg.output_dir / "verify.json", report.to_dict())
        manifest.add_output(report_path.name, report_path)
        manifest.write(cfg.output_dir, extra={"passed": report.passed})
    console.print(_report_table(report))
    if not report.passed:
        err_console.print(f"[red]{len(report.failures)} of {len(report.checks)} checks failed[/red]")
        raise typer.Exit(1)
    console.print(f"verify {report.suite}: all {len(report.checks)} checks passed -> {report_path}")


def main() -> None:
    app()


if __name__ == "__main__":
    main()
