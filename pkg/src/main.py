"""
interimcore - command-line entry point.

Commands load a problem file, run one solver operation and print a summary;
`--json PATH` also writes a self-contained report. Exit statuses:

    0  success / member / all claims reproduced
    1  blocked, not certified, inclusion violated or verification failed
    2  input error (parse, structure, validation, usage)
    3  internal solver failure (LP, pivoting, budget), tagged with its stage
"""
import logging
import time
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import typer

from blocking import (
    CoreConcept,
    certification_epsilon,
    core_grid_scan,
    in_core,
    known_inclusion,
)
from derived import solve_interim_core
from errors import (
    BudgetExceeded,
    InterimCoreError,
    ProblemFileError,
    ScarfError,
    SolverError,
    StructuralError,
    ValidationError,
)
from games import NormalFormGame, Problem, as_resolution, validate_problem
from problem_file import dump_profile, load_problem, load_profile
from reports import Report, read_report, verify_report, write_report
from utils import ConfigManager
from worked_example import reproduce, worked_economy

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3

app = typer.Typer(
    add_completion=False,
    no_args_is_help=True,
    help="Interim cores of cooperative games and economies under incomplete information.",
)


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s | %(levelname)s | %(name)s | %(message)s',
        datefmt='%H:%M:%S',
    )
    logging.getLogger().setLevel(logging.DEBUG if verbose else logging.INFO)


@app.callback()
def main(
    config: Path | None = typer.Option(None, '--config', help="User config YAML."),
    verbose: bool = typer.Option(False, '--verbose', '-v', help="Debug logging."),
) -> None:
    configure_logging(verbose)
    ConfigManager.initialize()
    if config is not None:
        ConfigManager.instance().load_user_config(config)


@contextmanager
def _exit_statuses() -> Iterator[None]:
    """Map the error hierarchy onto exit statuses."""
    try:
        yield
    except (StructuralError, ValidationError, ProblemFileError) as e:
        typer.echo(f"input error: {e}", err=True)
        for violation in getattr(e, 'violations', []):
            typer.echo(f"  - {violation}", err=True)
        raise typer.Exit(EXIT_INPUT) from e
    except (SolverError, ScarfError, BudgetExceeded) as e:
        stage = f" [{e.stage}]" if e.stage else ""
        typer.echo(f"solver failure{stage}: {e}", err=True)
        raise typer.Exit(EXIT_INTERNAL) from e
    except InterimCoreError as e:
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(EXIT_INTERNAL) from e


def _load(path: Path) -> Problem:
    problem = load_problem(path)
    report = validate_problem(problem)
    for warning in report.warnings:
        logger.warning(warning)
    if not report.ok:
        raise ValidationError(f"{path} fails validation", report.violations)
    return problem


def _epsilon(problem: Problem, epsilon: float | None) -> float:
    if epsilon is None:
        if isinstance(problem, NormalFormGame):
            raise StructuralError("games need an explicit --epsilon for weak-core runs")
        return 0.0
    return epsilon


def _finish(report: Report, json_path: Path | None, status: int, started: float) -> None:
    report.exit_status = status
    report.timing.setdefault('total', time.perf_counter() - started)
    if json_path is not None:
        write_report(report, json_path)
        typer.echo(f"report written to {json_path}")
    raise typer.Exit(status)


ConceptOption = typer.Option('interim', '--concept', help="interim, private, weak-interim-private, interim-fine or weak-core.")
EpsilonOption = typer.Option(None, '--epsilon', min=0.0, help="Blocking threshold (default 0 for economies).")
ResolutionOption = typer.Option('1/4', '--resolution', help="Grid step, e.g. 1/4 or 0.25.")
BudgetOption = typer.Option(None, '--budget', min=1, help="Enumeration budget.")
JsonOption = typer.Option(None, '--json', help="Write a JSON report to this path.")


@app.command()
def check(
    file: Path = typer.Argument(..., help="Problem file."),
    profile: str = typer.Option(..., '--profile', help="Profile file or inline YAML."),
    concept: str = ConceptOption,
    epsilon: float | None = EpsilonOption,
    json_path: Path | None = JsonOption,
) -> None:
    """Is the profile in the core?"""
    started = time.perf_counter()
    with _exit_statuses():
        problem = _load(file)
        eps = _epsilon(problem, epsilon)
        x = load_profile(problem, profile)
        core = CoreConcept.parse(concept, eps, problem)
        verdict = in_core(problem, x, core)
        report = Report.start('check', problem, concept=core.to_dict(), profile=dump_profile(problem, x))
        report.verdicts.append({
            'concept': core.label,
            'member': verdict.member,
            'searched': verdict.searched,
            'summary': f"{core.label}: {'member' if verdict.member else 'blocked'} ({verdict.search_space})",
        })
        if verdict.member:
            typer.echo(f"member of the {core.label} core ({verdict.search_space})")
        else:
            report.add_certificate(problem, x, verdict.certificate)
            survives_at = certification_epsilon(problem, x, core)
            report.verdicts[-1]['certification_epsilon'] = survives_at
            typer.echo(f"blocked: {verdict.certificate.describe(problem)}")
            typer.echo(f"survives from eps={survives_at:.6g}")
    _finish(report, json_path, EXIT_OK if verdict.member else EXIT_NEGATIVE, started)


@app.command()
def scan(
    file: Path = typer.Argument(..., help="Problem file."),
    concept: str = ConceptOption,
    resolution: str = ResolutionOption,
    epsilon: float | None = EpsilonOption,
    budget: int | None = BudgetOption,
    json_path: Path | None = JsonOption,
) -> None:
    """Judge every grid profile at the given resolution."""
    started = time.perf_counter()
    with _exit_statuses():
        problem = _load(file)
        core = CoreConcept.parse(concept, _epsilon(problem, epsilon), problem)
        step = as_resolution(resolution)
        result = core_grid_scan(problem, core, step, budget)
        report = Report.start('scan', problem, concept=core.to_dict(), resolution=str(step), budget=budget)
        report.verdicts.append({
            'concept': core.label,
            'total': result.total,
            'members': result.members,
            'sample_members': [dump_profile(problem, x) for x in result.sample_members],
            'summary': f"{core.label}: {result.members} of {result.total} grid profiles are members",
        })
        for x, certificate in result.sample_certificates:
            report.add_certificate(problem, x, certificate)
        typer.echo(f"{result.members} of {result.total} grid profiles are in the {core.label} core")
        for x in result.sample_members:
            typer.echo(f"  member: {dump_profile(problem, x)}")
        for x, certificate in result.sample_certificates:
            typer.echo(f"  {dump_profile(problem, x)} -> {certificate.describe(problem)}")
    _finish(report, json_path, EXIT_OK, started)


@app.command()
def solve(
    file: Path = typer.Argument(..., help="Problem file."),
    resolution: str = ResolutionOption,
    epsilon: float | None = EpsilonOption,
    budget: int | None = typer.Option(None, '--budget', min=1, help="Generators sampled per coalition."),
    rounds: int | None = typer.Option(None, '--rounds', min=0, help="Column-generation rounds."),
    json_path: Path | None = JsonOption,
) -> None:
    """Construct an interim core point through the auxiliary game and certify it."""
    started = time.perf_counter()
    with _exit_statuses():
        problem = _load(file)
        eps = _epsilon(problem, epsilon)
        result = solve_interim_core(problem, resolution, eps, rounds, budget)
        report = Report.start(
            'solve', problem, resolution=result.resolution, epsilon=eps, budget=budget, rounds=rounds,
        )
        report.details = result.to_dict(problem)
        report.timing.update(result.timing)
        summary = (
            f"certified in the interim core at eps={eps:g}" if result.certified
            else f"not certified at eps={eps:g}; certification epsilon {result.certification_epsilon:.6g}"
        )
        report.verdicts.append({
            'member': result.certified,
            'certification_epsilon': result.certification_epsilon,
            'profile': dump_profile(problem, result.profile),
            'summary': summary,
        })
        if result.verdict is not None and result.verdict.certificate is not None:
            report.add_certificate(problem, result.profile, result.verdict.certificate)
        typer.echo(f"profile: {dump_profile(problem, result.profile)}")
        typer.echo(summary)
    _finish(report, json_path, EXIT_OK if result.certified else EXIT_NEGATIVE, started)


@app.command()
def compare(
    file: Path = typer.Argument(..., help="Problem file."),
    concepts: list[str] = typer.Option(..., '--concept', help="Repeat for each concept (at least two)."),
    profile: str | None = typer.Option(None, '--profile', help="Compare on one profile instead of the grid."),
    resolution: str = ResolutionOption,
    epsilon: float | None = EpsilonOption,
    budget: int | None = BudgetOption,
    json_path: Path | None = JsonOption,
) -> None:
    """Side-by-side verdicts under several concepts, checked against known inclusions."""
    started = time.perf_counter()
    with _exit_statuses():
        if len(concepts) < 2:
            raise StructuralError("compare needs at least two --concept options")
        problem = _load(file)
        eps = _epsilon(problem, epsilon)
        cores = [CoreConcept.parse(name, eps, problem) for name in concepts]
        report = Report.start('compare', problem, concepts=[c.to_dict() for c in cores], resolution=resolution)
        members = _compare_members(problem, cores, profile, resolution, budget, report)
        violations = [
            f"{inner.label} members outside {outer.label}"
            for inner in cores for outer in cores
            if inner is not outer and known_inclusion(inner, outer)
            and not members[inner.label] <= members[outer.label]
        ]
        report.details['inclusion_violations'] = violations
        for core in cores:
            typer.echo(f"{core.label}: {len(members[core.label])} members")
        for violation in violations:
            typer.echo(f"inclusion violated: {violation}", err=True)
    _finish(report, json_path, EXIT_NEGATIVE if violations else EXIT_OK, started)


def _compare_members(
    problem: Problem,
    cores: list[CoreConcept],
    profile: str | None,
    resolution: str,
    budget: int | None,
    report: Report,
) -> dict[str, set[tuple]]:
    """Member keys per concept label, on one profile or the whole grid."""
    members: dict[str, set[tuple]] = {}
    if profile is not None:
        x = load_profile(problem, profile)
        for core in cores:
            verdict = in_core(problem, x, core)
            members[core.label] = {x.key()} if verdict.member else set()
            report.verdicts.append({
                'concept': core.label,
                'member': verdict.member,
                'summary': f"{core.label}: {'member' if verdict.member else 'blocked'}",
            })
            if verdict.certificate is not None:
                report.add_certificate(problem, x, verdict.certificate)
        return members
    step = as_resolution(resolution)
    for core in cores:
        result = core_grid_scan(problem, core, step, budget)
        members[core.label] = result.member_keys
        report.verdicts.append({
            'concept': core.label,
            'total': result.total,
            'members': result.members,
            'summary': f"{core.label}: {result.members} of {result.total}",
        })
        for x, certificate in result.sample_certificates:
            report.add_certificate(problem, x, certificate)
    return members


@app.command('paper-example')
def paper_example(
    resolution: str = ResolutionOption,
    json_path: Path | None = JsonOption,
) -> None:
    """Reproduce the three-player worked example."""
    started = time.perf_counter()
    with _exit_statuses():
        economy = worked_economy()
        result = reproduce(as_resolution(resolution))
        report = Report.start('paper-example', economy, resolution=resolution)
        for claim, ok in result.checks.items():
            report.verdicts.append({'claim': claim, 'reproduced': ok, 'summary': f"{claim}: {ok}"})
            typer.echo(f"{'ok  ' if ok else 'FAIL'} {claim}")
        for x, certificate in result.certificates:
            report.add_certificate(economy, x, certificate)
        report.details['interim_subproblems'] = result.interim_searched
    _finish(report, json_path, EXIT_OK if result.ok else EXIT_NEGATIVE, started)


@app.command()
def verify(report_file: Path = typer.Argument(..., help="Report written with --json.")) -> None:
    """Re-check every certificate in a report by direct recomputation."""
    with _exit_statuses():
        report = read_report(report_file)
        checks = verify_report(report)
        for check_result in checks:
            mark = 'ok  ' if check_result.valid else 'FAIL'
            reason = f" ({check_result.reason})" if check_result.reason else ''
            typer.echo(f"{mark} certificate {check_result.index}: {check_result.description}{reason}")
        typer.echo(f"{sum(c.valid for c in checks)} of {len(checks)} certificates verified")
    raise typer.Exit(EXIT_OK if all(c.valid for c in checks) else EXIT_NEGATIVE)


if __name__ == '__main__':
    app()
