"""Command line front-end: solve a network file, compare solutions, serve HTTP.

Exit codes: 0 converged / comparison under threshold, 1 error, 2 not converged
(or comparison over threshold).
"""

from __future__ import annotations

import sys

import click

from . import io
from .errors import FourwireError
from .solver import solve_network


@click.group()
def cli():
    """Unbalanced multiconductor power flow (fixed-point current injection)."""


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", type=click.Path(), default=None)
@click.option("--tol", type=float, default=None, help="Convergence tolerance (pu).")
@click.option("--max-iter", type=int, default=None)
@click.option("--eps-tf", type=float, default=None, help="Transformer diagonal regularization.")
@click.option("--shunt-floor", type=float, default=None, help="Capacitive shunt floor (pu).")
@click.option("--engine", type=click.Choice(["dense", "sparse"]), default=None)
@click.option("--verbose", is_flag=True)
def solve(input_path, output_path, tol, max_iter, eps_tf, shunt_floor, engine, verbose):
    """Solve the power flow for a network document."""
    net, settings = io.parse_network(input_path)
    config = io.settings_to_config(
        settings,
        tol=tol,
        max_iter=max_iter,
        eps_tf=eps_tf,
        shunt_floor=shunt_floor,
        engine=engine,
    )
    solution = solve_network(net, config)
    if output_path:
        io.write_solution(solution, output_path)
    if verbose:
        for (bus, phase), v in sorted(solution.terminal_voltages.items()):
            click.echo(f"{bus}.{phase}: {abs(v):.6f} pu")
    status = "converged" if solution.converged else "did not converge"
    click.echo(
        f"{status} in {solution.iterations} iterations "
        f"(kcl residual {solution.kcl_residual_max:.3e} pu, "
        f"{solution.wall_time_s * 1e3:.1f} ms)"
    )
    return 0 if solution.converged else 2


@cli.command()
@click.argument("solution_a", type=click.Path(exists=True))
@click.argument("solution_b", type=click.Path(exists=True))
@click.option("--threshold", type=float, default=1e-6, show_default=True)
def compare(solution_a, solution_b, threshold):
    """Maximum per-terminal voltage difference between two solution files."""
    a = io.read_solution(solution_a)
    b = io.read_solution(solution_b)
    report = io.compare_solutions(a, b, threshold)
    click.echo(f"U_max = {report.max_error:.6e} pu")
    if report.worst_bus is not None:
        click.echo(f"worst terminal: {report.worst_bus}.{report.worst_terminal}")
    for bus, err in sorted(report.per_bus.items()):
        click.echo(f"  {bus}: {err:.6e}")
    return 0 if report.passed else 2


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)
    return 0


def main(argv=None) -> None:
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except FourwireError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    sys.exit(rv if isinstance(rv, int) else 0)


if __name__ == "__main__":
    main()
