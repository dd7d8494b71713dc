"""The rates experiment: GREEDY meshes with the practical rule, one solve per mesh, energy errors."""
import logging
import os
import time
from typing import Dict, List, Optional

from fraclap.commands.models import RATES_COLUMNS, ConvergenceRecord, RatesOutcome
from fraclap.commands.output import metadata_header, output_path, write_plot_script
from fraclap.core.adapt import GreedyStop, PracticalMarking, greedy
from fraclap.core.assembly import AssemblyConfig, assemble
from fraclap.core.assembly.dump import dump_system
from fraclap.core.exceptions import NestingError
from fraclap.core.mesh import Mesh, make_domain, make_initial_mesh, uniform_refine
from fraclap.core.solution import (
    GalerkinSolution,
    closed_form_energy,
    closed_form_energy_error,
    export_solution,
    prolongated_energy_error,
    solve,
    surrogate_energy_error,
    validate_closed_form_1d,
)
from fraclap.core.sobolev import fit_slope, optimal_indices
from fraclap.core.utils.tables import write_table

logger = logging.getLogger(__name__)

MIN_RECORDS = 4
SLOPE_WINDOW = 4
SURROGATE_MISMATCH = 0.1


def uses_closed_form(settings, mesh: Mesh) -> bool:
    """The interval (-1, 1) with f = 1 has a known solution."""
    return (mesh.dim == 1 and settings.f.strip() == "1"
            and tuple(v[0] for v in mesh.domain.vertices) == (-1.0, 1.0))


def running_slopes(n_elements: List[int], errors: List[float], window: int = SLOPE_WINDOW) -> List[Optional[float]]:
    """Least-squares log-log slope over the last `window` points up to each record."""
    slopes = []
    for k in range(len(errors)):
        start = max(0, k + 1 - window)
        slopes.append(fit_slope(n_elements[start:k + 1], errors[start:k + 1]) if k else None)
    return slopes


def _solve_on(mesh: Mesh, s: float, settings, config: AssemblyConfig, tag: str):
    system = assemble(mesh, s, f=settings.f, config=config)
    if settings.dump_system:
        dump_system(system, output_path(settings, f"system_s{s}_{tag}.bin"))
    return system, solve(system, tol=settings.solver_tol)


def _surrogate_errors(solutions: List[GalerkinSolution], fine: GalerkinSolution, fine_system) -> List[float]:
    errors = []
    for solution in solutions:
        error = prolongated_energy_error(solution, fine, fine_system)
        try:
            nested = surrogate_energy_error(solution, fine)
            if error > 0.0 and abs(nested - error) > SURROGATE_MISMATCH * error:
                logger.warning(f"Energy identity {nested:.6g} and prolongation error {error:.6g} differ "
                               f"on {solution.n_dofs} dofs")
        except NestingError as e:
            logger.warning(f"Nested-energy identity unavailable: {e}")
        errors.append(error)
    return errors


def run_rates_for(settings, s: float) -> RatesOutcome:
    config = AssemblyConfig.from_settings(settings)
    domain = make_domain(settings.domain, settings.disk_sides)
    mesh0 = make_initial_mesh(domain, settings.target_h)
    meshes, trace = greedy(mesh0, PracticalMarking(settings.theta),
                           GreedyStop(max_elements=settings.cap, time_max=settings.time_max),
                           hard_cap=settings.hard_cap)

    solutions, seconds = [], []
    for k, mesh in enumerate(meshes):
        started = time.perf_counter()
        _, solution = _solve_on(mesh, s, settings, config, f"k{k}")
        seconds.append(time.perf_counter() - started)
        solutions.append(solution)

    if uses_closed_form(settings, mesh0):
        validate_closed_form_1d(s)
        exact = closed_form_energy(1, s)
        errors = [closed_form_energy_error(solution, exact) for solution in solutions]
        reference = "closed_form"
    else:
        fine_mesh = uniform_refine(meshes[-1], settings.fine_sweeps)
        fine_system, fine = _solve_on(fine_mesh, s, settings, config, "fine")
        errors = _surrogate_errors(solutions, fine, fine_system)
        reference = f"uniform_refinement_x{settings.fine_sweeps}"

    n_elements = [m.n_elements for m in meshes]
    slopes = running_slopes(n_elements, errors)
    marked = [r.n_marked for r in trace.records]
    records = [
        ConvergenceRecord(
            step=k,
            n_elements=n_elements[k],
            dofs=solutions[k].n_dofs,
            error=errors[k],
            slope=slopes[k],
            cumulative_marked=sum(marked[:k]),
            seconds=seconds[k] if settings.record_timings else 0.0,
        )
        for k in range(len(meshes))
    ]
    for record in records:
        logger.info(f"s={s} step {record.step}: #T={record.n_elements} dofs={record.dofs} "
                    f"error={record.error:.6e} slope={record.slope}")

    partial = len(records) < MIN_RECORDS
    if partial:
        logger.warning(f"Only {len(records)} records for s={s}; the cap was reached early")

    header = metadata_header(settings, s=s, reference=reference, theta=settings.theta, cap=settings.cap,
                             partial=partial)
    csv_path = write_table(output_path(settings, f"rates_s{s}.csv"), RATES_COLUMNS,
                           (r.as_row() for r in records), header)
    trace_path = trace.write_csv(output_path(settings, f"trace_s{s}.csv"),
                                 metadata_header(settings, s=s), settings.record_timings)
    export_solution(solutions[-1], output_path(settings, f"solution_s{s}.csv"), metadata_header(settings))

    tail = records[-SLOPE_WINDOW:]
    return RatesOutcome(
        s=s,
        records=records,
        reference=reference,
        partial=partial,
        final_slope=fit_slope([r.n_elements for r in tail], [r.error for r in tail]),
        lambda0=trace.lambda0,
        csv_path=csv_path,
        trace_path=trace_path,
    )


def run_rates(settings) -> Dict[float, RatesOutcome]:
    outcomes = {}
    for s in settings.s_list:
        logger.info(f"Rates for s={s} on '{settings.domain}' with theta={settings.theta}, cap={settings.cap}")
        outcomes[s] = run_rates_for(settings, s)

    dim = make_domain(settings.domain, settings.disk_sides).dim
    reference_rate = optimal_indices(dim, 0.5, 0.1).rate if dim >= 2 else -1.0
    write_plot_script(settings, {f"s={s}": o.csv_path for s, o in outcomes.items()}, reference_rate)
    for s, outcome in outcomes.items():
        logger.info(f"s={s}: final slope {outcome.final_slope}, Lambda0 {outcome.lambda0}, "
                    f"{os.path.basename(outcome.csv_path)}")
    return outcomes
