import logging
from typing import List, Optional

from fraclap.commands.models import SolveSummary
from fraclap.commands.output import metadata_header, output_path, write_json
from fraclap.core.assembly import AssemblyConfig, assemble
from fraclap.core.assembly.dump import dump_system
from fraclap.core.mesh import Mesh, make_domain, make_initial_mesh
from fraclap.core.mesh.io import load_mesh
from fraclap.core.solution import (
    closed_form_1d,
    closed_form_ball,
    closed_form_energy,
    closed_form_energy_error,
    export_solution,
    nodal_deviation,
    solve,
)

logger = logging.getLogger(__name__)


def _closed_form_checks(settings, mesh: Mesh, solution) -> dict:
    """Comparisons with u = K (1 - |x|^2)_+^s where the domain is, or approximates, the unit ball."""
    if settings.f.strip() != "1":
        return {}
    if mesh.dim == 1 and tuple(v[0] for v in mesh.domain.vertices) == (-1.0, 1.0):
        exact = closed_form_1d(solution.s)
    elif settings.domain == "disk_polygon" and mesh.domain.name == "disk_polygon":
        exact = closed_form_ball(2, solution.s)
    else:
        return {}
    energy = closed_form_energy(mesh.dim, solution.s)
    checks = {
        "nodal_deviation": nodal_deviation(solution, exact),
        "exact_energy": energy,
        "energy_error": closed_form_energy_error(solution, energy) if energy >= solution.energy else None,
    }
    logger.info(f"Closed-form comparison for s={solution.s}: {checks}")
    return checks


def run_solve(settings, mesh_path: Optional[str] = None) -> List[SolveSummary]:
    """Assemble and solve once per s on the initial mesh of the domain, or on a mesh file."""
    if mesh_path:
        mesh = load_mesh(mesh_path)
    else:
        mesh = make_initial_mesh(make_domain(settings.domain, settings.disk_sides), settings.target_h)
    config = AssemblyConfig.from_settings(settings)

    summaries = []
    for s in settings.s_list:
        system = assemble(mesh, s, f=settings.f, config=config)
        if settings.dump_system:
            dump_system(system, output_path(settings, f"system_s{s}.bin"))
        solution = solve(system, tol=settings.solver_tol)
        path = export_solution(solution, output_path(settings, f"solution_s{s}.csv"), metadata_header(settings))
        summaries.append(SolveSummary(
            s=s,
            domain=mesh.domain.name,
            n_elements=mesh.n_elements,
            dofs=solution.n_dofs,
            energy=solution.energy,
            residual=solution.residual,
            method=solution.method,
            solution_path=path,
            checks=_closed_form_checks(settings, mesh, solution),
        ))
        logger.info(f"Solved s={s}: {solution.n_dofs} dofs, energy {solution.energy:.10g}, {solution.method}")

    write_json(settings, "solve_summary.json", {"solutions": [summary.model_dump() for summary in summaries]})
    return summaries
