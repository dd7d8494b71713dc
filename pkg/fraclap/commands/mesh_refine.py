import logging
from typing import Optional

from fraclap.commands.output import metadata_header, output_path, write_json
from fraclap.core.adapt import GreedyStop, PracticalMarking, grading_statistics, greedy
from fraclap.core.mesh import make_domain, make_initial_mesh, minimum_angle, uniform_refine
from fraclap.core.mesh.io import load_mesh, save_mesh

logger = logging.getLogger(__name__)


def run_mesh_refine(settings, mesh_path: Optional[str] = None, sweeps: int = 0) -> str:
    """GREEDY with the practical rule, or `sweeps` uniform bisection sweeps; writes the final mesh."""
    if mesh_path:
        mesh0 = load_mesh(mesh_path)
    else:
        mesh0 = make_initial_mesh(make_domain(settings.domain, settings.disk_sides), settings.target_h)

    summary = {"initial_elements": mesh0.n_elements}
    if sweeps > 0:
        final = uniform_refine(mesh0, sweeps)
        summary["sweeps"] = sweeps
    else:
        meshes, trace = greedy(mesh0, PracticalMarking(settings.theta),
                               GreedyStop(max_elements=settings.cap, time_max=settings.time_max),
                               hard_cap=settings.hard_cap)
        final = meshes[-1]
        trace.write_csv(output_path(settings, "trace.csv"), metadata_header(settings), settings.record_timings)
        summary.update({"steps": len(meshes) - 1, "lambda0": trace.lambda0, "stopped_by": trace.stopped_by})

    final.check_conformity()
    summary["elements"] = final.n_elements
    summary["vertices"] = final.n_vertices
    if final.dim == 2:
        stats = grading_statistics(final)
        summary.update({"minimum_angle": minimum_angle(final), "grading_ratio": stats.ratio,
                        "grading_monotone": stats.monotone})
    path = str(save_mesh(final, output_path(settings, "mesh.txt")))
    summary["mesh"] = path
    write_json(settings, "mesh_summary.json", summary)
    logger.info(f"Refined mesh: {summary}")
    return path
