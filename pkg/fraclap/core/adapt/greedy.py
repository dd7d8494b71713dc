import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from fraclap.core.adapt.marking import DISTANCE_FLOOR, MarkingStrategy, practical_threshold
from fraclap.core.exceptions import ConfigError, MeshError
from fraclap.core.mesh import Mesh, refine, signed_boundary_distance
from fraclap.core.utils.tables import write_table

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("j", "n_elements", "n_marked", "parameter", "lambda0", "seconds")


@dataclass(frozen=True)
class GreedyRecord:
    j: int
    n_elements: int
    n_marked: int
    parameter: float
    lambda0: Optional[float]
    seconds: float


@dataclass(frozen=True)
class GreedyStop:
    """Stop bounds of the loop; at least one must be set."""
    max_elements: Optional[int] = None
    max_iterations: Optional[int] = None
    time_max: Optional[float] = None

    def __post_init__(self):
        if self.max_elements is None and self.max_iterations is None and self.time_max is None:
            raise ConfigError("GREEDY needs a bounded stopping criterion")


@dataclass
class GreedyTrace:
    strategy: str
    records: List[GreedyRecord] = field(default_factory=list)
    stopped_by: str = ""

    @property
    def cumulative_marked(self) -> int:
        return sum(r.n_marked for r in self.records)

    @property
    def lambda0(self) -> Optional[float]:
        """(#T_k - #T_0) / sum of #M_j; None when nothing was marked."""
        if not self.records or self.cumulative_marked == 0:
            return None
        return (self.records[-1].n_elements - self.records[0].n_elements) / self.cumulative_marked

    def is_consistent(self) -> bool:
        for current, following in zip(self.records, self.records[1:]):
            if following.n_elements - current.n_elements < current.n_marked:
                return False
        return True

    def lambda0_exploded(self, after: int = 5, factor: float = 2.0) -> bool:
        values = [r.lambda0 for r in self.records if r.lambda0 is not None]
        if len(values) <= after:
            return False
        reference = values[after]
        return any(v > factor * reference for v in values[after + 1:])

    def as_rows(self, record_timings: bool = False) -> List[Tuple]:
        return [
            (r.j, r.n_elements, r.n_marked, r.parameter, "" if r.lambda0 is None else r.lambda0,
             r.seconds if record_timings else 0.0)
            for r in self.records
        ]

    def write_csv(self, path: str, metadata: Optional[Dict[str, object]] = None, record_timings: bool = False) -> str:
        header = {"strategy": self.strategy, "stopped_by": self.stopped_by}
        header.update(metadata or {})
        return write_table(path, TRACE_COLUMNS, self.as_rows(record_timings), header)


def greedy(mesh0: Mesh, strategy: MarkingStrategy, stop: GreedyStop,
           hard_cap: int = 200000) -> Tuple[List[Mesh], GreedyTrace]:
    """Mark and refine until nothing is marked or a stop bound is reached.

    The last mesh may exceed max_elements by one refinement step.
    """
    meshes = [mesh0]
    trace = GreedyTrace(strategy=strategy.get_strategy_name())
    mesh = mesh0
    n0 = mesh0.n_elements
    marked_total = 0
    started = time.perf_counter()
    j = 0

    while True:
        if stop.max_elements is not None and mesh.n_elements >= stop.max_elements:
            trace.stopped_by = "max_elements"
            break
        if stop.max_iterations is not None and j >= stop.max_iterations:
            trace.stopped_by = "max_iterations"
            break
        if stop.time_max is not None and time.perf_counter() - started > stop.time_max:
            trace.stopped_by = "time_max"
            logger.warning(f"GREEDY stopped by the time budget after {j} iterations")
            break

        tick = time.perf_counter()
        marked = strategy.mark(mesh, j)
        lambda0 = (mesh.n_elements - n0) / marked_total if marked_total else None
        if not marked:
            trace.records.append(GreedyRecord(j, mesh.n_elements, 0, strategy.parameter(j), lambda0,
                                              time.perf_counter() - tick))
            trace.stopped_by = "empty_marking"
            break

        refined = refine(mesh, marked)
        seconds = time.perf_counter() - tick
        trace.records.append(GreedyRecord(j, mesh.n_elements, len(marked), strategy.parameter(j), lambda0, seconds))
        logger.info(f"GREEDY step {j}: {mesh.n_elements} elements, {len(marked)} marked -> "
                    f"{refined.n_elements} ({seconds:.2f}s)")

        if refined.n_elements - mesh.n_elements < len(marked):
            raise MeshError(f"Refinement added {refined.n_elements - mesh.n_elements} elements "
                            f"for {len(marked)} marked at step {j}")
        if refined.n_elements > hard_cap:
            raise MeshError(f"GREEDY exceeded the hard cap of {hard_cap} elements at step {j}")

        marked_total += len(marked)
        meshes.append(refined)
        mesh = refined
        j += 1

    if trace.stopped_by != "empty_marking":
        lambda0 = (mesh.n_elements - n0) / marked_total if marked_total else None
        trace.records.append(GreedyRecord(j, mesh.n_elements, 0, strategy.parameter(j), lambda0, 0.0))

    logger.info(f"GREEDY finished after {len(meshes) - 1} refinements ({trace.stopped_by}): "
                f"{mesh.n_elements} elements, Lambda0 = {trace.lambda0}")
    return meshes, trace


@dataclass(frozen=True)
class GradingStatistics:
    bands: Tuple[Tuple[float, float, int, float], ...]
    inner_median: float
    outer_median: float

    @property
    def ratio(self) -> float:
        """Median outer size over median inner size."""
        if self.inner_median <= 0.0 or math.isnan(self.inner_median):
            return float("nan")
        return self.outer_median / self.inner_median

    @property
    def monotone(self) -> bool:
        medians = [m for _, _, count, m in self.bands if count > 0]
        return all(b <= a * (1.0 + 1e-12) for a, b in zip(medians, medians[1:]))


def grading_statistics(mesh: Mesh, levels: int = 8, inner: float = 0.05, outer: float = 0.4) -> GradingStatistics:
    """Median element size per dyadic boundary-distance band [2^-(k+1), 2^-k], k = 0..levels-1."""
    arrays = mesh.arrays()
    sizes = np.abs(arrays.volumes)
    distance = signed_boundary_distance(mesh.domain, arrays.barycenters)

    bands = []
    for k in range(levels):
        low, high = 2.0 ** (-k - 1), 2.0 ** (-k)
        inside = (distance >= low) & (distance < high)
        median = float(np.median(sizes[inside])) if inside.any() else float("nan")
        bands.append((low, high, int(inside.sum()), median))

    near = sizes[distance < inner]
    far = sizes[distance > outer]
    return GradingStatistics(
        bands=tuple(bands),
        inner_median=float(np.median(near)) if len(near) else float("nan"),
        outer_median=float(np.median(far)) if len(far) else float("nan"),
    )


def equidistribution_ratio(mesh: Mesh, theta: float) -> float:
    """max_T |T| / (theta (#T)^-1 (ln #T)^2 dist); at most 2 on a GREEDY output."""
    arrays = mesh.arrays()
    distance = signed_boundary_distance(mesh.domain, arrays.barycenters)
    distance = np.maximum(distance, DISTANCE_FLOOR * arrays.h)
    return float((np.abs(arrays.volumes) / practical_threshold(mesh.n_elements, theta, distance)).max())


def theta_schedule(values: Sequence[float]) -> List[float]:
    schedule = [float(v) for v in values]
    if not schedule or any(v <= 1.0 for v in schedule):
        raise ConfigError(f"theta schedule must be non-empty with values above 1, got {schedule}")
    return schedule
