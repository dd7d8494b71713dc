from .greedy import (
    GradingStatistics,
    GreedyRecord,
    GreedyStop,
    GreedyTrace,
    equidistribution_ratio,
    grading_statistics,
    greedy,
    theta_schedule,
)
from .marking import (
    Indicator,
    MarkingStrategy,
    PracticalMarking,
    SeminormMarking,
    mark_practical,
    mark_seminorm,
    practical_indicators,
    seminorm_indicators,
)
