from .geometry import (
    Domain,
    closest_boundary_points,
    interval_domain,
    make_domain,
    polygon_domain,
    signed_boundary_distance,
)
from .mesh import (
    BoundaryDistance,
    Element,
    Mesh,
    MeshArrays,
    Star,
    bisect,
    boundary_distance,
    make_initial_mesh,
    minimal_star_constant,
    minimum_angle,
    refine,
    stars,
    uniform_refine,
    validate_star_constant,
)
