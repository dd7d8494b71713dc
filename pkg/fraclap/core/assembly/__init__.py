from .dofs import BOUNDARY, DofMap
from .stiffness import AssemblyConfig, StiffnessSystem, assemble, assemble_bilinear, assemble_load, lambda_constant
