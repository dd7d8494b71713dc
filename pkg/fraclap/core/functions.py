"""Right-hand sides given as short numpy expressions in the coordinates x, y."""
import ast
import logging
from typing import Callable

import numpy as np

from fraclap.core.exceptions import ConfigError

logger = logging.getLogger(__name__)

_ALLOWED_NAMES = {
    "x", "y", "pi", "e",
    "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh", "arctan", "minimum", "maximum",
}
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Mod,
)

_NAMESPACE = {
    "pi": np.pi, "e": np.e,
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh, "arctan": np.arctan,
    "minimum": np.minimum, "maximum": np.maximum,
}


def parse_expression(expression: str) -> ast.Expression:
    try:
        tree = ast.parse(expression.strip(), mode="eval")
    except SyntaxError as e:
        raise ConfigError(f"Cannot parse source expression '{expression}': {e}") from e
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ConfigError(f"Unsupported syntax '{type(node).__name__}' in '{expression}'")
        if isinstance(node, ast.Name) and node.id not in _ALLOWED_NAMES:
            raise ConfigError(f"Unknown name '{node.id}' in '{expression}'")
    return tree


def make_source(expression: str) -> Callable[[np.ndarray], np.ndarray]:
    """Compile an expression into f(points) with points of shape (n, d)."""
    tree = parse_expression(expression)
    code = compile(tree, "<source>", "eval")

    def source(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        names = dict(_NAMESPACE)
        names["x"] = points[:, 0]
        names["y"] = points[:, 1] if points.shape[1] > 1 else np.zeros(len(points))
        value = eval(code, {"__builtins__": {}}, names)
        return np.broadcast_to(np.asarray(value, dtype=float), (len(points),)).copy()

    source.expression = expression
    logger.debug(f"Compiled source expression '{expression}'")
    return source
