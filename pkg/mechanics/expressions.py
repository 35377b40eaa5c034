"""
Junction - Plate-Rod Limit Model Solver
Force Expression Grammar

Small arithmetic grammar over the coordinate symbols, compiled from a
whitelisted Python AST into a numpy evaluator.

Usage:
    expr = compile_expression("sin(pi*x1)^2 + 0.5*x3", ("x1", "x2", "x3"))
    values = expr(x1=np.array([...]), x2=..., x3=...)
"""

import ast
import operator
from dataclasses import dataclass
from typing import Callable

import numpy as np

from mechanics.errors import ExpressionError

FUNCTIONS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

CONSTANTS = {"pi": np.pi, "e": np.e}

_BINARY = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}

_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


@dataclass(frozen=True)
class Expression:
    """A compiled scalar expression of the coordinate symbols."""
    source: str
    variables: tuple[str, ...]
    tree: ast.Expression

    def __call__(self, **coords: np.ndarray) -> np.ndarray:
        missing = [v for v in self.variables if v not in coords]
        if missing:
            raise ExpressionError(f"'{self.source}': missing coordinates {missing}")
        shape = np.broadcast(*[np.asarray(c) for c in coords.values()]).shape
        value = _evaluate(self.tree.body, coords, self.source)
        return np.broadcast_to(np.asarray(value, dtype=float), shape).copy()

    @property
    def is_zero(self) -> bool:
        body = self.tree.body
        return isinstance(body, ast.Constant) and body.value == 0


def compile_expression(source: str | float | int, variables: tuple[str, ...]) -> Expression:
    """
    Parse and validate an expression string.

    Args:
        source: Expression text; '^' is read as power. Numbers are accepted too.
        variables: Coordinate symbols the expression may use.

    Raises:
        ExpressionError: on syntax errors or any construct outside the grammar.
    """
    text = str(source).strip()
    if not text:
        raise ExpressionError("empty expression")
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as e:
        raise ExpressionError(f"'{text}': syntax error at column {e.offset}") from e
    _validate(tree.body, set(variables), text)
    return Expression(text, tuple(variables), tree)


def _validate(node: ast.AST, variables: set[str], source: str):
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ExpressionError(f"'{source}': only numeric constants are allowed")
    elif isinstance(node, ast.Name):
        if node.id not in variables and node.id not in CONSTANTS:
            raise ExpressionError(f"'{source}': unknown symbol '{node.id}'")
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINARY:
            raise ExpressionError(f"'{source}': operator {type(node.op).__name__} not allowed")
        _validate(node.left, variables, source)
        _validate(node.right, variables, source)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNARY:
            raise ExpressionError(f"'{source}': operator {type(node.op).__name__} not allowed")
        _validate(node.operand, variables, source)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError(f"'{source}': unknown function")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"'{source}': {node.func.id}() takes exactly one argument")
        _validate(node.args[0], variables, source)
    else:
        raise ExpressionError(f"'{source}': construct {type(node).__name__} not allowed")


def _evaluate(node: ast.AST, coords: dict[str, np.ndarray], source: str):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in coords:
            return np.asarray(coords[node.id], dtype=float)
        return CONSTANTS[node.id]
    if isinstance(node, ast.BinOp):
        return _BINARY[type(node.op)](
            _evaluate(node.left, coords, source), _evaluate(node.right, coords, source)
        )
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_evaluate(node.operand, coords, source))
    if isinstance(node, ast.Call):
        return FUNCTIONS[node.func.id](_evaluate(node.args[0], coords, source))
    raise ExpressionError(f"'{source}': cannot evaluate {type(node).__name__}")
