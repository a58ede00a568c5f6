"""Tiny arithmetic expression language for coefficient and data fields.

Grammar: numbers (decimal or scientific), variables x, x1, x2, t, the
operators + - * / ^ with parentheses, functions sin, cos, exp, sqrt, the
constant pi, and the indicator chi(s, lo, hi) which is 1 on the half-open
interval [lo, hi) and 0 elsewhere. ^ is right associative and binds
tighter than unary minus, so -x^2 == -(x^2).

Expressions compile to a picklable AST evaluated with numpy, so compiled
fields can cross process boundaries in worker pools.
"""

import math
import re

import numpy as np

__all__ = ["ExpressionError", "Expression", "parse_expression",
           "eval_expression"]

_TOKEN = re.compile(r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*|/|\+|-|\^|\(|\)|,)
  | (?P<ws>\s+)
""", re.VERBOSE)

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt}
_VARIABLES = ("x", "x1", "x2", "t")


class ExpressionError(ValueError):
    """Malformed expression text or an evaluation that left the reals."""


def _tokenize(text: str):
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionError(
                f"unexpected character {text[pos]!r} at position {pos} "
                f"in {text!r}")
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        tokens.append((m.lastgroup, m.group()))
    return tokens


class _Parser:
    # precedence, loosest first:  + -  |  * /  |  unary -  |  ^
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise ExpressionError(f"unexpected end of expression in {self.text!r}")
        self.pos += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            raise ExpressionError(
                f"expected {value!r} but found {tok[1]!r} in {self.text!r}")

    def parse(self):
        node = self.sum()
        if self.peek() is not None:
            raise ExpressionError(
                f"trailing input {self.peek()[1]!r} in {self.text!r}")
        return node

    def sum(self):
        node = self.product()
        while self.peek() and self.peek()[1] in "+-":
            op = self.take()[1]
            node = ("bin", op, node, self.product())
        return node

    def product(self):
        node = self.unary()
        while self.peek() and self.peek()[1] in "*/":
            op = self.take()[1]
            node = ("bin", op, node, self.unary())
        return node

    def unary(self):
        if self.peek() and self.peek()[1] in "+-":
            op = self.take()[1]
            child = self.unary()
            return child if op == "+" else ("neg", child)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() and self.peek()[1] == "^":
            self.take()
            return ("bin", "^", base, self.unary())
        return base

    def atom(self):
        kind, value = self.take()
        if kind == "num":
            return ("num", float(value))
        if kind == "name":
            if value == "pi":
                return ("num", math.pi)
            if value in _VARIABLES:
                return ("var", value)
            if value == "chi":
                args = self.arguments()
                if len(args) != 3:
                    raise ExpressionError(
                        f"chi takes 3 arguments, got {len(args)} in {self.text!r}")
                return ("chi", *args)
            if value in _FUNCTIONS:
                args = self.arguments()
                if len(args) != 1:
                    raise ExpressionError(
                        f"{value} takes 1 argument, got {len(args)} in {self.text!r}")
                return ("call", value, args[0])
            raise ExpressionError(f"unknown name {value!r} in {self.text!r}")
        if value == "(":
            node = self.sum()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected token {value!r} in {self.text!r}")

    def arguments(self):
        self.expect("(")
        args = [self.sum()]
        while self.peek() and self.peek()[1] == ",":
            self.take()
            args.append(self.sum())
        self.expect(")")
        return args


def _walk_variables(node, found):
    tag = node[0]
    if tag == "var":
        found.add(node[1])
    elif tag in ("neg", "call"):
        _walk_variables(node[-1], found)
    elif tag == "bin":
        _walk_variables(node[2], found)
        _walk_variables(node[3], found)
    elif tag == "chi":
        for child in node[1:]:
            _walk_variables(child, found)


def _evaluate(node, env):
    tag = node[0]
    if tag == "num":
        return node[1]
    if tag == "var":
        return env[node[1]]
    if tag == "neg":
        return -_evaluate(node[1], env)
    if tag == "bin":
        left = _evaluate(node[2], env)
        right = _evaluate(node[3], env)
        if node[1] == "+":
            return left + right
        if node[1] == "-":
            return left - right
        if node[1] == "*":
            return left * right
        if node[1] == "/":
            return np.divide(left, right)
        return np.power(left, right)
    if tag == "call":
        return _FUNCTIONS[node[1]](_evaluate(node[2], env))
    # chi: 1 on [lo, hi), 0 elsewhere
    arg = _evaluate(node[1], env)
    lo = _evaluate(node[2], env)
    hi = _evaluate(node[3], env)
    return 1.0 * ((arg >= lo) & (arg < hi))


class Expression:
    """A parsed expression, callable on point arrays.

    Parameters
    ----------
    text : str
        Source in the mini-language.

    Attributes
    ----------
    variables : frozenset of str
        Names the expression reads, subset of {x, x1, x2, t}.
    """

    def __init__(self, text: str):
        self.text = str(text)
        self.ast = _Parser(self.text).parse()
        found = set()
        _walk_variables(self.ast, found)
        self.variables = frozenset(found)

    def __call__(self, points: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Evaluate at an (n, dim) array of points and a time.

        Returns an array of n finite values; raises ExpressionError if any
        value is nan or infinite (division by zero, sqrt of a negative).
        """
        points = np.asarray(points, dtype=float)
        if points.ndim != 2:
            raise ExpressionError("points must be an (n, dim) array")
        env = {"x": points[:, 0], "x1": points[:, 0], "t": t}
        if points.shape[1] > 1:
            env["x2"] = points[:, 1]
        elif "x2" in self.variables:
            raise ExpressionError(
                f"{self.text!r} uses x2 but the domain is one-dimensional")
        with np.errstate(all="ignore"):
            out = _evaluate(self.ast, env)
        out = np.broadcast_to(np.asarray(out, dtype=float),
                              (len(points),)).copy()
        if not np.all(np.isfinite(out)):
            raise ExpressionError(
                f"{self.text!r} evaluated to a non-finite value")
        return out

    def __repr__(self):
        return f"Expression({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and self.ast == other.ast

    def __hash__(self):
        return hash(self.text)

    # pickled by source text so worker processes rebuild the AST
    def __reduce__(self):
        return (Expression, (self.text,))


def parse_expression(text: str) -> Expression:
    """Parse text into an Expression, raising ExpressionError on bad input."""
    return Expression(text)


def eval_expression(expr: str, point, t: float = 0.0) -> float:
    """Evaluate an expression at a single point and time.

    Parameters
    ----------
    expr : str
        Expression text.
    point : float or sequence of float
        Coordinates of one point.
    t : float
        Time value bound to the variable t.

    Returns
    -------
    float
    """
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    return float(parse_expression(expr)(pts, t)[0])
