"""Independent evaluator for exported closed-form text."""

import re

import sympy


class ExpressionOracle:
    """Evaluates an exported ``sign{...}`` text with sympy, knowing nothing of the model."""

    def __init__(self, text):
        head, body = text.split("=", 1)
        self.names = re.findall(r"x\d+", head)
        body = body.strip()
        assert body.startswith("sign{") and body.endswith("}")
        expr = body[len("sign{"):-1].replace("exp[", "exp(").replace("]", ")").replace("^", "**")
        expr = re.sub(r"(\d)\s+exp", r"\1 * exp", expr)
        self.symbols = sympy.symbols(self.names)
        self.expr = sympy.sympify(" ".join(expr.split()), locals={n: s for n, s in zip(self.names, self.symbols)})
        self.terms = str(self.expr).count("exp(")
        self.fn = sympy.lambdify(self.symbols, self.expr, "math")

    def __call__(self, x):
        return float(self.fn(*[float(v) for v in x]))
