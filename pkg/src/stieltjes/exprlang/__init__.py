"""Text expressions for integrands, densities and maps."""

from .compiler import CompiledFn, compile_expr, evaluate
from .parser import (BinOp, Call, Compare, Const, ExprSyntaxError, Neg, Num, Var, parse,
                     to_source)

__all__ = ["BinOp", "Call", "Compare", "CompiledFn", "Const", "ExprSyntaxError", "Neg", "Num",
           "Var", "compile_expr", "evaluate", "parse", "to_source"]
