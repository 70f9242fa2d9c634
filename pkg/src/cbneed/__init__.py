"""
Call-by-need evaluation on a de Bruijn-indexed control stack.

``calculus`` defines the reference semantics (standard reduction),
``ckplus`` the abstract machine that finds bindings by stack index,
``sc`` its stack compaction, and ``harness`` the tools that check the
machine against the calculus.
"""

import sys

# terms, contexts and stacks are walked recursively; deep chains need room
if sys.getrecursionlimit() < 20_000:
    sys.setrecursionlimit(20_000)

from .calculus import Answer, BudgetExceeded, eval_need, step_need
from .ckplus import eval_ckplus, inject, step, unload
from .sc import CompactionPolicy, compact, normalize
from .syntax import App, Lam, Var, parse, pretty

__all__ = [
    "Var", "Lam", "App", "parse", "pretty",
    "Answer", "BudgetExceeded", "eval_need", "step_need",
    "inject", "step", "unload", "eval_ckplus",
    "compact", "normalize", "CompactionPolicy",
]
