"""Knowledge-based robustness checking for a small imperative language with attacker holes."""

from .lattice import BOTTOM, PT, PU, ST, SU, TOP, Conf, Integ, Level, lattice_ops
from .parser import parse_command, parse_file, parse_program
from .semantics import PI, PS, RunResult, UPSeq, eval_expr, low_projection, run, step, trusted_projection
from .syntax import Program, SecurityEnv, pretty_program

__version__ = "0.1.0"

__all__ = [
    "BOTTOM", "PT", "PU", "ST", "SU", "TOP", "Conf", "Integ", "Level", "lattice_ops",
    "parse_command", "parse_file", "parse_program",
    "PI", "PS", "RunResult", "UPSeq", "eval_expr", "low_projection", "run", "step",
    "trusted_projection", "Program", "SecurityEnv", "pretty_program", "__version__",
]
