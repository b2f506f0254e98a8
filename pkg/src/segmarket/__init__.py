"""segmarket - steady-state equilibria of a two-sector search market with statistical discrimination."""

__version__ = "1.0.0"
__author__ = "Nik Jois <nikjois@llamasearch.ai>"
__description__ = "Equilibrium solver and flow-simulation oracle for a search model of statistical discrimination"

from .cli import app

__all__ = ["app"]
