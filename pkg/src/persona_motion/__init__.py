"""Persona-conditioned text-to-motion diffusion on a synthetic corpus, built on numpy."""

__version__ = "0.1.0"
