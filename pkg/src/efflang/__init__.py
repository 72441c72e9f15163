"""An executable call-by-push-value language with algebraic effects,
equational effect theories, and checked handlers."""

__version__ = "0.1.0"
