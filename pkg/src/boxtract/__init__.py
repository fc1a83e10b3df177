"""boxtract: extraction compiler from a mini dependently typed calculus.

Pipeline: parse -> check -> certifying transforms -> erasure to λ□ ->
usage analysis -> dearging -> annotation -> pretty-printing (ML-family /
Elm / Rust), validated by differential evaluation.
"""

__version__ = "0.1.0"
