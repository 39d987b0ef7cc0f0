"""
Core primitives for poisres.

These modules define the expression language, Poisson structures, maps,
resolution candidates and obstruction analysis. Everything here is pure:
problem files, the example catalog and run orchestration live in
poisres.runner.
"""
