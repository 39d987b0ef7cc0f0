"""
Verification harness for poisres.

Problem-file loading, bundled examples and the run orchestrator.
No printing happens here; the CLI renders what the runner returns.
"""
